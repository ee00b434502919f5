//! Macroscopic fields, the projection onto local equilibria and the torus
//! Poisson solve.
//!
//! The projection `Pi f` replaces every momentum column by the equilibrium
//! profile carrying the same density:
//!
//! ```text
//! Pi f(x, p) = b(x) M(p) / (1 - k b(x) M(p)),   sum_p Pi f dp = rho(x)
//! ```
//!
//! `b(x)` is found by bisection on the grid quadrature, so the density match
//! is exact up to the root-solve tolerance rather than up to the
//! quadrature error.

use std::f64::consts::PI;

use log::debug;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::equilibria::{
    beta_of_mass, beta_of_mass_near, profile_from_maxwellian, EquilibriumError,
    MomentumQuadrature, Statistics,
};
use crate::grid::{integrate_phase, GridSpec, PhaseField};

#[derive(Debug, Error)]
pub enum MacroError {
    #[error("no equilibrium carries density {rho} at x-cell {ix}: {source}")]
    Column {
        ix: usize,
        rho: f64,
        source: EquilibriumError,
    },
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// `rho(x) = sum_p f dp`.
pub fn density(f: &PhaseField) -> Vec<f64> {
    let dp = f.grid().dp();
    f.columns().map(|c| c.iter().sum::<f64>() * dp).collect()
}

/// `j(x) = sum_p p f dp`.
pub fn macro_flux(f: &PhaseField) -> Vec<f64> {
    let p = f.grid().p_centers();
    let dp = f.grid().dp();
    f.columns()
        .map(|c| c.iter().zip(&p).map(|(v, p)| v * p).sum::<f64>() * dp)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub field: PhaseField,
    pub beta: Vec<f64>,
}

/// Per-column density matching onto the equilibrium manifold.
#[derive(Debug, Clone)]
pub struct Projector {
    grid: GridSpec,
    statistics: Statistics,
    quadrature: MomentumQuadrature,
    maxwellian: Vec<f64>,
}

impl Projector {
    pub fn new(grid: GridSpec, statistics: Statistics) -> Self {
        Projector {
            grid,
            statistics,
            quadrature: grid.momentum_quadrature(),
            maxwellian: grid.maxwellian(),
        }
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    /// Profile parameter carrying density `rho` on this grid.
    pub fn beta_for(&self, rho: f64, guess: Option<f64>) -> Result<f64, EquilibriumError> {
        beta_of_mass_near(rho, self.statistics, 1, &self.quadrature, guess)
    }

    /// Projects `f`; `warm` holds last known `b(x)` values used to narrow
    /// each bracket.
    pub fn project(&self, f: &PhaseField, warm: Option<&[f64]>) -> Result<Projection, MacroError> {
        let rho = density(f);
        let beta: Vec<f64> = rho
            .par_iter()
            .enumerate()
            .map(|(ix, &r)| {
                self.beta_for(r, warm.map(|w| w[ix]))
                    .map_err(|source| MacroError::Column { ix, rho: r, source })
            })
            .collect::<Result<_, _>>()?;
        let kappa = self.statistics.kappa();
        let mut field = PhaseField::zeros(self.grid);
        for (col, &b) in field.values_mut().chunks_exact_mut(self.grid.np()).zip(&beta) {
            for (v, &m) in col.iter_mut().zip(&self.maxwellian) {
                *v = profile_from_maxwellian(b, kappa, m);
            }
        }
        Ok(Projection { field, beta })
    }
}

/// Convenience wrapper around [`Projector::project`].
pub fn project(f: &PhaseField, statistics: Statistics) -> Result<Projection, MacroError> {
    Projector::new(*f.grid(), statistics).project(f, None)
}

/// Largest residuals of the three moment identities of a projection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MomentReport {
    /// `max_x |sum p Pi f dp|`
    pub first: f64,
    /// `max_x |sum p (Pi f + k (Pi f)^2) dp|`
    pub flux: f64,
    /// `max_x |sum p^2 (Pi f + k (Pi f)^2) dp - rho|`
    pub second: f64,
}

impl MomentReport {
    pub fn max(&self) -> f64 {
        self.first.max(self.flux).max(self.second)
    }
}

pub fn moment_checks(pi_f: &PhaseField, statistics: Statistics) -> MomentReport {
    let grid = pi_f.grid();
    let p = grid.p_centers();
    let dp = grid.dp();
    let kappa = statistics.kappa();
    let mut r = MomentReport {
        first: 0.0,
        flux: 0.0,
        second: 0.0,
    };
    for col in pi_f.columns() {
        let (mut m0, mut m1, mut q1, mut q2) = (0.0, 0.0, 0.0, 0.0);
        for (&v, &p) in col.iter().zip(&p) {
            let q = v + kappa * v * v;
            m0 += v;
            m1 += p * v;
            q1 += p * q;
            q2 += p * p * q;
        }
        r.first = r.first.max((m1 * dp).abs());
        r.flux = r.flux.max((q1 * dp).abs());
        r.second = r.second.max(((q2 - m0) * dp).abs());
    }
    r
}

/// `phi` and `d_x phi` for `-phi'' = rhs` on the unit torus.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub phi: Vec<f64>,
    pub grad_phi: Vec<f64>,
    /// Mean that was removed from the right-hand side.
    pub removed_mean: f64,
}

/// Anything that can solve the torus Poisson problem. The check runner takes
/// a trait object so a faulty solver can be substituted.
pub trait PoissonSolver: Sync {
    fn solve(&self, rhs: &[f64]) -> PoissonSolution;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SpectralPoisson;

impl PoissonSolver for SpectralPoisson {
    fn solve(&self, rhs: &[f64]) -> PoissonSolution {
        poisson_solve(rhs)
    }
}

/// Fourier solve: `phi_k = rho_k / (2 pi k)^2` for `k != 0`, `phi_0 = 0`.
/// The gradient is the spectral derivative with the Nyquist mode dropped.
/// A nonzero mean in `rhs` is removed first.
pub fn poisson_solve(rhs: &[f64]) -> PoissonSolution {
    let n = rhs.len();
    let mean = rhs.iter().sum::<f64>() / n as f64;
    if mean.abs() > 1e-10 * (1.0 + rhs.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
        debug!("poisson right-hand side has mean {mean:e}; removed");
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut hat: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut hat);
    let mut phi_hat = vec![Complex64::new(0.0, 0.0); n];
    let mut grad_hat = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n {
        let kk = wavenumber(k, n);
        let w = 2.0 * PI * kk as f64;
        phi_hat[k] = hat[k] / (w * w);
        if 2 * k != n {
            grad_hat[k] = phi_hat[k] * Complex64::new(0.0, w);
        }
    }
    inv.process(&mut phi_hat);
    inv.process(&mut grad_hat);
    let scale = 1.0 / n as f64;
    PoissonSolution {
        phi: phi_hat.iter().map(|c| c.re * scale).collect(),
        grad_phi: grad_hat.iter().map(|c| c.re * scale).collect(),
        removed_mean: mean,
    }
}

fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// `max |-phi'' - (rhs - mean)| / max |rhs - mean|` with the second
/// derivative taken spectrally.
pub fn poisson_residual(phi: &[f64], rhs: &[f64]) -> f64 {
    let n = phi.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut hat: Vec<Complex64> = phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut hat);
    for (k, c) in hat.iter_mut().enumerate() {
        let w = 2.0 * PI * wavenumber(k, n) as f64;
        *c *= w * w;
    }
    inv.process(&mut hat);
    relative_residual(hat.iter().map(|c| c.re / n as f64), rhs)
}

/// The same residual with the centred second difference. For a spectral
/// `phi` this measures the `O(dx^2)` discretisation gap, not solve error.
pub fn poisson_residual_fd(phi: &[f64], rhs: &[f64]) -> f64 {
    let n = phi.len();
    let h2 = (n * n) as f64;
    let lap = (0..n).map(|i| {
        let l = phi[(i + n - 1) % n];
        let r = phi[(i + 1) % n];
        -(l - 2.0 * phi[i] + r) * h2
    });
    relative_residual(lap, rhs)
}

fn relative_residual(neg_lap: impl Iterator<Item = f64>, rhs: &[f64]) -> f64 {
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    let scale = rhs.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let err = neg_lap
        .zip(rhs)
        .map(|(a, b)| (a - (b - mean)).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

/// The spatially homogeneous equilibrium a run relaxes to.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEquilibrium {
    pub beta: f64,
    pub rho: f64,
    pub field: PhaseField,
}

impl GlobalEquilibrium {
    /// Equilibrium with the same total mass as `f`. The parameter is solved
    /// on the grid quadrature, so the sampled profile has exactly that mass.
    pub fn matching(f: &PhaseField, statistics: Statistics) -> Result<Self, EquilibriumError> {
        Self::with_mass(*f.grid(), statistics, integrate_phase(f))
    }

    pub fn with_mass(
        grid: GridSpec,
        statistics: Statistics,
        mass: f64,
    ) -> Result<Self, EquilibriumError> {
        let beta = beta_of_mass(mass, statistics, 1, &grid.momentum_quadrature())?;
        Ok(Self::with_beta(grid, statistics, beta))
    }

    pub fn with_beta(grid: GridSpec, statistics: Statistics, beta: f64) -> Self {
        let field = PhaseField::equilibrium(grid, statistics, beta);
        let rho = density(&field)[0];
        GlobalEquilibrium { beta, rho, field }
    }
}

/// Macroscopic state of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub rho: Vec<f64>,
    pub flux: Vec<f64>,
    pub beta_field: Vec<f64>,
    pub phi: Vec<f64>,
    pub grad_phi: Vec<f64>,
}

impl MacroState {
    pub fn compute(
        f: &PhaseField,
        projection: &Projection,
        rho_inf: f64,
        poisson: &dyn PoissonSolver,
    ) -> Self {
        let rho = density(f);
        let rhs: Vec<f64> = rho.iter().map(|r| r - rho_inf).collect();
        let sol = poisson.solve(&rhs);
        MacroState {
            flux: macro_flux(f),
            beta_field: projection.beta.clone(),
            phi: sol.phi,
            grad_phi: sol.grad_phi,
            rho,
        }
    }

    /// `sum_x d_x phi * j dx`
    pub fn coupling(&self) -> f64 {
        let dx = 1.0 / self.rho.len() as f64;
        self.grad_phi
            .iter()
            .zip(&self.flux)
            .map(|(g, j)| g * j)
            .sum::<f64>()
            * dx
    }
}

/// Ratio `(rho - rho_inf)^2 M^2 / (Pi f - f_inf)^2` at one cell of a
/// column whose projection parameter is `beta`, written in closed form:
/// `I(b)^2 (1 - k b M)^2 (1 - k b_inf M)^2` with
/// `I(b) = sum_p M / ((1 - k b M)(1 - k b_inf M)) dp`.
pub fn rr_ratio(beta: f64, beta_inf: f64, kappa: f64, m: f64, maxwellian: &[f64], dp: f64) -> f64 {
    let i: f64 = maxwellian
        .iter()
        .map(|&mm| mm / ((1.0 - kappa * beta * mm) * (1.0 - kappa * beta_inf * mm)))
        .sum::<f64>()
        * dp;
    let a = i * (1.0 - kappa * beta * m) * (1.0 - kappa * beta_inf * m);
    a * a
}

/// Bounds `[C1, C2]` on the ratio over `b in [beta_minus, beta_plus]` and
/// every grid momentum, widened by a relative `1e-6`.
pub fn rr_bounds(
    grid: &GridSpec,
    statistics: Statistics,
    beta_inf: f64,
    beta_minus: f64,
    beta_plus: f64,
) -> (f64, f64) {
    let m = grid.maxwellian();
    let kappa = statistics.kappa();
    let dp = grid.dp();
    let n = 2001;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..n {
        let b = beta_minus + (beta_plus - beta_minus) * k as f64 / (n - 1) as f64;
        for &mm in &m {
            let r = rr_ratio(b, beta_inf, kappa, mm, &m, dp);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo * (1.0 - 1e-6), hi * (1.0 + 1e-6))
}

/// Direct ratio extremes over the cells of a projected field, skipping
/// columns whose density is within `1e-8` (relative) of `rho_inf`.
pub fn rr_ratio_extremes(
    f: &PhaseField,
    pi_f: &PhaseField,
    f_inf: &PhaseField,
    rho_inf: f64,
) -> Option<(f64, f64)> {
    let m = f.grid().maxwellian();
    let rho = density(f);
    let mut out: Option<(f64, f64)> = None;
    for (ix, r) in rho.iter().enumerate() {
        let d = r - rho_inf;
        if d.abs() <= 1e-8 * rho_inf {
            continue;
        }
        for (ip, &mm) in m.iter().enumerate() {
            let e = pi_f.get(ix, ip) - f_inf.get(ix, ip);
            if e == 0.0 {
                continue;
            }
            let ratio = (d * mm / e).powi(2);
            out = Some(match out {
                None => (ratio, ratio),
                Some((lo, hi)) => (lo.min(ratio), hi.max(ratio)),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::mass_of_beta;
    use crate::grid::weighted_l2_distance;
    use crate::rng::Lcg64;
    use proptest::prelude::*;

    const ALL: [Statistics; 3] = [Statistics::Fermi, Statistics::Classical, Statistics::Bose];

    fn grid() -> GridSpec {
        GridSpec::new(16, 128, 8.0).unwrap()
    }

    fn random_admissible(g: GridSpec, stats: Statistics, rng: &mut Lcg64) -> PhaseField {
        let kappa = stats.kappa();
        let m = g.maxwellian();
        let mut f = PhaseField::zeros(g);
        for ix in 0..g.nx() {
            for ip in 0..g.np() {
                let b = rng.uniform(0.5, 2.0);
                f.set(ix, ip, profile_from_maxwellian(b, kappa, m[ip]));
            }
        }
        f
    }

    #[test]
    fn density_of_equilibrium_and_zero() {
        let g = grid();
        for stats in ALL {
            let f = PhaseField::equilibrium(g, stats, 1.3);
            let want = mass_of_beta(1.3, stats, 1, &g.momentum_quadrature()).unwrap();
            for r in density(&f) {
                assert!((r - want).abs() < 1e-14);
            }
            assert!(macro_flux(&f).iter().all(|j| j.abs() < 1e-15));
        }
        assert!(density(&PhaseField::zeros(g)).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn density_integrates_to_mass() {
        let g = grid();
        let f = random_admissible(g, Statistics::Fermi, &mut Lcg64::new(3));
        let total: f64 = density(&f).iter().sum::<f64>() * g.dx();
        assert!((total - integrate_phase(&f)).abs() < 1e-13);
    }

    #[test]
    fn projection_fixes_equilibria_and_ignores_odd_parts() {
        let g = grid();
        for stats in ALL {
            let feq = PhaseField::equilibrium(g, stats, 1.0);
            let pr = project(&feq, stats).unwrap();
            assert!(pr.beta.iter().all(|b| (b - 1.0).abs() < 1e-12));
            assert!(weighted_l2_distance(&pr.field, &feq).unwrap() < 1e-12);
            let odd = PhaseField::from_fn(g, |_, p| 0.05 * p * crate::equilibria::maxwellian_1d(p));
            let pert = feq.axpby(1.0, &odd, 1.0).unwrap();
            let pp = project(&pert, stats).unwrap();
            assert!(weighted_l2_distance(&pp.field, &feq).unwrap() < 1e-12);
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let g = grid();
        let f = random_admissible(g, Statistics::Bose, &mut Lcg64::new(9));
        let pr = Projector::new(g, Statistics::Bose);
        let cold = pr.project(&f, None).unwrap();
        let shifted: Vec<f64> = cold.beta.iter().map(|b| b * 1.03).collect();
        let warm = pr.project(&f, Some(&shifted)).unwrap();
        for (a, b) in cold.beta.iter().zip(&warm.beta) {
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn supercritical_boson_column_is_named() {
        let g = GridSpec::new(4, 32, 8.0).unwrap();
        let mut f = PhaseField::equilibrium(g, Statistics::Bose, 1.0);
        for ip in 0..g.np() {
            f.set(2, ip, 50.0);
        }
        match project(&f, Statistics::Bose) {
            Err(MacroError::Column { ix, .. }) => assert_eq!(ix, 2),
            other => panic!("expected column error, got {other:?}"),
        }
    }

    #[test]
    fn moment_identities_of_projections() {
        let g = grid();
        for stats in ALL {
            let f = random_admissible(g, stats, &mut Lcg64::new(5));
            let pr = project(&f, stats).unwrap();
            let rep = moment_checks(&pr.field, stats);
            assert!(rep.max() < 1e-10, "{stats:?} {rep:?}");
            assert!(macro_flux(&pr.field).iter().all(|j| j.abs() < 1e-12));
        }
        // classical: the flux identity is the first identity
        let f = random_admissible(g, Statistics::Classical, &mut Lcg64::new(6));
        let rep = moment_checks(&project(&f, Statistics::Classical).unwrap().field, Statistics::Classical);
        assert_eq!(rep.first, rep.flux);
    }

    #[test]
    fn moment_residuals_shrink_with_np() {
        // residuals are dominated by the quadrature of the second moment
        let mut last = f64::INFINITY;
        for np in [8, 16, 32] {
            let g = GridSpec::new(4, np, 8.0).unwrap();
            let f = PhaseField::equilibrium(g, Statistics::Fermi, 1.5);
            let r = moment_checks(&f, Statistics::Fermi).second;
            assert!(r * 4.0 <= last, "np {np}: {r} vs {last}");
            last = r;
        }
    }

    #[test]
    fn poisson_single_mode() {
        let n = 64;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let rhs: Vec<f64> = x.iter().map(|x| (2.0 * PI * x).cos()).collect();
        let sol = poisson_solve(&rhs);
        let w = 2.0 * PI;
        for (i, x) in x.iter().enumerate() {
            assert!((sol.phi[i] - (w * x).cos() / (w * w)).abs() < 1e-12);
            assert!((sol.grad_phi[i] + (w * x).sin() / w).abs() < 1e-12);
        }
        assert!(poisson_residual(&sol.phi, &rhs) < 1e-12);
        // the centred difference sees the O(dx^2) symbol gap
        let fd = poisson_residual_fd(&sol.phi, &rhs);
        let gap = 1.0 - (2.0 * (PI / n as f64).sin() * n as f64 / w).powi(2);
        assert!((fd - gap).abs() < 1e-10);
        let zero = poisson_solve(&vec![0.0; n]);
        assert!(zero.phi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_removes_mean() {
        let rhs: Vec<f64> = (0..32).map(|i| 1.0 + (i as f64 * 0.3).sin()).collect();
        let sol = poisson_solve(&rhs);
        assert!(sol.removed_mean.abs() > 0.5);
        let mean: f64 = sol.phi.iter().sum::<f64>() / 32.0;
        assert!(mean.abs() < 1e-13);
        assert!(poisson_residual(&sol.phi, &rhs) < 1e-12);
    }

    #[test]
    fn rr_ratio_matches_direct_evaluation() {
        let g = grid();
        let stats = Statistics::Fermi;
        let (c1, c2) = rr_bounds(&g, stats, 1.0, 0.5, 2.0);
        assert!(0.0 < c1 && c1 < c2);
        let f_inf = PhaseField::equilibrium(g, stats, 1.0);
        let rho_inf = density(&f_inf)[0];
        let f = PhaseField::local_equilibrium(g, stats, |x| 1.0 + 0.7 * (2.0 * PI * x).cos());
        let pr = project(&f, stats).unwrap();
        let (lo, hi) = rr_ratio_extremes(&f, &pr.field, &f_inf, rho_inf).unwrap();
        assert!(c1 <= lo && hi <= c2, "[{lo}, {hi}] not in [{c1}, {c2}]");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn projection_is_idempotent(seed in any::<u64>(), k in 0usize..3) {
            let stats = ALL[k];
            let g = GridSpec::new(4, 64, 8.0).unwrap();
            let f = random_admissible(g, stats, &mut Lcg64::new(seed));
            let once = project(&f, stats).unwrap();
            let twice = project(&once.field, stats).unwrap();
            prop_assert!(weighted_l2_distance(&once.field, &twice.field).unwrap() <= 1e-10);
            for (a, b) in density(&f).iter().zip(density(&once.field)) {
                prop_assert!((a - b).abs() <= 1e-12 * a);
            }
            prop_assert!(once.beta.iter().all(|b| (0.5..=2.0).contains(b)));
        }

        #[test]
        fn poisson_is_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
            let mut rng = Lcg64::new(seed);
            let mut zm = |n: usize| {
                let v: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let m = v.iter().sum::<f64>() / n as f64;
                v.into_iter().map(|x| x - m).collect::<Vec<_>>()
            };
            let u = zm(32);
            let v = zm(32);
            let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + y).collect();
            let (su, sv, sw) = (poisson_solve(&u), poisson_solve(&v), poisson_solve(&w));
            for i in 0..32 {
                prop_assert!((sw.phi[i] - a * su.phi[i] - sv.phi[i]).abs() < 1e-14);
                prop_assert!((sw.grad_phi[i] - a * su.grad_phi[i] - sv.grad_phi[i]).abs() < 1e-13);
            }
        }
    }
}
