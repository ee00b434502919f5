//! Entropy, relative entropy, dissipation, the modified entropy `E` and the
//! exponential decay fit.
//!
//! The relative entropy is evaluated in a cancellation-free form. With
//! `f = g + d`, `r = d/g` and `q = k d / (1 + k g)`,
//!
//! ```text
//! f ln(f/g) - k(1+kf) ln((1+kf)/(1+kg))
//!     = g psi(r) - k (1+kg) psi(q) + (1 - k^2) d,
//! psi(r) = (1+r) ln(1+r) - r,
//! ```
//!
//! and `psi` switches to its Taylor series for small arguments. Near
//! equilibrium the integrand is `O(d^2)`, so the naive form would lose all
//! significant digits long before the decay runs reach their floor.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::equilibria::{profile_from_maxwellian, ModelParams, Statistics};
use crate::grid::{GridError, GridSpec, PhaseField};
use crate::macroscopics::{MacroState, PoissonSolver, Projection};
use crate::solver::POSITIVITY_FLOOR;

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("occupancy {value} exceeds 1 at cell ({ix}, {ip}) for fermions")]
    FermiOccupancy { ix: usize, ip: usize, value: f64 },
    #[error("negative value {value} at cell ({ix}, {ip})")]
    Negative { ix: usize, ip: usize, value: f64 },
    #[error("reference field is not positive at cell ({ix}, {ip})")]
    Reference { ix: usize, ip: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 10 samples in the fit window, got {0}")]
    TooFewSamples(usize),
    #[error("nonpositive distance {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },
}

const OCCUPANCY_SLACK: f64 = 1e-10;
const NEGATIVE_SLACK: f64 = 1e-12;

fn check_value(v: f64, kappa: f64, ix: usize, ip: usize) -> Result<f64, FunctionalError> {
    if v < -NEGATIVE_SLACK {
        return Err(FunctionalError::Negative { ix, ip, value: v });
    }
    if kappa < 0.0 && v > 1.0 + OCCUPANCY_SLACK {
        return Err(FunctionalError::FermiOccupancy { ix, ip, value: v });
    }
    Ok(v.max(0.0))
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `H[f] = sum p^2/2 f + f ln f - k (1+kf) ln(1+kf) dx dp`, with
/// `0 ln 0 = 0`.
pub fn entropy(f: &PhaseField, statistics: Statistics) -> Result<f64, FunctionalError> {
    let grid = f.grid();
    let kappa = statistics.kappa();
    let p = grid.p_centers();
    let mut total = 0.0;
    for (ix, col) in f.columns().enumerate() {
        for (ip, &v) in col.iter().enumerate() {
            let v = check_value(v, kappa, ix, ip)?;
            let w = (1.0 + kappa * v).max(0.0);
            total += 0.5 * p[ip] * p[ip] * v + xlnx(v) - kappa * xlnx(w);
        }
    }
    Ok(total * grid.dx() * grid.dp())
}

/// `psi(r) = (1+r) ln(1+r) - r`, accurate for small `|r|`.
pub fn psi(r: f64) -> f64 {
    if r <= -1.0 {
        return 1.0;
    }
    if r.abs() < 0.05 {
        // sum_{n>=2} (-r)^n / (n (n-1))
        let mut term = r * r;
        let mut sum = 0.0;
        for n in 2..16 {
            sum += term / (n * (n - 1)) as f64;
            term *= -r;
        }
        return sum;
    }
    (1.0 + r) * r.ln_1p() - r
}

/// Relative entropy integrand at one cell.
pub fn relative_entropy_density(f: f64, g: f64, kappa: f64) -> f64 {
    let d = f - g;
    let w = 1.0 + kappa * g;
    g * psi(d / g) - kappa * w * psi(kappa * d / w) + (1.0 - kappa * kappa) * d
}

/// `H[f|g]`.
pub fn relative_entropy(
    f: &PhaseField,
    g: &PhaseField,
    statistics: Statistics,
) -> Result<f64, FunctionalError> {
    f.ensure_same_grid(g)?;
    let grid = f.grid();
    let kappa = statistics.kappa();
    let np = grid.np();
    let mut total = 0.0;
    for (i, (&a, &b)) in f.values().iter().zip(g.values()).enumerate() {
        let (ix, ip) = (i / np, i % np);
        let a = check_value(a, kappa, ix, ip)?;
        if !(b > 0.0) || (kappa < 0.0 && b >= 1.0) {
            return Err(FunctionalError::Reference { ix, ip });
        }
        total += relative_entropy_density(a, b, kappa);
    }
    Ok(total * grid.dx() * grid.dp())
}

/// `s = ln(f / ((1+kf) M))` on one column, floored like the solver.
fn s_column(col: &[f64], ln_m: &[f64], kappa: f64, s: &mut [f64]) {
    for ((s, &v), &lm) in s.iter_mut().zip(col).zip(ln_m) {
        let v = v.max(POSITIVITY_FLOOR);
        let w = (1.0 + kappa * v).max(POSITIVITY_FLOOR);
        *s = v.ln() - w.ln() - lm;
    }
}

/// `D[f] = sum (f + kf^2) |d_p s|^2 dx dp` with centred differences inside
/// and one-sided differences at `+-p_max`.
pub fn dissipation(f: &PhaseField, statistics: Statistics) -> f64 {
    let grid = f.grid();
    let kappa = statistics.kappa();
    let ln_m = grid.ln_maxwellian();
    let np = grid.np();
    let dp = grid.dp();
    let mut s = vec![0.0; np];
    let mut total = 0.0;
    for col in f.columns() {
        s_column(col, &ln_m, kappa, &mut s);
        for i in 0..np {
            let ds = if i == 0 {
                (s[1] - s[0]) / dp
            } else if i == np - 1 {
                (s[np - 1] - s[np - 2]) / dp
            } else {
                (s[i + 1] - s[i - 1]) / (2.0 * dp)
            };
            let v = col[i].max(0.0);
            total += (v + kappa * v * v) * ds * ds;
        }
    }
    total * grid.dx() * dp
}

/// Equivalence constants `(C3, C4)`: reciprocal extremes of
/// `2b / (1 - k b M)^2` over a 200-point `b` scan of the envelope and every
/// grid momentum.
pub fn equivalence_constants(params: &ModelParams, grid: &GridSpec) -> (f64, f64) {
    let kappa = params.kappa();
    let m = grid.maxwellian();
    let n = 200;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..n {
        let b = if n == 1 || params.beta_minus == params.beta_plus {
            params.beta_minus
        } else {
            params.beta_minus + (params.beta_plus - params.beta_minus) * k as f64 / (n - 1) as f64
        };
        for &mm in &m {
            let d = 1.0 - kappa * b * mm;
            let r = 2.0 * b / (d * d);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (1.0 / hi, 1.0 / lo)
}

/// Bound `|sum d_x phi j dx| <= C ||f - f_inf||^2` from Cauchy-Schwarz in
/// `p` and the lowest torus mode: `C = sqrt(sum M dp * sum p^2 M dp) / 2pi`.
pub fn coupling_constant(grid: &GridSpec) -> f64 {
    let dp = grid.dp();
    let (mut m0, mut m2) = (0.0, 0.0);
    for (p, m) in grid.p_centers().iter().zip(grid.maxwellian()) {
        m0 += m * dp;
        m2 += p * p * m * dp;
    }
    (m0 * m2).sqrt() / (2.0 * PI)
}

/// `delta = C3 / (2 C_coupling)`, so that `C3 - delta C_coupling = C3 / 2`.
pub fn delta_heuristic(params: &ModelParams, grid: &GridSpec) -> f64 {
    let (c3, _) = equivalence_constants(params, grid);
    0.5 * c3 / coupling_constant(grid)
}

/// Constants of the equivalence `C6 ||f-f_inf||^2 <= E <= C7 ||f-f_inf||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub c3: f64,
    pub c4: f64,
    pub c6: f64,
    pub c7: f64,
    pub coupling: f64,
    pub delta: f64,
}

impl Constants {
    pub fn new(params: &ModelParams, grid: &GridSpec, delta: f64) -> Self {
        let (c3, c4) = equivalence_constants(params, grid);
        let coupling = coupling_constant(grid);
        Constants {
            c3,
            c4,
            c6: c3 - delta * coupling,
            c7: c4 + delta * coupling,
            coupling,
            delta,
        }
    }
}

/// `E = H[f|f_inf] + delta * sum d_x phi j dx` and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModifiedEntropy {
    pub e: f64,
    pub h_rel: f64,
    pub coupling: f64,
}

pub fn modified_entropy(
    f: &PhaseField,
    f_inf: &PhaseField,
    rho_inf: f64,
    projection: &Projection,
    params: &ModelParams,
    poisson: &dyn PoissonSolver,
) -> Result<(ModifiedEntropy, MacroState), FunctionalError> {
    let h_rel = relative_entropy(f, f_inf, params.statistics)?;
    let state = MacroState::compute(f, projection, rho_inf, poisson);
    let coupling = state.coupling();
    Ok((
        ModifiedEntropy {
            e: h_rel + params.delta * coupling,
            h_rel,
            coupling,
        },
        state,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub lambda: f64,
    pub c: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
}

/// Least-squares fit of `ln dist = a - lambda t` over samples with
/// `t in [lo, hi]`. `c = exp(a) / dist(0)` uses the first sample of the
/// whole series.
pub fn fit_decay_rate(series: &[(f64, f64)], window: [f64; 2]) -> Result<DecayFit, FitError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window[0] - 1e-12 && *t <= window[1] + 1e-12)
        .collect();
    if pts.len() < 10 {
        return Err(FitError::TooFewSamples(pts.len()));
    }
    if let Some(&(t, value)) = pts.iter().find(|(_, d)| !(*d > 0.0)) {
        return Err(FitError::NonPositive { t, value });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, d) in &pts {
        let (dt, dy) = (t - tm, d.ln() - ym);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = ym - slope * tm;
    let ss_res: f64 = pts
        .iter()
        .map(|&(t, d)| (d.ln() - intercept - slope * t).powi(2))
        .sum();
    // residuals at the rounding level of ln d count as a perfect fit
    let r_squared = if ss_res <= 1e-24 * n * (1.0 + ym * ym) {
        1.0
    } else if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d0 = series.first().map(|p| p.1).unwrap_or(f64::NAN);
    Ok(DecayFit {
        lambda: -slope,
        c: intercept.exp() / d0,
        r_squared,
        window,
    })
}

/// `||f - Pi f||^2 + ||Pi f - f_inf||^2 >= ||f - f_inf||^2 / 2`.
pub fn triangle_split_holds(dist_pi: f64, dist_macro: f64, dist_w: f64) -> bool {
    dist_pi * dist_pi + dist_macro * dist_macro >= 0.5 * dist_w * dist_w * (1.0 - 1e-12)
}

/// Sign structure of the entropy decrement: on every sample interval where
/// `int ||f - Pi f||^2 dt` exceeds `threshold`, `H_rel` must strictly
/// decrease. Rows are `(t, H_rel, ||f - Pi f||)`. Returns the offending
/// interval start times.
pub fn decrement_violations(rows: &[(f64, f64, f64)], threshold: f64) -> Vec<f64> {
    rows.windows(2)
        .filter_map(|w| {
            let (t0, h0, d0) = w[0];
            let (t1, h1, d1) = w[1];
            let integral = 0.5 * (d0 * d0 + d1 * d1) * (t1 - t0);
            (integral > threshold && !(h1 < h0)).then_some(t0)
        })
        .collect()
}

/// One time sample of the run diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub h_abs: f64,
    pub h_rel: f64,
    pub h_rel_pi: f64,
    pub d: f64,
    pub e: f64,
    pub dist_w: f64,
    pub dist_pi: f64,
    pub dist_macro: f64,
    pub l1_pair: Option<f64>,
    pub floor_events: u64,
    pub bound_violation: f64,
}

impl DiagnosticsRow {
    pub const HEADER: &'static str = "t,mass,H_abs,H_rel,H_rel_pi,D,E,dist_w,dist_pi,dist_macro,l1_pair,floor_events,bound_violation";

    /// CSV line with 17 significant digits; `l1_pair` is empty without a
    /// companion run.
    pub fn to_csv(&self) -> String {
        let l1 = self.l1_pair.map(|v| format!("{v:.16e}")).unwrap_or_default();
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e}",
            self.t,
            self.mass,
            self.h_abs,
            self.h_rel,
            self.h_rel_pi,
            self.d,
            self.e,
            self.dist_w,
            self.dist_pi,
            self.dist_macro,
            l1,
            self.floor_events,
            self.bound_violation
        )
    }
}

/// Largest excess of `f` outside `[lower, upper]`, both given per momentum
/// cell.
pub fn envelope_excess(f: &PhaseField, lower: &[f64], upper: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for col in f.columns() {
        for ((&v, &lo), &hi) in col.iter().zip(lower).zip(upper) {
            worst = worst.max(lo - v).max(v - hi);
        }
    }
    worst
}

/// Envelope profiles for `params` on `grid`.
pub fn envelope(params: &ModelParams, grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let kappa = params.kappa();
    let m = grid.maxwellian();
    (
        m.iter()
            .map(|&m| profile_from_maxwellian(params.beta_minus, kappa, m))
            .collect(),
        m.iter()
            .map(|&m| profile_from_maxwellian(params.beta_plus, kappa, m))
            .collect(),
    )
}
