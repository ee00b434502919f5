//! The invariant checker behind `qkfp check`.
//!
//! Every entry records the measured value, the limit it was held to and a
//! pass flag. Randomized entries draw from [`Lcg64`] with the configured
//! seed, so a report can be reproduced exactly.

use std::f64::consts::PI;

use serde::Serialize;

use super::config::ScenarioConfig;
use super::scenario::{monotone_after, simulate_with, RunRecord};
use super::HarnessError;
use crate::equilibria::{
    critical_mass, equilibrium_profile_dp, mass_of_beta, beta_of_mass, maxwellian_1d,
    profile_from_maxwellian, ModelParams, MomentumQuadrature, Statistics,
};
use crate::functionals::{
    decrement_violations, dissipation, entropy, envelope, envelope_excess, equivalence_constants,
    modified_entropy, relative_entropy, triangle_split_holds, Constants,
};
use crate::grid::{
    integrate_phase, l1_distance, l2_distance, weighted_l2_distance, GridError, GridSpec,
    PhaseField,
};
use crate::macroscopics::{
    density, macro_flux, moment_checks, poisson_residual, rr_bounds, rr_ratio_extremes,
    GlobalEquilibrium, PoissonSolver, Projector, SpectralPoisson,
};
use crate::rng::Lcg64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub passed: bool,
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    fn new(seed: u64) -> Self {
        CheckReport {
            seed,
            passed: true,
            entries: Vec::new(),
        }
    }

    /// Records `value <= limit`.
    fn at_most(&mut self, name: &str, value: f64, limit: f64, detail: impl Into<String>) {
        self.push(name, value <= limit, value, limit, detail);
    }

    fn holds(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.push(name, ok, if ok { 0.0 } else { 1.0 }, 0.0, detail);
    }

    fn push(&mut self, name: &str, passed: bool, value: f64, limit: f64, detail: impl Into<String>) {
        self.passed &= passed;
        self.entries.push(CheckEntry {
            name: name.to_string(),
            passed,
            value,
            limit,
            detail: detail.into(),
        });
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn entry(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Runs every invariant on the configured scenario and on seeded random
/// fields.
pub fn check_suite(cfg: &ScenarioConfig, seed: u64) -> Result<CheckReport, HarnessError> {
    check_suite_with(cfg, seed, &SpectralPoisson)
}

/// [`check_suite`] with a substitute Poisson solver.
pub fn check_suite_with(
    cfg: &ScenarioConfig,
    seed: u64,
    poisson: &dyn PoissonSolver,
) -> Result<CheckReport, HarnessError> {
    let mut rep = CheckReport::new(seed);
    let mut rng = Lcg64::new(seed);
    equilibria_checks(&mut rep, cfg);
    grid_checks(&mut rep, cfg, &mut rng);
    macroscopic_checks(&mut rep, cfg, &mut rng, poisson)?;
    random_functional_checks(&mut rep, cfg, &mut rng, poisson)?;
    let rec = simulate_with(cfg, poisson)?;
    run_checks(&mut rep, cfg, &rec);
    Ok(rep)
}

/// The static invariants that apply to a single field.
pub fn check_snapshot(
    cfg: &ScenarioConfig,
    f: &PhaseField,
    seed: u64,
) -> Result<CheckReport, HarnessError> {
    if f.grid() != &cfg.grid {
        return Err(HarnessError::Grid(GridError::Mismatch(*f.grid(), cfg.grid)));
    }
    let mut rep = CheckReport::new(seed);
    let stats = cfg.model.statistics;
    let projector = Projector::new(cfg.grid, stats);
    let pr = projector.project(f, None)?;
    let twice = projector.project(&pr.field, None)?;
    rep.at_most(
        "macro.projection_idempotent",
        weighted_l2_distance(&pr.field, &twice.field)?,
        1e-10,
        "",
    );
    rep.at_most("macro.moment_identities", moment_checks(&pr.field, stats).max(), 1e-8, "");
    let eq = GlobalEquilibrium::matching(f, stats)?;
    let (me, state) = modified_entropy(f, &eq.field, eq.rho, &pr, &cfg.model, &SpectralPoisson)?;
    let rhs: Vec<f64> = state.rho.iter().map(|r| r - eq.rho).collect();
    rep.at_most("macro.poisson_residual", poisson_residual(&state.phi, &rhs), 1e-8, "");
    let h_abs = entropy(f, stats)?;
    rep.at_most("fn.h_rel_nonnegative", -me.h_rel, 1e-12 * h_abs.abs().max(1.0), "");
    rep.at_most("fn.dissipation_nonnegative", -dissipation(f, stats), 1e-12 * h_abs.abs().max(1.0), "");
    let dw = weighted_l2_distance(f, &eq.field)?;
    let dpi = weighted_l2_distance(f, &pr.field)?;
    let dm = weighted_l2_distance(&pr.field, &eq.field)?;
    rep.holds("fn.triangle_split", triangle_split_holds(dpi, dm, dw), format!("{dpi:e}, {dm:e}, {dw:e}"));
    let (lo, hi) = envelope(&cfg.model, &cfg.grid);
    let excess = envelope_excess(f, &lo, &hi);
    rep.at_most("solver.envelope_excess", excess, bound_tolerance(&cfg.grid), "");
    let k = Constants::new(&cfg.model, &cfg.grid, cfg.model.delta);
    let d2 = dw * dw;
    rep.holds(
        "fn.e_equivalence",
        k.c6 * d2 <= me.e * (1.0 + 1e-9) + 1e-300 && me.e <= k.c7 * d2 * (1.0 + 1e-9) + 1e-300,
        format!("E = {:e}, ||f - f_inf||^2 = {d2:e}", me.e),
    );
    Ok(rep)
}

/// The envelope allowance `5 (dx + dp^2)`.
pub fn bound_tolerance(grid: &GridSpec) -> f64 {
    5.0 * (grid.dx() + grid.dp() * grid.dp())
}

/// `zeta(s)` for `s > 1` by Euler-Maclaurin.
fn zeta(s: f64) -> f64 {
    let n = 1000.0f64;
    let head: f64 = (1..1000).map(|k| (k as f64).powf(-s)).sum();
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}

fn all_statistics() -> [Statistics; 3] {
    [Statistics::Fermi, Statistics::Classical, Statistics::Bose]
}

fn upper_beta(stats: Statistics) -> f64 {
    match stats {
        Statistics::Bose => 0.95 * (2.0 * PI).sqrt(),
        _ => 4.0,
    }
}

fn equilibria_checks(rep: &mut CheckReport, cfg: &ScenarioConfig) {
    let quad = cfg.grid.momentum_quadrature();
    for stats in all_statistics() {
        let top = upper_beta(stats);
        let mut prev = 0.0;
        let mut ok = true;
        for k in 1..=100 {
            let b = top * k as f64 / 100.0;
            match mass_of_beta(b, stats, 1, &quad) {
                Ok(m) if m > prev => prev = m,
                _ => ok = false,
            }
        }
        rep.holds(
            &format!("eq.mass_increasing.{}", stats_name(stats)),
            ok,
            "100-point scan on the grid quadrature",
        );
    }
    let p = cfg.grid.p_centers();
    let kappa = cfg.model.kappa();
    let m = cfg.grid.maxwellian();
    let (bm, bp) = (cfg.model.beta_minus, cfg.model.beta_plus);
    let mut ok = bm <= bp;
    if bm < bp {
        for j in 0..=20 {
            let b0 = bm + (bp - bm) * j as f64 / 21.0;
            let b1 = bm + (bp - bm) * (j + 1) as f64 / 21.0;
            ok &= m
                .iter()
                .all(|&mm| profile_from_maxwellian(b1, kappa, mm) > profile_from_maxwellian(b0, kappa, mm));
        }
    }
    rep.holds("eq.profile_increasing", ok, "pointwise in beta over the envelope");
    let (lo, hi) = envelope(&cfg.model, &cfg.grid);
    let in_range = lo.iter().chain(&hi).all(|&v| {
        v.is_finite() && v >= 0.0 && (cfg.model.statistics != Statistics::Fermi || v < 1.0)
    });
    rep.holds("eq.profile_range", in_range, "");
    let mut worst = 0.0f64;
    for b in [bm, cfg.model.beta_inf, bp] {
        for &pp in &p {
            let f = profile_from_maxwellian(b, kappa, maxwellian_1d(pp));
            let drift = pp * (f + kappa * f * f);
            let flux = equilibrium_profile_dp(b, kappa, pp) + drift;
            worst = worst.max(flux.abs() / drift.abs().max(1e-300));
        }
    }
    rep.at_most("eq.profile_flux_vanishes", worst, 1e-12, "relative to the drift term");
    let mc = critical_mass(3);
    let oracle = (2.0 * PI).powf(1.5) * zeta(1.5);
    rep.at_most("eq.critical_mass_d3", (mc - oracle).abs() / oracle, 1e-8, format!("{mc}"));
    rep.holds(
        "eq.critical_mass_low_d",
        critical_mass(1).is_infinite() && critical_mass(2).is_infinite(),
        "",
    );
    let mut worst = 0.0f64;
    for stats in all_statistics() {
        for b in [0.3, 1.0, 0.9 * upper_beta(stats)] {
            for q in [quad, MomentumQuadrature::Radial] {
                let Ok(mass) = mass_of_beta(b, stats, 1, &q) else {
                    continue;
                };
                if let Ok(back) = beta_of_mass(mass, stats, 1, &q) {
                    worst = worst.max((back - b).abs() / b);
                } else {
                    worst = f64::INFINITY;
                }
            }
        }
    }
    rep.at_most("eq.beta_round_trip", worst, 1e-12, "");
}

fn stats_name(s: Statistics) -> &'static str {
    match s {
        Statistics::Fermi => "fermi",
        Statistics::Classical => "classical",
        Statistics::Bose => "bose",
    }
}

/// Fields with every cell drawn from the envelope profiles at a random
/// `beta` in `[beta_minus, beta_plus]`.
pub fn random_pinched(grid: GridSpec, params: &ModelParams, rng: &mut Lcg64) -> PhaseField {
    let kappa = params.kappa();
    let m = grid.maxwellian();
    let mut f = PhaseField::zeros(grid);
    for ix in 0..grid.nx() {
        for (ip, &mm) in m.iter().enumerate() {
            let b = rng.uniform(params.beta_minus, params.beta_plus);
            f.set(ix, ip, profile_from_maxwellian(b, kappa, mm));
        }
    }
    f
}

/// Local equilibria with a random `beta` per x-cell.
pub fn random_local_equilibrium(grid: GridSpec, params: &ModelParams, rng: &mut Lcg64) -> PhaseField {
    let betas: Vec<f64> = (0..grid.nx())
        .map(|_| rng.uniform(params.beta_minus, params.beta_plus))
        .collect();
    PhaseField::local_equilibrium(grid, params.statistics, |x| {
        betas[((x * grid.nx() as f64) as usize).min(grid.nx() - 1)]
    })
}

/// Random pinched pair `(f, g)`. For classical statistics `f` is mixed with
/// the lower envelope so that both carry the same mass, which the
/// relative-entropy bounds need when `kappa = 0`.
pub fn random_pair(grid: GridSpec, params: &ModelParams, rng: &mut Lcg64) -> (PhaseField, PhaseField) {
    let f = random_pinched(grid, params, rng);
    let g = random_pinched(grid, params, rng);
    if params.statistics != Statistics::Classical {
        return (f, g);
    }
    let (f, g) = if integrate_phase(&f) >= integrate_phase(&g) { (f, g) } else { (g, f) };
    let floor = PhaseField::equilibrium(grid, Statistics::Classical, params.beta_minus);
    let lo = integrate_phase(&floor);
    let span = integrate_phase(&f) - lo;
    let a = if span > 0.0 { (integrate_phase(&g) - lo) / span } else { 1.0 };
    (f.axpby(a, &floor, 1.0 - a).expect("same grid"), g)
}

fn grid_checks(rep: &mut CheckReport, cfg: &ScenarioConfig, rng: &mut Lcg64) {
    let g = cfg.grid;
    let mut ok = true;
    for _ in 0..10 {
        let fs: Vec<PhaseField> = (0..3).map(|_| random_pinched(g, &cfg.model, rng)).collect();
        let a = rng.uniform(-3.0, 3.0);
        for d in [weighted_l2_distance, l1_distance, l2_distance] {
            let fh = d(&fs[0], &fs[1]).unwrap_or(f64::NAN);
            ok &= fh >= 0.0;
            ok &= d(&fs[0], &fs[0]).map(|v| v == 0.0).unwrap_or(false);
            ok &= (fh - d(&fs[1], &fs[0]).unwrap_or(f64::NAN)).abs() <= 1e-14 * (1.0 + fh);
            let s = d(&fs[0].scaled(a), &fs[1].scaled(a)).unwrap_or(f64::NAN);
            ok &= (s - a.abs() * fh).abs() <= 1e-12 * (1.0 + fh);
            let via = d(&fs[0], &fs[2]).unwrap_or(f64::NAN) + d(&fs[2], &fs[1]).unwrap_or(f64::NAN);
            ok &= fh <= via + 1e-12;
        }
    }
    rep.holds("grid.norm_axioms", ok, "10 random triples, three distances");
    let mass = |np: usize| {
        let gg = GridSpec::new(g.nx(), np, g.p_max()).expect("valid grid");
        integrate_phase(&PhaseField::from_fn(gg, |_, p| maxwellian_1d(p)))
    };
    rep.at_most(
        "grid.refinement_consistency",
        (mass(g.np()) - mass(2 * g.np())).abs(),
        1e-6,
        "integral of M under np doubling",
    );
}

fn macroscopic_checks(
    rep: &mut CheckReport,
    cfg: &ScenarioConfig,
    rng: &mut Lcg64,
    poisson: &dyn PoissonSolver,
) -> Result<(), HarnessError> {
    let g = cfg.grid;
    let stats = cfg.model.statistics;
    let projector = Projector::new(g, stats);
    let (mut idem, mut split, mut flux, mut moments) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut beta_ok = true;
    for _ in 0..20 {
        let f = random_pinched(g, &cfg.model, rng);
        let pr = projector.project(&f, None)?;
        let twice = projector.project(&pr.field, None)?;
        idem = idem.max(weighted_l2_distance(&pr.field, &twice.field)?);
        let rho = density(&f);
        for (a, b) in rho.iter().zip(density(&pr.field)) {
            split = split.max((a - b).abs() / a);
        }
        flux = flux.max(macro_flux(&pr.field).iter().fold(0.0, |m, j| m.max(j.abs())));
        moments = moments.max(moment_checks(&pr.field, stats).max());
        let tol = 1e-12 * cfg.model.beta_plus;
        beta_ok &= pr
            .beta
            .iter()
            .all(|&b| b >= cfg.model.beta_minus - tol && b <= cfg.model.beta_plus + tol);
    }
    rep.at_most("macro.projection_idempotent", idem, 1e-10, "20 random admissible fields");
    rep.at_most("macro.density_split", split, 1e-12, "relative density of f - Pi f");
    rep.at_most("macro.flux_of_projection", flux, 1e-12, "");
    rep.at_most("macro.moment_identities_random", moments, 1e-8, "");
    rep.holds("macro.beta_in_envelope_random", beta_ok, "");

    let eq = GlobalEquilibrium::with_beta(g, stats, cfg.model.beta_inf);
    let (c1, c2) = rr_bounds(&g, stats, cfg.model.beta_inf, cfg.model.beta_minus, cfg.model.beta_plus);
    let mut contained = true;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..200 {
        let f = random_local_equilibrium(g, &cfg.model, rng);
        let pr = projector.project(&f, None)?;
        if let Some((a, b)) = rr_ratio_extremes(&f, &pr.field, &eq.field, eq.rho) {
            lo = lo.min(a);
            hi = hi.max(b);
            contained &= a >= c1 && b <= c2;
        }
    }
    rep.holds(
        "macro.rr_sandwich",
        contained,
        format!("observed [{lo:e}, {hi:e}] within scan [{c1:e}, {c2:e}]"),
    );

    let n = g.nx();
    let rhs: Vec<f64> = (0..n).map(|i| (2.0 * PI * g.x_center(i)).cos()).collect();
    let sol = poisson.solve(&rhs);
    let w = 2.0 * PI;
    let err = (0..n)
        .map(|i| {
            let x = g.x_center(i);
            (sol.phi[i] - (w * x).cos() / (w * w))
                .abs()
                .max((sol.grad_phi[i] + (w * x).sin() / w).abs())
        })
        .fold(0.0, f64::max);
    rep.at_most("macro.poisson_single_mode", err, 1e-12, "cos(2 pi x) right-hand side");
    Ok(())
}

fn random_functional_checks(
    rep: &mut CheckReport,
    cfg: &ScenarioConfig,
    rng: &mut Lcg64,
    poisson: &dyn PoissonSolver,
) -> Result<(), HarnessError> {
    let g = cfg.grid;
    let stats = cfg.model.statistics;
    let (c3, c4) = equivalence_constants(&cfg.model, &g);
    let mut bad = 0;
    for _ in 0..100 {
        let (f, h) = random_pair(g, &cfg.model, rng);
        let d2 = weighted_l2_distance(&f, &h)?.powi(2);
        let hr = relative_entropy(&f, &h, stats)?;
        if !(c3 * d2 <= hr * (1.0 + 1e-10) && hr <= c4 * d2 * (1.0 + 1e-10)) {
            bad += 1;
        }
    }
    rep.at_most("fn.relative_entropy_sandwich", bad as f64, 0.0, format!("C3 = {c3:e}, C4 = {c4:e}, 100 pairs"));

    let k = Constants::new(&cfg.model, &g, cfg.model.delta);
    let eq = GlobalEquilibrium::with_beta(g, stats, cfg.model.beta_inf);
    let projector = Projector::new(g, stats);
    let mut bad = 0;
    for _ in 0..100 {
        let (f, _) = random_pair(g, &cfg.model, rng);
        let eq_f = if stats == Statistics::Classical {
            GlobalEquilibrium::matching(&f, stats)?
        } else {
            eq.clone()
        };
        let pr = projector.project(&f, None)?;
        let (me, _) = modified_entropy(&f, &eq_f.field, eq_f.rho, &pr, &cfg.model, poisson)?;
        let d2 = weighted_l2_distance(&f, &eq_f.field)?.powi(2);
        if !(k.c6 * d2 <= me.e * (1.0 + 1e-10) && me.e <= k.c7 * d2 * (1.0 + 1e-10)) {
            bad += 1;
        }
    }
    rep.at_most(
        "fn.e_equivalence_random",
        bad as f64,
        0.0,
        format!("C6 = {:e}, C7 = {:e}, delta = {:e}", k.c6, k.c7, k.delta),
    );

    if stats == Statistics::Classical {
        let (f, h) = random_pair(g, &cfg.model, rng);
        let direct: f64 = f
            .values()
            .iter()
            .zip(h.values())
            .map(|(a, b)| a * (a / b).ln())
            .sum::<f64>()
            * g.dx()
            * g.dp();
        let ours = relative_entropy(&f, &h, stats)?;
        rep.at_most("classical.kullback_form", (ours - direct).abs(), 1e-12 * direct.abs().max(1.0), "");
        let pr = projector.project(&f, None)?;
        let m = moment_checks(&pr.field, stats);
        rep.holds("classical.flux_identity_duplicates_first", m.first == m.flux, "");
    }
    Ok(())
}

fn run_checks(rep: &mut CheckReport, cfg: &ScenarioConfig, rec: &RunRecord) {
    let rows = &rec.rows;
    let m0 = rows[0].mass;
    let drift = rows.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max);
    rep.at_most("solver.mass_conservation", drift / m0, 1e-10, "relative drift over the run");

    let tol = bound_tolerance(&cfg.grid);
    let excess = rows.iter().map(|r| r.bound_violation).fold(0.0, f64::max);
    rep.at_most("solver.envelope_excess", excess, tol, "5 (dx + dp^2)");

    let worst_step = rows
        .windows(2)
        .map(|w| (w[1].h_rel - w[0].h_rel) - 1e-8 * w[0].h_rel.abs())
        .fold(f64::NEG_INFINITY, f64::max);
    rep.at_most("fn.h_rel_nonincreasing", worst_step, 0.0, "per-sample increase minus 1e-8 |H_rel|");

    let neg_d = rows
        .iter()
        .map(|r| -r.d - 1e-12 * r.h_abs.abs())
        .fold(f64::NEG_INFINITY, f64::max);
    rep.at_most("fn.dissipation_nonnegative", neg_d, 0.0, "");
    let neg_h = rows.iter().map(|r| -r.h_rel - 1e-12).fold(f64::NEG_INFINITY, f64::max);
    rep.at_most("fn.h_rel_nonnegative", neg_h, 0.0, "");

    let split_ok = rows
        .iter()
        .all(|r| triangle_split_holds(r.dist_pi, r.dist_macro, r.dist_w));
    rep.holds("fn.triangle_split", split_ok, "every diagnostics row");

    let h_inf = entropy(&rec.equilibrium.field, cfg.model.statistics).unwrap_or(f64::NAN);
    let gap = rows
        .iter()
        .map(|r| (r.h_abs - h_inf - r.h_rel).abs() / r.h_abs.abs().max(1e-300))
        .fold(0.0, f64::max);
    rep.at_most("fn.entropy_difference_identity", gap, 1e-10, "H[f] - H[f_inf] vs H[f|f_inf], relative to |H[f]|");

    let k = &rec.constants;
    let eq_ok = rows.iter().all(|r| {
        let d2 = r.dist_w * r.dist_w;
        k.c6 * d2 <= r.e * (1.0 + 1e-9) + 1e-300 && r.e <= k.c7 * d2 * (1.0 + 1e-9) + 1e-300
    });
    rep.holds("fn.e_equivalence_run", eq_ok, format!("C6 = {:e}, C7 = {:e}", k.c6, k.c7));
    let e: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.e)).collect();
    let e_tol = 1e-7 * rows[0].e.abs();
    rep.holds(
        "fn.e_nonincreasing",
        monotone_after(&e, 0.05 * cfg.solver.t_end, e_tol),
        "after the first 5% of the run, tolerance 1e-7 E(0)",
    );
    let dec: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.t, r.h_rel, r.dist_pi)).collect();
    let dt_s = rows.get(1).map(|r| r.t).unwrap_or(1.0);
    let viol = decrement_violations(&dec, 1e-12 * dt_s);
    rep.at_most(
        "fn.entropy_decrement_sign",
        viol.len() as f64,
        0.0,
        "H_rel strictly decreases while ||f - Pi f|| > 1e-6",
    );

    let moments = rec.extras.iter().map(|x| x.moments.max()).fold(0.0, f64::max);
    rep.at_most("macro.moment_identities_run", moments, 1e-8, "");
    let res = rec.extras.iter().map(|x| x.poisson_residual).fold(0.0, f64::max);
    rep.at_most("macro.poisson_residual", res, 1e-8, "spectral Laplacian of phi against rho - rho_inf");
    let (bm, bp) = (cfg.model.beta_minus, cfg.model.beta_plus);
    let slack = bound_tolerance(&cfg.grid) * 10.0 * bp;
    let beta_ok = rec
        .extras
        .iter()
        .all(|x| x.beta_range.0 >= bm - slack && x.beta_range.1 <= bp + slack);
    rep.holds("macro.beta_in_envelope_run", beta_ok, "");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;
    use crate::macroscopics::{poisson_solve, PoissonSolution};

    fn small(kappa: i64) -> ScenarioConfig {
        parse_config(
            &format!(
                "model.kappa = {kappa}\nmodel.beta_inf = 1\nmodel.beta_minus = 0.5\nmodel.beta_plus = 2\ngrid.nx = 8\ngrid.np = 128\nsolver.dt = 1e-3\nsolver.t_end = 0.5\noutput.sample_interval = 0.01\n"
            ),
            "test",
        )
        .unwrap()
    }

    struct Flipped;

    impl PoissonSolver for Flipped {
        fn solve(&self, rhs: &[f64]) -> PoissonSolution {
            let mut s = poisson_solve(rhs);
            s.phi.iter_mut().for_each(|v| *v = -*v);
            s.grad_phi.iter_mut().for_each(|v| *v = -*v);
            s
        }
    }

    #[test]
    fn zeta_oracle() {
        // zeta(2) = pi^2 / 6
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn default_suite_passes() {
        for kappa in [-1, 0, 1] {
            let rep = check_suite(&small(kappa), 7).unwrap();
            let failed: Vec<_> = rep.failures().collect();
            assert!(failed.is_empty(), "kappa {kappa}: {failed:#?}");
        }
    }

    #[test]
    fn classical_entries_only_for_kappa_zero() {
        let rep = check_suite(&small(0), 1).unwrap();
        assert!(rep.entry("classical.kullback_form").is_some());
        let rep = check_suite(&small(-1), 1).unwrap();
        assert!(rep.entry("classical.kullback_form").is_none());
    }

    #[test]
    fn broken_poisson_is_caught() {
        let rep = check_suite_with(&small(-1), 7, &Flipped).unwrap();
        assert!(!rep.passed);
        assert!(!rep.entry("macro.poisson_residual").unwrap().passed);
        assert!(!rep.entry("macro.poisson_single_mode").unwrap().passed);
    }

    #[test]
    fn snapshot_checks() {
        let cfg = small(-1);
        let f = cfg.initial_field();
        let rep = check_snapshot(&cfg, &f, 0).unwrap();
        assert!(rep.passed, "{rep:#?}");
        let other = PhaseField::zeros(GridSpec::new(4, 16, 8.0).unwrap());
        assert!(check_snapshot(&cfg, &other, 0).is_err());
    }
}
