//! Running scenarios and writing their artifacts.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use super::config::ScenarioConfig;
use super::plot::{emit_plot, PlotKind, Series};
use super::HarnessError;
use crate::equilibria::ModelParams;
use crate::functionals::{
    dissipation, entropy, envelope, envelope_excess, fit_decay_rate, modified_entropy,
    relative_entropy, Constants, DecayFit, DiagnosticsRow,
};
use crate::grid::{
    integrate_phase, l1_distance, weighted_l2_distance, weighted_l2_norm, write_snapshot,
    GridSpec, PhaseField,
};
use crate::macroscopics::{
    moment_checks, poisson_residual, rr_ratio_extremes, GlobalEquilibrium, MomentReport,
    PoissonSolver, Projector, SpectralPoisson,
};
use crate::solver::{Solver, StepStats};

/// Per-sample quantities that are not CSV columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleExtras {
    /// `sum d_x phi j dx`
    pub coupling: f64,
    pub beta_range: (f64, f64),
    pub poisson_residual: f64,
    pub moments: MomentReport,
    pub rr_extremes: Option<(f64, f64)>,
    /// `(f - g)+` maximum for a companion run.
    pub pair_excess: Option<f64>,
}

/// Evaluates the diagnostics of successive snapshots of one run.
pub struct Diagnostics<'a> {
    params: ModelParams,
    projector: Projector,
    equilibrium: GlobalEquilibrium,
    lower: Vec<f64>,
    upper: Vec<f64>,
    poisson: &'a dyn PoissonSolver,
    warm: Option<Vec<f64>>,
}

impl<'a> Diagnostics<'a> {
    pub fn new(
        params: ModelParams,
        grid: GridSpec,
        equilibrium: GlobalEquilibrium,
        poisson: &'a dyn PoissonSolver,
    ) -> Self {
        let (lower, upper) = envelope(&params, &grid);
        Diagnostics {
            params,
            projector: Projector::new(grid, params.statistics),
            equilibrium,
            lower,
            upper,
            poisson,
            warm: None,
        }
    }

    pub fn equilibrium(&self) -> &GlobalEquilibrium {
        &self.equilibrium
    }

    pub fn row(
        &mut self,
        t: f64,
        f: &PhaseField,
        companion: Option<&PhaseField>,
        stats: &StepStats,
    ) -> Result<(DiagnosticsRow, SampleExtras), HarnessError> {
        let stats_kind = self.params.statistics;
        let f_inf = &self.equilibrium.field;
        let pr = self.projector.project(f, self.warm.as_deref())?;
        let (me, state) = modified_entropy(
            f,
            f_inf,
            self.equilibrium.rho,
            &pr,
            &self.params,
            self.poisson,
        )?;
        let rhs: Vec<f64> = state.rho.iter().map(|r| r - self.equilibrium.rho).collect();
        let beta_range = pr
            .beta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let extras = SampleExtras {
            coupling: me.coupling,
            beta_range,
            poisson_residual: poisson_residual(&state.phi, &rhs),
            moments: moment_checks(&pr.field, stats_kind),
            rr_extremes: rr_ratio_extremes(f, &pr.field, f_inf, self.equilibrium.rho),
            pair_excess: companion.map(|g| {
                f.values()
                    .iter()
                    .zip(g.values())
                    .map(|(a, b)| a - b)
                    .fold(0.0, f64::max)
            }),
        };
        let row = DiagnosticsRow {
            t,
            mass: integrate_phase(f),
            h_abs: entropy(f, stats_kind)?,
            h_rel: me.h_rel,
            h_rel_pi: relative_entropy(f, &pr.field, stats_kind)?,
            d: dissipation(f, stats_kind),
            e: me.e,
            dist_w: weighted_l2_distance(f, f_inf)?,
            dist_pi: weighted_l2_distance(f, &pr.field)?,
            dist_macro: weighted_l2_distance(&pr.field, f_inf)?,
            l1_pair: companion.map(|g| l1_distance(f, g)).transpose()?,
            floor_events: stats.floor_events,
            bound_violation: envelope_excess(f, &self.lower, &self.upper),
        };
        self.warm = Some(pr.beta);
        Ok((row, extras))
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<DiagnosticsRow>,
    pub extras: Vec<SampleExtras>,
    pub fit: Option<DecayFit>,
    pub constants: Constants,
    pub equilibrium: GlobalEquilibrium,
    pub final_field: PhaseField,
    pub final_companion: Option<PhaseField>,
    pub stats: StepStats,
}

impl RunRecord {
    pub fn series(&self, pick: impl Fn(&DiagnosticsRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, pick(r))).collect()
    }

    pub fn pair_report(&self, dt: f64) -> Option<PairReport> {
        PairReport::from_rows(&self.rows, &self.extras, dt)
    }
}

/// Below this `||f0 - f_inf|| / ||f_inf||` no decay is fitted.
pub const DEGENERATE_DISTANCE: f64 = 1e-10;

/// Evolves the configured scenario (and its companion, in lockstep) and
/// collects diagnostics.
pub fn simulate(cfg: &ScenarioConfig) -> Result<RunRecord, HarnessError> {
    simulate_with(cfg, &SpectralPoisson)
}

pub fn simulate_with(
    cfg: &ScenarioConfig,
    poisson: &dyn PoissonSolver,
) -> Result<RunRecord, HarnessError> {
    let solver = Solver::new(cfg.grid, cfg.model, cfg.solver.clone())?;
    let mut f = cfg.initial_field();
    let mut g = cfg.companion_field();
    let equilibrium = GlobalEquilibrium::matching(&f, cfg.model.statistics)?;
    info!(
        "equilibrium beta = {:.12} (configured {})",
        equilibrium.beta, cfg.model.beta_inf
    );
    let constants = Constants::new(&cfg.model, &cfg.grid, cfg.model.delta);
    let mut diag = Diagnostics::new(cfg.model, cfg.grid, equilibrium.clone(), poisson);
    let mut stats = StepStats::default();
    let mut g_stats = StepStats::default();
    let mut rows = Vec::new();
    let mut extras = Vec::new();
    let (r, e) = diag.row(0.0, &f, g.as_ref(), &stats)?;
    rows.push(r);
    extras.push(e);
    for (_, h, t, sampled) in solver.schedule() {
        match g.as_mut() {
            Some(g) => {
                let (a, b) = rayon::join(
                    || solver.advance(&mut f, h, &mut stats),
                    || solver.advance(g, h, &mut g_stats),
                );
                a?;
                b?;
            }
            None => solver.advance(&mut f, h, &mut stats)?,
        }
        if sampled {
            let (r, e) = diag.row(t, &f, g.as_ref(), &stats)?;
            rows.push(r);
            extras.push(e);
        }
    }
    if stats.floor_events > 0 {
        warn!("positivity floor applied {} times", stats.floor_events);
    }
    let fit = fit_run(&rows, &equilibrium, cfg.fit_window);
    Ok(RunRecord {
        rows,
        extras,
        fit,
        constants,
        equilibrium,
        final_field: f,
        final_companion: g,
        stats,
    })
}

fn fit_run(rows: &[DiagnosticsRow], eq: &GlobalEquilibrium, window: [f64; 2]) -> Option<DecayFit> {
    let d0 = rows.first()?.dist_w;
    if d0 <= DEGENERATE_DISTANCE * weighted_l2_norm(&eq.field) {
        info!("initial data is the equilibrium; no decay fitted");
        return None;
    }
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.dist_w)).collect();
    match fit_decay_rate(&series, window) {
        Ok(fit) => Some(fit),
        Err(e) => {
            warn!("decay fit failed: {e}");
            None
        }
    }
}

/// L1 comparison of a run and its companion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairReport {
    pub l1_initial: f64,
    /// `max_t l1(t) / l1(0)`, 0 when the data coincide.
    pub max_ratio: f64,
    /// `max_t (l1(t) / l1(0) - 1)+`
    pub contraction_excess: f64,
    /// `max_t (l1(t) - l1(0) (1 + 10 dt t))`, nonpositive when the
    /// allowance holds.
    pub allowance_margin: f64,
    /// Whether `f0 <= g0` everywhere.
    pub ordered: bool,
    /// `max_t max (f - g)+`
    pub ordered_excess: f64,
}

impl PairReport {
    pub fn from_rows(rows: &[DiagnosticsRow], extras: &[SampleExtras], dt: f64) -> Option<Self> {
        let l1_0 = rows.first()?.l1_pair?;
        let mut rep = PairReport {
            l1_initial: l1_0,
            max_ratio: 0.0,
            contraction_excess: 0.0,
            allowance_margin: f64::NEG_INFINITY,
            ordered: extras.first()?.pair_excess? <= 0.0,
            ordered_excess: 0.0,
        };
        for (r, e) in rows.iter().zip(extras) {
            let l1 = r.l1_pair?;
            let ratio = if l1_0 > 0.0 { l1 / l1_0 } else { 0.0 };
            rep.max_ratio = rep.max_ratio.max(ratio);
            rep.contraction_excess = rep.contraction_excess.max(ratio - 1.0);
            rep.allowance_margin = rep
                .allowance_margin
                .max(l1 - l1_0 * (1.0 + 10.0 * dt * r.t));
            rep.ordered_excess = rep.ordered_excess.max(e.pair_excess.unwrap_or(0.0));
        }
        Some(rep)
    }
}

/// Writes `diagnostics.csv`.
pub fn write_diagnostics(path: &Path, rows: &[DiagnosticsRow]) -> std::io::Result<()> {
    let mut out = String::with_capacity(rows.len() * 300);
    out.push_str(DiagnosticsRow::HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    fs::write(path, out)
}

fn fit_json(cfg: &ScenarioConfig, rec: &RunRecord) -> serde_json::Value {
    let k = &rec.constants;
    let (lambda, c, r2, window) = match rec.fit {
        Some(f) => (json!(f.lambda), json!(f.c), json!(f.r_squared), json!(f.window)),
        None => (
            serde_json::Value::Null,
            serde_json::Value::Null,
            serde_json::Value::Null,
            json!(cfg.fit_window),
        ),
    };
    json!({
        "lambda": lambda,
        "c": c,
        "r_squared": r2,
        "window": window,
        "C3": k.c3,
        "C4": k.c4,
        "C6": k.c6,
        "C7": k.c7,
        "delta": k.delta,
        "beta_equilibrium": rec.equilibrium.beta,
        "config": cfg.resolved(),
    })
}

/// Runs a scenario and writes `diagnostics.csv`, `fit.json`,
/// `final_snapshot.csv` and, if enabled, `decay.svg` and `entropy.svg`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<RunRecord, HarnessError> {
    let rec = simulate(cfg)?;
    write_run(cfg, &rec, out)?;
    Ok(rec)
}

pub fn write_run(cfg: &ScenarioConfig, rec: &RunRecord, out: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(out)?;
    write_diagnostics(&out.join("diagnostics.csv"), &rec.rows)?;
    let mut f = fs::File::create(out.join("fit.json"))?;
    serde_json::to_writer_pretty(&mut f, &fit_json(cfg, rec))?;
    f.write_all(b"\n")?;
    let t_end = rec.rows.last().map(|r| r.t).unwrap_or(0.0);
    write_snapshot(&out.join("final_snapshot.csv"), &rec.final_field, t_end)?;
    if cfg.output.emit_plots {
        emit_plot(
            &[
                Series::new("dist_w", rec.series(|r| r.dist_w)),
                Series::new("E", rec.series(|r| r.e)),
            ],
            PlotKind::Semilog,
            "decay to equilibrium",
            "t",
            &out.join("decay.svg"),
        )?;
        emit_plot(
            &[
                Series::new("H_rel", rec.series(|r| r.h_rel)),
                Series::new("D", rec.series(|r| r.d)),
            ],
            PlotKind::Linear,
            "relative entropy and dissipation",
            "t",
            &out.join("entropy.svg"),
        )?;
    }
    Ok(())
}

/// One line of the `sweep-delta` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Rate of `sqrt(E)`, comparable with the rate of `dist_w`.
    pub lambda: Option<f64>,
    pub r_squared: Option<f64>,
    pub monotone: bool,
    pub c6: f64,
    pub c7: f64,
}

/// Refits the decay of `E = H_rel + delta * coupling` for every `delta`
/// from a single recorded run.
pub fn sweep_delta(cfg: &ScenarioConfig, rec: &RunRecord, deltas: &[f64]) -> Vec<SweepRow> {
    deltas
        .iter()
        .map(|&delta| {
            let e: Vec<(f64, f64)> = rec
                .rows
                .iter()
                .zip(&rec.extras)
                .map(|(r, x)| (r.t, r.h_rel + delta * x.coupling))
                .collect();
            let sqrt_e: Vec<(f64, f64)> = e.iter().map(|&(t, v)| (t, v.max(0.0).sqrt())).collect();
            let fit = fit_decay_rate(&sqrt_e, cfg.fit_window).ok();
            let k = Constants::new(&cfg.model, &cfg.grid, delta);
            SweepRow {
                delta,
                lambda: fit.map(|f| f.lambda),
                r_squared: fit.map(|f| f.r_squared),
                monotone: monotone_after(&e, 0.05 * cfg.solver.t_end, 1e-7 * e[0].1.abs()),
                c6: k.c6,
                c7: k.c7,
            }
        })
        .collect()
}

/// Whether the series never increases by more than `tol` between
/// consecutive samples with `t >= t0`.
pub fn monotone_after(series: &[(f64, f64)], t0: f64, tol: f64) -> bool {
    series
        .windows(2)
        .filter(|w| w[0].0 >= t0)
        .all(|w| w[1].1 <= w[0].1 + tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn small(extra: &str) -> ScenarioConfig {
        parse_config(
            &format!(
                "model.kappa = -1\nmodel.beta_inf = 1\nmodel.beta_minus = 0.5\nmodel.beta_plus = 2\ngrid.nx = 8\ngrid.np = 32\nsolver.dt = 1e-3\nsolver.t_end = 0.5\noutput.sample_interval = 0.01\n{extra}"
            ),
            "test",
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_start_is_degenerate() {
        let cfg = small("init.beta_profile = 1.0\n");
        let rec = simulate(&cfg).unwrap();
        assert!(rec.fit.is_none());
        assert!(rec.rows.iter().all(|r| r.dist_w <= 1e-11));
        let v = fit_json(&cfg, &rec);
        assert!(v["lambda"].is_null() && v["r_squared"].is_null());
    }

    #[test]
    fn identical_pair_has_zero_ratio() {
        let cfg = small("pair.beta_profile = 1.0 + 0.2*cos(2*pi*x)\n");
        let rec = simulate(&cfg).unwrap();
        let rep = rec.pair_report(cfg.solver.dt).unwrap();
        assert_eq!(rep.l1_initial, 0.0);
        assert_eq!(rep.max_ratio, 0.0);
        assert_eq!(rep.ordered_excess, 0.0);
        assert!(rep.ordered);
    }

    #[test]
    fn run_writes_artifacts_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small("");
        run_scenario(&cfg, &dir.path().join("a")).unwrap();
        run_scenario(&cfg, &dir.path().join("b")).unwrap();
        for name in ["diagnostics.csv", "fit.json", "final_snapshot.csv", "decay.svg", "entropy.svg"] {
            let a = fs::read(dir.path().join("a").join(name)).unwrap();
            let b = fs::read(dir.path().join("b").join(name)).unwrap();
            assert_eq!(a, b, "{name}");
        }
        let csv = fs::read_to_string(dir.path().join("a/diagnostics.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), DiagnosticsRow::HEADER);
        assert_eq!(csv.lines().count(), 52);
    }

    #[test]
    fn sweep_reports_constants() {
        let cfg = small("");
        let rec = simulate(&cfg).unwrap();
        let d = cfg.model.delta;
        let rows = sweep_delta(&cfg, &rec, &[0.5 * d, d]);
        assert_eq!(rows.len(), 2);
        assert!((rows[1].c6 - 0.5 * rec.constants.c3).abs() < 1e-15);
        assert!(rows.iter().all(|r| r.lambda.unwrap() > 0.0));
    }
}
