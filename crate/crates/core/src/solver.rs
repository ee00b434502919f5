//! Time stepping by Strang splitting of the nonlinear transport and the
//! collision operator.
//!
//! The collision flux is written in the "s-form"
//! `F = f(1+kf) d_p s`, with `s = ln(f / ((1+kf) M))`. On the grid the
//! interface coefficient is the logarithmic mean of `g = f(1+kf)` at the
//! two neighbours, and `s` is differenced directly. Any sampled profile
//! `bM/(1-kbM)` has constant `s`, so it is an exact steady state of the
//! discrete collision step.
//!
//! Transport solves `d_t f + p d_x (f + kf^2) = 0` row by row with a local
//! Lax-Friedrichs flux, optionally upgraded to minmod MUSCL with SSP-RK2.

use log::{debug, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::equilibria::{profile_from_maxwellian, ModelParams};
use crate::grid::{GridSpec, PhaseField};

/// Values below this are floored before taking logarithms.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("non-finite value at x-cell {ix}, p-cell {ip} (step {step}, t = {t})")]
    NonFinite {
        ix: usize,
        ip: usize,
        step: u64,
        t: f64,
    },
    #[error("the solver evolves d = 1 only, got d = {0}")]
    Dimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportOrder {
    /// Local Lax-Friedrichs.
    First,
    /// Minmod-limited MUSCL reconstruction with SSP-RK2.
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cfl_transport: f64,
    pub cfl_collision: f64,
    pub transport_order: TransportOrder,
    /// Clip to the `[beta_minus, beta_plus]` envelope after every step.
    pub clamp_bounds: bool,
    /// Collision only: the spatially homogeneous equation.
    pub homogeneous: bool,
    /// Time between observer calls; rounded to a whole number of steps.
    pub sample_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 5e-4,
            t_end: 10.0,
            cfl_transport: 0.9,
            cfl_collision: 0.45,
            transport_order: TransportOrder::First,
            clamp_bounds: false,
            homogeneous: false,
            sample_interval: 0.05,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        for (name, c) in [
            ("cfl_transport", self.cfl_transport),
            ("cfl_collision", self.cfl_collision),
        ] {
            if !(c > 0.0 && c <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {c}"));
            }
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return bad(format!(
                "sample_interval must be positive, got {}",
                self.sample_interval
            ));
        }
        Ok(())
    }

    /// Number of full steps to reach `t_end`.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    pub fn sample_every(&self) -> u64 {
        ((self.sample_interval / self.dt).round() as u64).max(1)
    }
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub steps: u64,
    pub floor_events: u64,
    pub collision_substeps: u64,
    pub transport_substeps: u64,
    pub clamped_cells: u64,
}

/// What the observer sees at every sample.
#[derive(Debug)]
pub struct Sample<'a> {
    pub t: f64,
    pub step: u64,
    pub field: &'a PhaseField,
    pub stats: StepStats,
}

#[derive(Debug, Clone)]
pub struct Solver {
    grid: GridSpec,
    params: ModelParams,
    config: SolverConfig,
    p: Vec<f64>,
    ln_m: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Solver {
    pub fn new(
        grid: GridSpec,
        params: ModelParams,
        config: SolverConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        if params.dim != 1 {
            return Err(SolverError::Dimension(params.dim));
        }
        let kappa = params.kappa();
        let m = grid.maxwellian();
        Ok(Solver {
            grid,
            params,
            p: grid.p_centers(),
            ln_m: grid.ln_maxwellian(),
            lower: m
                .iter()
                .map(|&m| profile_from_maxwellian(params.beta_minus, kappa, m))
                .collect(),
            upper: m
                .iter()
                .map(|&m| profile_from_maxwellian(params.beta_plus, kappa, m))
                .collect(),
            config,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Envelope profiles `(f_{beta_minus}, f_{beta_plus})` on the p-grid.
    pub fn envelope(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    /// Largest stable explicit collision step for the current field.
    pub fn collision_dt_limit(&self, f: &PhaseField) -> f64 {
        let dp = self.grid.dp();
        let kappa = self.params.kappa().abs();
        let fmax = f.max_value().max(0.0);
        // the second factor bounds the drift part of the flux
        self.config.cfl_collision * dp * dp
            / ((1.0 + 2.0 * kappa * fmax) * (1.0 + 0.5 * self.grid.p_max() * dp))
    }

    /// Advances the collision operator by `dt`, sub-cycling as needed.
    /// Returns `(floor applications, sub-steps)`.
    pub fn collision_step(&self, f: &mut PhaseField, dt: f64) -> (u64, u64) {
        let n = (dt / self.collision_dt_limit(f)).ceil().max(1.0) as u64;
        let h = dt / n as f64;
        let np = self.grid.np();
        let kappa = self.params.kappa();
        let dp = self.grid.dp();
        let ln_m = &self.ln_m;
        let mut floors = 0;
        for _ in 0..n {
            floors += f
                .values_mut()
                .par_chunks_mut(np)
                .map_init(
                    || (vec![0.0; np], vec![0.0; np], vec![0.0; np + 1]),
                    |(s, g, flux), col| collide_column(col, s, g, flux, ln_m, kappa, h / dp, dp),
                )
                .sum::<u64>();
        }
        (floors, n)
    }

    /// Advances `d_t f + p d_x (f + kf^2) = 0` by `dt` with periodic
    /// boundaries, sub-cycling when the CFL bound would be exceeded.
    pub fn transport_step(&self, f: &mut PhaseField, dt: f64) -> u64 {
        let kappa = self.params.kappa();
        let dx = self.grid.dx();
        let speed = f
            .values()
            .iter()
            .map(|&v| (1.0 + 2.0 * kappa * v).abs())
            .fold(0.0, f64::max)
            * self.grid.p_max();
        let n = (dt * speed / (self.config.cfl_transport * dx)).ceil().max(1.0) as u64;
        if n > 1 {
            debug!("transport sub-cycled {n}x (dt = {dt:e})");
        }
        let h = dt / n as f64;
        for _ in 0..n {
            match self.config.transport_order {
                TransportOrder::First => {
                    let rhs = self.transport_rhs(f, false);
                    axpy(f.values_mut(), h, &rhs);
                }
                TransportOrder::Second => {
                    let f0 = f.clone();
                    let k1 = self.transport_rhs(f, true);
                    axpy(f.values_mut(), h, &k1);
                    let k2 = self.transport_rhs(f, true);
                    axpy(f.values_mut(), h, &k2);
                    for (v, v0) in f.values_mut().iter_mut().zip(f0.values()) {
                        *v = 0.5 * (v0 + *v);
                    }
                }
            }
        }
        n
    }

    /// `-(F_{i+1/2} - F_{i-1/2}) / dx` for every cell.
    fn transport_rhs(&self, f: &PhaseField, muscl: bool) -> Vec<f64> {
        let nx = self.grid.nx();
        let np = self.grid.np();
        let kappa = self.params.kappa();
        let p = &self.p;
        let vals = f.values();
        let col = |ix: usize| &vals[(ix % nx) * np..(ix % nx + 1) * np];
        // flux[ix] lives at the interface between cells ix and ix+1
        let mut flux = vec![0.0; nx * np];
        flux.par_chunks_mut(np).enumerate().for_each(|(ix, out)| {
            let (a, b) = (col(ix), col(ix + 1));
            let (am, bp) = (col(ix + nx - 1), col(ix + 2));
            for j in 0..np {
                let (fl, fr) = if muscl {
                    (
                        a[j] + 0.5 * minmod(a[j] - am[j], b[j] - a[j]),
                        b[j] - 0.5 * minmod(b[j] - a[j], bp[j] - b[j]),
                    )
                } else {
                    (a[j], b[j])
                };
                let q = |v: f64| p[j] * (v + kappa * v * v);
                let alpha = p[j].abs()
                    * (1.0 + 2.0 * kappa * fl)
                        .abs()
                        .max((1.0 + 2.0 * kappa * fr).abs());
                out[j] = 0.5 * (q(fl) + q(fr)) - 0.5 * alpha * (fr - fl);
            }
        });
        let inv_dx = 1.0 / self.grid.dx();
        let mut rhs = vec![0.0; nx * np];
        rhs.par_chunks_mut(np).enumerate().for_each(|(ix, out)| {
            let right = &flux[ix * np..(ix + 1) * np];
            let l = (ix + nx - 1) % nx;
            let left = &flux[l * np..(l + 1) * np];
            for j in 0..np {
                out[j] = -(right[j] - left[j]) * inv_dx;
            }
        });
        rhs
    }

    /// One Strang step `T(dt/2) C(dt) T(dt/2)`, or `C(dt)` in homogeneous
    /// mode.
    pub fn step(&self, f: &mut PhaseField, stats: &mut StepStats) -> Result<(), SolverError> {
        let dt = self.config.dt;
        self.advance(f, dt, stats)
    }

    /// One splitting step of length `dt`.
    pub fn advance(
        &self,
        f: &mut PhaseField,
        dt: f64,
        stats: &mut StepStats,
    ) -> Result<(), SolverError> {
        if self.config.homogeneous {
            let (fl, n) = self.collision_step(f, dt);
            stats.floor_events += fl;
            stats.collision_substeps += n;
        } else {
            stats.transport_substeps += self.transport_step(f, 0.5 * dt);
            let (fl, n) = self.collision_step(f, dt);
            stats.floor_events += fl;
            stats.collision_substeps += n;
            stats.transport_substeps += self.transport_step(f, 0.5 * dt);
        }
        if self.config.clamp_bounds {
            stats.clamped_cells += self.clamp(f);
        }
        stats.steps += 1;
        if let Some(i) = f.values().iter().position(|v| !v.is_finite()) {
            let np = self.grid.np();
            return Err(SolverError::NonFinite {
                ix: i / np,
                ip: i % np,
                step: stats.steps,
                t: stats.steps as f64 * self.config.dt,
            });
        }
        Ok(())
    }

    fn clamp(&self, f: &mut PhaseField) -> u64 {
        let np = self.grid.np();
        let mut n = 0;
        for col in f.values_mut().chunks_exact_mut(np) {
            for ((v, lo), hi) in col.iter_mut().zip(&self.lower).zip(&self.upper) {
                let c = v.clamp(*lo, *hi);
                if c != *v {
                    *v = c;
                    n += 1;
                }
            }
        }
        n
    }

    /// Step plan of a run: `(step index, step length, time after the step,
    /// whether it is sampled)`. The time of step `n` is `n * dt`; the last
    /// step is shortened to land on `t_end`.
    pub fn schedule(&self) -> impl Iterator<Item = (u64, f64, f64, bool)> + '_ {
        let n = self.config.steps();
        let every = self.config.sample_every();
        let dt = self.config.dt;
        let t_end = self.config.t_end;
        (1..=n).map(move |k| {
            if k == n {
                (k, t_end - (n - 1) as f64 * dt, t_end, true)
            } else {
                (k, dt, k as f64 * dt, k % every == 0)
            }
        })
    }

    /// Evolves `f0` to `t_end`, calling the observer at `t = 0`, every
    /// `sample_interval` and at the final time.
    pub fn evolve<O>(
        &self,
        f0: PhaseField,
        mut observer: O,
    ) -> Result<(PhaseField, StepStats), SolverError>
    where
        O: FnMut(&Sample<'_>),
    {
        let mut f = f0;
        let mut stats = StepStats::default();
        observer(&Sample {
            t: 0.0,
            step: 0,
            field: &f,
            stats,
        });
        for (k, h, t, sampled) in self.schedule() {
            self.advance(&mut f, h, &mut stats)?;
            if sampled {
                observer(&Sample {
                    t,
                    step: k,
                    field: &f,
                    stats,
                });
            }
        }
        if stats.floor_events > 0 {
            warn!("positivity floor applied {} times", stats.floor_events);
        }
        Ok((f, stats))
    }
}

/// Explicit collision update of one momentum column. Returns the number of
/// floor applications.
#[allow(clippy::too_many_arguments)]
fn collide_column(
    col: &mut [f64],
    s: &mut [f64],
    g: &mut [f64],
    flux: &mut [f64],
    ln_m: &[f64],
    kappa: f64,
    h_over_dp: f64,
    dp: f64,
) -> u64 {
    let np = col.len();
    let mut floors = 0;
    for i in 0..np {
        let mut v = col[i];
        if v < POSITIVITY_FLOOR {
            v = POSITIVITY_FLOOR;
            floors += 1;
        }
        let mut w = 1.0 + kappa * v;
        if w < POSITIVITY_FLOOR {
            w = POSITIVITY_FLOOR;
            floors += 1;
        }
        s[i] = v.ln() - w.ln() - ln_m[i];
        g[i] = v * w;
    }
    flux[0] = 0.0;
    flux[np] = 0.0;
    for i in 0..np - 1 {
        flux[i + 1] = log_mean(g[i], g[i + 1]) * (s[i + 1] - s[i]) / dp;
    }
    for i in 0..np {
        col[i] += h_over_dp * (flux[i + 1] - flux[i]);
    }
    floors
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`, arithmetic mean when the
/// arguments are within 1e-8 of each other.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let d = a - b;
    if d.abs() <= 1e-8 * a.abs().max(b.abs()) {
        return 0.5 * (a + b);
    }
    d / (a.ln() - b.ln())
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

/// Convenience wrapper: one collision advance of a copy of `f`.
pub fn collision_step(
    f: &PhaseField,
    params: &ModelParams,
    dt: f64,
) -> Result<PhaseField, SolverError> {
    let solver = Solver::new(*f.grid(), *params, SolverConfig::default())?;
    let mut out = f.clone();
    solver.collision_step(&mut out, dt);
    Ok(out)
}

/// Convenience wrapper: one transport advance of a copy of `f`.
pub fn transport_step(
    f: &PhaseField,
    params: &ModelParams,
    dt: f64,
) -> Result<PhaseField, SolverError> {
    let solver = Solver::new(*f.grid(), *params, SolverConfig::default())?;
    let mut out = f.clone();
    solver.transport_step(&mut out, dt);
    Ok(out)
}

/// Convenience wrapper around [`Solver::evolve`].
pub fn evolve<O: FnMut(&Sample<'_>)>(
    f0: PhaseField,
    params: &ModelParams,
    config: &SolverConfig,
    observer: O,
) -> Result<PhaseField, SolverError> {
    let solver = Solver::new(*f0.grid(), *params, config.clone())?;
    Ok(solver.evolve(f0, observer)?.0)
}
