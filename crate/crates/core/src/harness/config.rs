//! Scenario configuration: flat `section.key = value` text.
//!
//! ```text
//! # fermion baseline
//! model.kappa = -1
//! model.beta_inf = 1.0
//! model.beta_minus = 0.5
//! model.beta_plus = 2.0
//! init.beta_profile = 1.0 + 0.2*cos(2*pi*x)
//! ```
//!
//! Blank lines and `#` comments are ignored. Every key may appear once;
//! unknown keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::equilibria::{profile_from_maxwellian, EquilibriumError, ModelParams, Statistics};
use crate::functionals::delta_heuristic;
use crate::grid::{GridError, GridSpec, PhaseField};
use crate::solver::{SolverConfig, SolverError, TransportOrder};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Syntax {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("initial data `{which}` leaves the [beta_minus, beta_plus] envelope at x-cell {ix} (p-cell {ip}: {value:e} not in [{lo:e}, {hi:e}])")]
    Envelope {
        which: &'static str,
        ix: usize,
        ip: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Model(#[from] EquilibriumError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

/// `base + amp * cos(2 pi k x)` (or `sin`); `amp = 0` is a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaProfile {
    pub base: f64,
    pub amp: f64,
    pub mode: i64,
    pub sine: bool,
}

impl BetaProfile {
    pub fn constant(base: f64) -> Self {
        BetaProfile {
            base,
            amp: 0.0,
            mode: 0,
            sine: false,
        }
    }

    pub fn cosine(base: f64, amp: f64, mode: i64) -> Self {
        BetaProfile {
            base,
            amp,
            mode,
            sine: false,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let arg = 2.0 * PI * self.mode as f64 * x;
        self.base + self.amp * if self.sine { arg.sin() } else { arg.cos() }
    }

    /// Parses `c`, `c + c*cos(2*pi*k*x)` or the `sin` variant. The factor
    /// `k*` may be omitted (k = 1); `-` is accepted in place of `+`.
    pub fn parse(text: &str) -> Result<Self, String> {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| {
            let num = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?";
            Regex::new(&format!(
                r"^\s*([-+]?{num})\s*(?:([-+])\s*({num})\s*\*\s*(cos|sin)\s*\(\s*2\s*\*\s*pi\s*\*\s*(?:([0-9]+)\s*\*\s*)?x\s*\)\s*)?$"
            ))
            .expect("valid regex")
        });
        let caps = re
            .captures(text)
            .ok_or_else(|| format!("`{text}` is not `c`, `c + c*cos(2*pi*k*x)` or `c + c*sin(2*pi*k*x)`"))?;
        let base: f64 = caps[1].parse().map_err(|e| format!("{e}"))?;
        let Some(sign) = caps.get(2) else {
            return Ok(BetaProfile::constant(base));
        };
        let mut amp: f64 = caps[3].parse().map_err(|e| format!("{e}"))?;
        if sign.as_str() == "-" {
            amp = -amp;
        }
        let mode = caps
            .get(5)
            .map(|m| m.as_str().parse::<i64>())
            .transpose()
            .map_err(|e| format!("{e}"))?
            .unwrap_or(1);
        Ok(BetaProfile {
            base,
            amp,
            mode,
            sine: &caps[4] == "sin",
        })
    }
}

impl std::fmt::Display for BetaProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.amp == 0.0 {
            return write!(f, "{}", self.base);
        }
        let (sign, amp) = if self.amp < 0.0 { ('-', -self.amp) } else { ('+', self.amp) };
        let func = if self.sine { "sin" } else { "cos" };
        write!(f, "{} {sign} {amp}*{func}(2*pi*{}*x)", self.base, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    LocalEquilibrium { beta_profile: BetaProfile },
    /// `mid(p) + a half(p) cos(2 pi k_x x) psi_m(p)` between the envelope
    /// profiles, with `psi_0 = 1` and `psi_m = sin(m pi p / (2 p_max))`.
    PinchedPerturbation {
        amplitude: f64,
        x_mode: i64,
        p_mode: i64,
    },
}

impl InitialCondition {
    pub fn sample(&self, grid: GridSpec, params: &ModelParams) -> PhaseField {
        let stats = params.statistics;
        match *self {
            InitialCondition::LocalEquilibrium { beta_profile } => {
                PhaseField::local_equilibrium(grid, stats, |x| beta_profile.eval(x))
            }
            InitialCondition::PinchedPerturbation {
                amplitude,
                x_mode,
                p_mode,
            } => {
                let kappa = stats.kappa();
                let p_max = grid.p_max();
                PhaseField::from_fn(grid, |x, p| {
                    let m = crate::equilibria::maxwellian_1d(p);
                    let lo = profile_from_maxwellian(params.beta_minus, kappa, m);
                    let hi = profile_from_maxwellian(params.beta_plus, kappa, m);
                    let shape = if p_mode == 0 {
                        1.0
                    } else {
                        (p_mode as f64 * PI * p / (2.0 * p_max)).sin()
                    };
                    let wave = (2.0 * PI * x_mode as f64 * x).cos();
                    0.5 * (lo + hi) + amplitude * 0.5 * (hi - lo) * wave * shape
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub emit_plots: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub model: ModelParams,
    /// Whether `model.delta` was given explicitly.
    pub delta_given: bool,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    pub companion: Option<InitialCondition>,
    pub output: OutputConfig,
    pub fit_window: [f64; 2],
    pub seed: u64,
    /// The parsed key set, echoed into `fit.json`.
    pub echo: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "model.kappa",
    "model.beta_inf",
    "model.beta_minus",
    "model.beta_plus",
    "model.delta",
    "model.dim",
    "grid.nx",
    "grid.np",
    "grid.p_max",
    "solver.dt",
    "solver.t_end",
    "solver.cfl_transport",
    "solver.cfl_collision",
    "solver.transport_order",
    "solver.clamp_bounds",
    "solver.homogeneous",
    "init.kind",
    "init.beta_profile",
    "init.amplitude",
    "init.x_mode",
    "init.p_mode",
    "pair.kind",
    "pair.beta_profile",
    "pair.amplitude",
    "pair.x_mode",
    "pair.p_mode",
    "output.directory",
    "output.sample_interval",
    "output.emit_plots",
    "fit.window_start",
    "fit.window_end",
    "check.seed",
];

/// Documented key list, in file order.
pub fn known_keys() -> &'static [&'static str] {
    KEYS
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_owned(), e))?;
    parse_config(&text, &path.display().to_string())
}

/// Parses and validates a configuration. `origin` names the source in
/// syntax errors.
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw = parse_pairs(text, origin)?;
    build(raw)
}

fn parse_pairs(text: &str, origin: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let syntax = |line: usize, msg: String| ConfigError::Syntax {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| syntax(i + 1, format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(syntax(i + 1, format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(syntax(i + 1, format!("empty value for `{k}`")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(syntax(i + 1, format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

struct Values<'a>(&'a BTreeMap<String, String>);

impl Values<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.into(),
                    msg: format!("`{v}`: {e}"),
                })
            })
            .transpose()
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }
}

fn build(raw: BTreeMap<String, String>) -> Result<ScenarioConfig, ConfigError> {
    let v = Values(&raw);
    let kappa: i64 = v.req("model.kappa")?;
    let statistics = Statistics::from_kappa(kappa).ok_or_else(|| ConfigError::Value {
        key: "model.kappa".into(),
        msg: format!("must be -1, 0 or 1, got {kappa}"),
    })?;
    let beta_inf: f64 = v.req("model.beta_inf")?;
    let dim: usize = v.or("model.dim", 1)?;
    let delta_given = raw.contains_key("model.delta");
    let mut model = ModelParams {
        statistics,
        beta_inf,
        beta_minus: v.req("model.beta_minus")?,
        beta_plus: v.req("model.beta_plus")?,
        delta: v.or("model.delta", 1.0)?,
        dim,
    };
    model.validate()?;
    let grid = GridSpec::new(
        v.or("grid.nx", 64)?,
        v.or("grid.np", 128)?,
        v.or("grid.p_max", 8.0)?,
    )?;
    if !delta_given {
        model.delta = delta_heuristic(&model, &grid);
    }
    let defaults = SolverConfig::default();
    let order: u8 = v.or("solver.transport_order", 1)?;
    let solver = SolverConfig {
        dt: v.or("solver.dt", defaults.dt)?,
        t_end: v.or("solver.t_end", defaults.t_end)?,
        cfl_transport: v.or("solver.cfl_transport", defaults.cfl_transport)?,
        cfl_collision: v.or("solver.cfl_collision", defaults.cfl_collision)?,
        transport_order: match order {
            1 => TransportOrder::First,
            2 => TransportOrder::Second,
            o => {
                return Err(ConfigError::Value {
                    key: "solver.transport_order".into(),
                    msg: format!("must be 1 or 2, got {o}"),
                })
            }
        },
        clamp_bounds: v.or("solver.clamp_bounds", false)?,
        homogeneous: v.or("solver.homogeneous", false)?,
        sample_interval: v.or("output.sample_interval", defaults.sample_interval)?,
    };
    solver.validate()?;

    let default_profile = BetaProfile::cosine(beta_inf, 0.2 * beta_inf, 1);
    let initial = initial_condition(&v, "init", Some(default_profile))?
        .expect("a default initial condition exists");
    let companion = initial_condition(&v, "pair", None)?;

    let t_end = solver.t_end;
    let fit_window = [
        v.or("fit.window_start", 0.2 * t_end)?,
        v.or("fit.window_end", t_end)?,
    ];
    if !(fit_window[0] < fit_window[1]) {
        return Err(ConfigError::Value {
            key: "fit.window_start".into(),
            msg: format!("window [{}, {}] is empty", fit_window[0], fit_window[1]),
        });
    }
    let cfg = ScenarioConfig {
        model,
        delta_given,
        grid,
        solver,
        initial,
        companion,
        output: OutputConfig {
            directory: v.or("output.directory", PathBuf::from("out"))?,
            emit_plots: v.or("output.emit_plots", true)?,
        },
        fit_window,
        seed: v.or("check.seed", 0)?,
        echo: raw.clone(),
    };
    cfg.check_envelope()?;
    Ok(cfg)
}

fn initial_condition(
    v: &Values<'_>,
    section: &str,
    default_profile: Option<BetaProfile>,
) -> Result<Option<InitialCondition>, ConfigError> {
    let key = |k: &str| format!("{section}.{k}");
    let any = ["kind", "beta_profile", "amplitude", "x_mode", "p_mode"]
        .iter()
        .any(|k| v.0.contains_key(&key(k)));
    if !any && default_profile.is_none() {
        return Ok(None);
    }
    let kind: String = v.or(&key("kind"), "local_equilibrium".to_string())?;
    match kind.as_str() {
        "local_equilibrium" => {
            let profile = match v.0.get(&key("beta_profile")) {
                Some(text) => BetaProfile::parse(text).map_err(|msg| ConfigError::Value {
                    key: key("beta_profile"),
                    msg,
                })?,
                None => default_profile.ok_or_else(|| ConfigError::Missing(key("beta_profile")))?,
            };
            Ok(Some(InitialCondition::LocalEquilibrium {
                beta_profile: profile,
            }))
        }
        "pinched_perturbation" => {
            let amplitude: f64 = v.or(&key("amplitude"), 0.5)?;
            if !(amplitude.abs() <= 1.0) {
                return Err(ConfigError::Value {
                    key: key("amplitude"),
                    msg: format!("must lie in [-1, 1], got {amplitude}"),
                });
            }
            Ok(Some(InitialCondition::PinchedPerturbation {
                amplitude,
                x_mode: v.or(&key("x_mode"), 1)?,
                p_mode: v.or(&key("p_mode"), 0)?,
            }))
        }
        other => Err(ConfigError::Value {
            key: key("kind"),
            msg: format!("unknown initial condition `{other}` (local_equilibrium, pinched_perturbation)"),
        }),
    }
}

impl ScenarioConfig {
    /// Parses the documented defaults around the four required model keys.
    pub fn minimal(kappa: i64, beta_inf: f64, beta_minus: f64, beta_plus: f64) -> Result<Self, ConfigError> {
        parse_config(
            &format!(
                "model.kappa = {kappa}\nmodel.beta_inf = {beta_inf}\nmodel.beta_minus = {beta_minus}\nmodel.beta_plus = {beta_plus}\n"
            ),
            "<minimal>",
        )
    }

    /// Every setting after defaults, keyed like the config file.
    pub fn resolved(&self) -> BTreeMap<String, serde_json::Value> {
        use serde_json::json;
        let m = &self.model;
        let s = &self.solver;
        let mut out: BTreeMap<String, serde_json::Value> = [
            ("model.kappa", json!(m.statistics.kappa_int())),
            ("model.beta_inf", json!(m.beta_inf)),
            ("model.beta_minus", json!(m.beta_minus)),
            ("model.beta_plus", json!(m.beta_plus)),
            ("model.delta", json!(m.delta)),
            ("model.dim", json!(m.dim)),
            ("grid.nx", json!(self.grid.nx())),
            ("grid.np", json!(self.grid.np())),
            ("grid.p_max", json!(self.grid.p_max())),
            ("solver.dt", json!(s.dt)),
            ("solver.t_end", json!(s.t_end)),
            ("solver.cfl_transport", json!(s.cfl_transport)),
            ("solver.cfl_collision", json!(s.cfl_collision)),
            (
                "solver.transport_order",
                json!(match s.transport_order {
                    TransportOrder::First => 1,
                    TransportOrder::Second => 2,
                }),
            ),
            ("solver.clamp_bounds", json!(s.clamp_bounds)),
            ("solver.homogeneous", json!(s.homogeneous)),
            ("output.directory", json!(self.output.directory)),
            ("output.sample_interval", json!(s.sample_interval)),
            ("output.emit_plots", json!(self.output.emit_plots)),
            ("fit.window_start", json!(self.fit_window[0])),
            ("fit.window_end", json!(self.fit_window[1])),
            ("check.seed", json!(self.seed)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let mut ic = |section: &str, c: &InitialCondition| match *c {
            InitialCondition::LocalEquilibrium { beta_profile } => {
                out.insert(format!("{section}.kind"), json!("local_equilibrium"));
                out.insert(format!("{section}.beta_profile"), json!(beta_profile.to_string()));
            }
            InitialCondition::PinchedPerturbation {
                amplitude,
                x_mode,
                p_mode,
            } => {
                out.insert(format!("{section}.kind"), json!("pinched_perturbation"));
                out.insert(format!("{section}.amplitude"), json!(amplitude));
                out.insert(format!("{section}.x_mode"), json!(x_mode));
                out.insert(format!("{section}.p_mode"), json!(p_mode));
            }
        };
        ic("init", &self.initial);
        if let Some(c) = &self.companion {
            ic("pair", c);
        }
        out
    }

    /// The resolved settings as config text; parsing it gives back `self`
    /// up to the echo map.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.resolved() {
            let v = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn initial_field(&self) -> PhaseField {
        self.initial.sample(self.grid, &self.model)
    }

    pub fn companion_field(&self) -> Option<PhaseField> {
        self.companion.as_ref().map(|c| c.sample(self.grid, &self.model))
    }

    /// Both initial fields must lie between the `beta_minus` and `beta_plus`
    /// profiles at every cell.
    pub fn check_envelope(&self) -> Result<(), ConfigError> {
        let (lo, hi) = crate::functionals::envelope(&self.model, &self.grid);
        let mut fields = vec![("init", self.initial_field())];
        if let Some(g) = self.companion_field() {
            fields.push(("pair", g));
        }
        for (which, f) in fields {
            for (ix, col) in f.columns().enumerate() {
                for (ip, &value) in col.iter().enumerate() {
                    let tol = 1e-12 * hi[ip];
                    if !(value >= lo[ip] - tol && value <= hi[ip] + tol) {
                        return Err(ConfigError::Envelope {
                            which,
                            ix,
                            ip,
                            value,
                            lo: lo[ip],
                            hi: hi[ip],
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
