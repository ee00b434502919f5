//! Maxwellian and quantum equilibrium profiles.
//!
//! Everything here is a pure function of its arguments. The profiles are
//!
//! ```text
//! M(p)      = (2 pi)^(-d/2) exp(-|p|^2 / 2)
//! f_beta(p) = beta M(p) / (1 - kappa beta M(p))
//! ```
//!
//! with `kappa = -1` (Fermi-Dirac), `0` (Maxwell-Boltzmann) or `+1`
//! (Bose-Einstein). The map `beta -> mass` is strictly increasing, and
//! [`beta_of_mass`] inverts it by bisection.

use std::f64::consts::PI;

use thiserror::Error;

/// Relative distance below the boson limit `(2 pi)^(d/2)` used as the upper
/// end of the bisection bracket.
const BOSON_BRACKET_MARGIN: f64 = 1e-9;
const BISECTION_MAX_ITER: usize = 200;
/// Target for `|mass_of_beta(beta) - mass| / mass`.
const MASS_RESIDUAL_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("beta must be positive and finite, got {0}")]
    NonPositiveBeta(f64),
    #[error("boson parameter beta = {beta} must lie below (2 pi)^(d/2) = {limit}")]
    BosonBetaOutOfRange { beta: f64, limit: f64 },
    #[error("mass must be positive and finite, got {0}")]
    NonPositiveMass(f64),
    #[error("no equilibrium exists: mass {mass} exceeds the largest attainable mass {limit}")]
    NoEquilibrium { mass: f64, limit: f64 },
    #[error("the midpoint momentum quadrature only supports d = 1 (got d = {0})")]
    UnsupportedDimension(usize),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

/// Particle statistics, selected by the sign `kappa` of the quantum correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    Fermi,
    Classical,
    Bose,
}

impl Statistics {
    pub fn from_kappa(kappa: i64) -> Option<Self> {
        match kappa {
            -1 => Some(Statistics::Fermi),
            0 => Some(Statistics::Classical),
            1 => Some(Statistics::Bose),
            _ => None,
        }
    }

    pub fn kappa_int(self) -> i32 {
        match self {
            Statistics::Fermi => -1,
            Statistics::Classical => 0,
            Statistics::Bose => 1,
        }
    }

    #[inline]
    pub fn kappa(self) -> f64 {
        f64::from(self.kappa_int())
    }
}

/// Model parameters: statistics, the global equilibrium parameter, the
/// envelope `beta_minus <= beta_inf <= beta_plus` and the coupling weight
/// of the modified entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub statistics: Statistics,
    pub beta_inf: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub delta: f64,
    pub dim: usize,
}

impl ModelParams {
    pub fn new(
        statistics: Statistics,
        beta_inf: f64,
        beta_minus: f64,
        beta_plus: f64,
        delta: f64,
        dim: usize,
    ) -> Result<Self, EquilibriumError> {
        let params = ModelParams {
            statistics,
            beta_inf,
            beta_minus,
            beta_plus,
            delta,
            dim,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), EquilibriumError> {
        let bad = |msg: String| Err(EquilibriumError::InvalidParams(msg));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        for (name, v) in [
            ("beta_inf", self.beta_inf),
            ("beta_minus", self.beta_minus),
            ("beta_plus", self.beta_plus),
            ("delta", self.delta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.beta_minus <= self.beta_inf && self.beta_inf <= self.beta_plus) {
            return bad(format!(
                "need beta_minus <= beta_inf <= beta_plus, got {} <= {} <= {}",
                self.beta_minus, self.beta_inf, self.beta_plus
            ));
        }
        if self.statistics == Statistics::Bose {
            let limit = boson_beta_limit(self.dim);
            if self.beta_plus >= limit {
                return Err(EquilibriumError::BosonBetaOutOfRange {
                    beta: self.beta_plus,
                    limit,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.statistics.kappa()
    }

    /// Same parameters with a different coupling weight.
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

/// `(2 pi)^(d/2)`: bosonic profiles are finite only for `beta` below this.
pub fn boson_beta_limit(dim: usize) -> f64 {
    (2.0 * PI).powf(dim as f64 / 2.0)
}

#[inline]
pub fn maxwellian_1d(p: f64) -> f64 {
    (-0.5 * p * p).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn ln_maxwellian_1d(p: f64) -> f64 {
    -0.5 * p * p - 0.5 * (2.0 * PI).ln()
}

/// `M(p)` for a momentum vector; the dimension is `p.len()`.
pub fn maxwellian(p: &[f64]) -> f64 {
    let d = p.len() as f64;
    let r2: f64 = p.iter().map(|x| x * x).sum();
    (2.0 * PI).powf(-d / 2.0) * (-0.5 * r2).exp()
}

/// `beta m / (1 - kappa beta m)` given the Maxwellian value `m`.
///
/// No domain checks; callers guarantee `1 - kappa beta m > 0`.
#[inline]
pub fn profile_from_maxwellian(beta: f64, kappa: f64, m: f64) -> f64 {
    let bm = beta * m;
    bm / (1.0 - kappa * bm)
}

fn check_beta(beta: f64, statistics: Statistics, dim: usize) -> Result<(), EquilibriumError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(EquilibriumError::NonPositiveBeta(beta));
    }
    if statistics == Statistics::Bose {
        let limit = boson_beta_limit(dim);
        if beta >= limit {
            return Err(EquilibriumError::BosonBetaOutOfRange { beta, limit });
        }
    }
    Ok(())
}

/// Equilibrium profile `beta M(p) / (1 - kappa beta M(p))` at momentum `p`.
pub fn equilibrium_profile(
    beta: f64,
    statistics: Statistics,
    p: &[f64],
) -> Result<f64, EquilibriumError> {
    check_beta(beta, statistics, p.len())?;
    Ok(profile_from_maxwellian(beta, statistics.kappa(), maxwellian(p)))
}

/// Momentum derivative of the one-dimensional profile,
/// `-p beta M / (1 - kappa beta M)^2`.
pub fn equilibrium_profile_dp(beta: f64, kappa: f64, p: f64) -> f64 {
    let bm = beta * maxwellian_1d(p);
    let denom = 1.0 - kappa * bm;
    -p * bm / (denom * denom)
}

/// How momentum integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumQuadrature {
    /// High-accuracy integral over all of `R^d` for radial integrands.
    Radial,
    /// Cell-centred midpoint rule on `[-p_max, p_max]` with `cells` cells
    /// (one dimension only). This matches the solver's phase-space grid.
    Midpoint { p_max: f64, cells: usize },
}

impl MomentumQuadrature {
    /// Midpoint nodes `p_j = (j + 1/2 - n/2) dp`, exactly symmetric about 0.
    pub fn midpoint_nodes(p_max: f64, cells: usize) -> (Vec<f64>, f64) {
        let dp = 2.0 * p_max / cells as f64;
        let half = cells as f64 / 2.0;
        let nodes = (0..cells).map(|j| (j as f64 + 0.5 - half) * dp).collect();
        (nodes, dp)
    }

    /// Integral of the Maxwellian itself under this rule.
    pub fn maxwellian_mass(&self, dim: usize) -> Result<f64, EquilibriumError> {
        mass_of_beta(1.0, Statistics::Classical, dim, self)
    }
}

/// Total mass `int beta M / (1 - kappa beta M) dp` of the equilibrium profile.
pub fn mass_of_beta(
    beta: f64,
    statistics: Statistics,
    dim: usize,
    quadrature: &MomentumQuadrature,
) -> Result<f64, EquilibriumError> {
    check_beta(beta, statistics, dim)?;
    let kappa = statistics.kappa();
    match *quadrature {
        MomentumQuadrature::Midpoint { p_max, cells } => {
            if dim != 1 {
                return Err(EquilibriumError::UnsupportedDimension(dim));
            }
            let (nodes, dp) = MomentumQuadrature::midpoint_nodes(p_max, cells);
            Ok(nodes
                .iter()
                .map(|&p| profile_from_maxwellian(beta, kappa, maxwellian_1d(p)))
                .sum::<f64>()
                * dp)
        }
        MomentumQuadrature::Radial => {
            // 1 - kappa beta M written as (1 - c) - c expm1(-r^2/2) with
            // c = kappa beta (2 pi)^(-d/2), which stays accurate near the
            // boson limit c -> 1.
            let norm = (2.0 * PI).powf(-(dim as f64) / 2.0);
            let c = kappa * beta * norm;
            Ok(radial_integral(dim, |r| {
                let x = 0.5 * r * r;
                let denom = (1.0 - c) - c * (-x).exp_m1();
                beta * norm * (-x).exp() / denom
            }))
        }
    }
}

/// Largest mass representable by the given statistics and quadrature, if
/// finite. Fermions are capped by the occupancy bound `f < 1` on a truncated
/// grid; bosons by the limit `beta -> (2 pi)^(d/2)`.
fn mass_ceiling(
    statistics: Statistics,
    dim: usize,
    quadrature: &MomentumQuadrature,
) -> Result<Option<f64>, EquilibriumError> {
    match (statistics, quadrature) {
        (Statistics::Classical, _) => Ok(None),
        (Statistics::Fermi, MomentumQuadrature::Midpoint { p_max, .. }) => Ok(Some(2.0 * p_max)),
        (Statistics::Fermi, MomentumQuadrature::Radial) => Ok(None),
        (Statistics::Bose, MomentumQuadrature::Radial) => {
            let mc = critical_mass(dim);
            Ok(mc.is_finite().then_some(mc))
        }
        (Statistics::Bose, MomentumQuadrature::Midpoint { .. }) => {
            let top = boson_beta_limit(dim) * (1.0 - BOSON_BRACKET_MARGIN);
            Ok(Some(mass_of_beta(top, statistics, dim, quadrature)?))
        }
    }
}

/// Inverse of [`mass_of_beta`]: the `beta` whose profile carries `mass`.
///
/// Returns [`EquilibriumError::NoEquilibrium`] for supercritical bosonic
/// masses (and for fermionic masses beyond the truncated-grid occupancy cap).
pub fn beta_of_mass(
    mass: f64,
    statistics: Statistics,
    dim: usize,
    quadrature: &MomentumQuadrature,
) -> Result<f64, EquilibriumError> {
    beta_of_mass_near(mass, statistics, dim, quadrature, None)
}

/// [`beta_of_mass`] with an optional warm-start guess; the bracket
/// `guess * [0.9, 1.1]` is tried first and the full bracket used if it
/// does not enclose the root.
pub fn beta_of_mass_near(
    mass: f64,
    statistics: Statistics,
    dim: usize,
    quadrature: &MomentumQuadrature,
    guess: Option<f64>,
) -> Result<f64, EquilibriumError> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(EquilibriumError::NonPositiveMass(mass));
    }
    let m_of = |b: f64| mass_of_beta(b, statistics, dim, quadrature);
    let unit = quadrature.maxwellian_mass(dim)?;
    if statistics == Statistics::Classical {
        return Ok(mass / unit);
    }

    if let Some(g) = guess.filter(|g| g.is_finite() && *g > 0.0) {
        let lo = 0.9 * g;
        let mut hi = 1.1 * g;
        if statistics == Statistics::Bose {
            hi = hi.min(boson_beta_limit(dim) * (1.0 - BOSON_BRACKET_MARGIN));
        }
        if lo < hi && m_of(lo)? <= mass && m_of(hi)? >= mass {
            return bisect(mass, lo, hi, m_of);
        }
    }

    if let Some(limit) = mass_ceiling(statistics, dim, quadrature)? {
        if mass >= limit {
            return Err(EquilibriumError::NoEquilibrium { mass, limit });
        }
    }

    let (lo, hi) = match statistics {
        Statistics::Fermi => {
            // mass_of_beta(b) <= b * unit, so the root is at least mass / unit.
            let lo = mass / unit;
            let mut hi = 2.0 * lo;
            while m_of(hi)? < mass {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(EquilibriumError::NoEquilibrium { mass, limit: f64::INFINITY });
                }
            }
            (lo, hi)
        }
        Statistics::Bose => {
            // mass_of_beta(b) >= b * unit.
            let top = boson_beta_limit(dim) * (1.0 - BOSON_BRACKET_MARGIN);
            let hi = (mass / unit).min(top);
            if m_of(hi)? < mass {
                return Err(EquilibriumError::NoEquilibrium {
                    mass,
                    limit: m_of(top)?,
                });
            }
            (1e-12_f64.min(hi * 0.5), hi)
        }
        Statistics::Classical => unreachable!(),
    };
    bisect(mass, lo, hi, m_of)
}

fn bisect<F>(target: f64, mut lo: f64, mut hi: f64, f: F) -> Result<f64, EquilibriumError>
where
    F: Fn(f64) -> Result<f64, EquilibriumError>,
{
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..BISECTION_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let m = f(mid)?;
        if (m - target).abs() <= MASS_RESIDUAL_TOL * target {
            return Ok(mid);
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(mid)
}

/// Critical boson mass per unit torus volume,
/// `int exp(-|p|^2/2) / (1 - exp(-|p|^2/2)) dp`; infinite for `d <= 2`.
pub fn critical_mass(dim: usize) -> f64 {
    if dim <= 2 {
        return f64::INFINITY;
    }
    radial_integral(dim, |r| 1.0 / (0.5 * r * r).exp_m1())
}

/// Surface area of the unit sphere in `R^d`, `2 pi^(d/2) / Gamma(d/2)`.
fn unit_sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim)
}

/// `Gamma(n / 2)` for a positive integer `n`.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        // Gamma(1/2) = sqrt(pi), Gamma(x + 1) = x Gamma(x)
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x + 1e-9 < n as f64 / 2.0 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// `int_{R^d} g(|p|) dp` for a Gaussian-decaying radial integrand.
///
/// Composite Gauss-Legendre on geometrically graded panels, fine near the
/// origin where bosonic profiles can be sharply peaked.
fn radial_integral<G: Fn(f64) -> f64>(dim: usize, g: G) -> f64 {
    let r_max = 12.0 + 2.0 * (dim as f64).sqrt();
    let (nodes, weights) = gauss_legendre(12);
    let mut edges = vec![0.0];
    let mut h = 1e-7;
    let mut r = 0.0;
    while r < r_max {
        r = (r + h).min(r_max);
        edges.push(r);
        h = (h * 1.15).min(0.05);
    }
    let k = dim as i32 - 1;
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut panel = 0.0;
        for (x, wt) in nodes.iter().zip(&weights) {
            let r = mid + half * x;
            panel += wt * r.powi(k) * g(r);
        }
        total += panel * half;
    }
    unit_sphere_area(dim) * total
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
