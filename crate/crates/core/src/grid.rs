//! Phase-space discretisation of `T^1 x [-p_max, p_max]`.
//!
//! Cells are uniform in both directions and all integrals use the
//! cell-centred midpoint rule, so a [`PhaseField`] value is read as a cell
//! average. Fields are stored row-major with `x` as the slow index:
//! `values[ix * np + ip]`, so one `x`-cell's momentum column is contiguous.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::equilibria::{
    ln_maxwellian_1d, maxwellian_1d, profile_from_maxwellian, MomentumQuadrature, Statistics,
};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("fields live on different grids ({0:?} vs {1:?})")]
    Mismatch(GridSpec, GridSpec),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("snapshot parse error at line {line}: {msg}")]
    Snapshot { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    np: usize,
    p_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 64,
            np: 128,
            p_max: 8.0,
        }
    }
}

impl GridSpec {
    pub fn new(nx: usize, np: usize, p_max: f64) -> Result<Self, GridError> {
        if nx < 4 {
            return Err(GridError::Invalid(format!("nx must be at least 4, got {nx}")));
        }
        if np < 8 {
            return Err(GridError::Invalid(format!("np must be at least 8, got {np}")));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(GridError::Invalid(format!("p_max must be positive, got {p_max}")));
        }
        Ok(GridSpec { nx, np, p_max })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * self.p_max / self.np as f64
    }

    pub fn x_center(&self, ix: usize) -> f64 {
        (ix as f64 + 0.5) * self.dx()
    }

    /// `p_j = (j + 1/2 - np/2) dp`: exactly antisymmetric, and `p = 0` is
    /// never a cell centre for even `np`.
    pub fn p_center(&self, ip: usize) -> f64 {
        (ip as f64 + 0.5 - self.np as f64 / 2.0) * self.dp()
    }

    pub fn x_centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x_center(i)).collect()
    }

    pub fn p_centers(&self) -> Vec<f64> {
        (0..self.np).map(|j| self.p_center(j)).collect()
    }

    pub fn maxwellian(&self) -> Vec<f64> {
        (0..self.np).map(|j| maxwellian_1d(self.p_center(j))).collect()
    }

    pub fn ln_maxwellian(&self) -> Vec<f64> {
        (0..self.np).map(|j| ln_maxwellian_1d(self.p_center(j))).collect()
    }

    pub fn momentum_quadrature(&self) -> MomentumQuadrature {
        MomentumQuadrature::Midpoint {
            p_max: self.p_max,
            cells: self.np,
        }
    }

    /// Same domain with both cell counts multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> GridSpec {
        GridSpec {
            nx: self.nx * factor,
            np: self.np * factor,
            p_max: self.p_max,
        }
    }

    pub fn with_np(&self, np: usize) -> Result<GridSpec, GridError> {
        GridSpec::new(self.nx, np, self.p_max)
    }

    #[inline]
    pub fn index(&self, ix: usize, ip: usize) -> usize {
        ix * self.np + ip
    }
}

/// Cell-centred samples of a phase-space density.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl PhaseField {
    pub fn zeros(grid: GridSpec) -> Self {
        PhaseField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(PhaseField { grid, values })
    }

    /// Samples `f(x, p)` at cell centres.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: GridSpec, f: F) -> Self {
        let p = grid.p_centers();
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx {
            let x = grid.x_center(ix);
            values.extend(p.iter().map(|&p| f(x, p)));
        }
        PhaseField { grid, values }
    }

    /// The local equilibrium `beta(x) M / (1 - kappa beta(x) M)`.
    pub fn local_equilibrium<B: Fn(f64) -> f64>(
        grid: GridSpec,
        statistics: Statistics,
        beta: B,
    ) -> Self {
        let kappa = statistics.kappa();
        let m = grid.maxwellian();
        let mut values = Vec::with_capacity(grid.len());
        for ix in 0..grid.nx {
            let b = beta(grid.x_center(ix));
            values.extend(m.iter().map(|&m| profile_from_maxwellian(b, kappa, m)));
        }
        PhaseField { grid, values }
    }

    /// A spatially constant profile with parameter `beta`.
    pub fn equilibrium(grid: GridSpec, statistics: Statistics, beta: f64) -> Self {
        Self::local_equilibrium(grid, statistics, |_| beta)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, ix: usize, ip: usize) -> f64 {
        self.values[self.grid.index(ix, ip)]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, ip: usize, v: f64) {
        let i = self.grid.index(ix, ip);
        self.values[i] = v;
    }

    /// Momentum column at `x`-cell `ix`.
    pub fn column(&self, ix: usize) -> &[f64] {
        let np = self.grid.np;
        &self.values[ix * np..(ix + 1) * np]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.grid.np)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn ensure_same_grid(&self, other: &PhaseField) -> Result<(), GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch(self.grid, other.grid));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &PhaseField, b: f64) -> Result<PhaseField, GridError> {
        self.ensure_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(PhaseField {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, a: f64) -> PhaseField {
        PhaseField {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }
}

/// `sum f dx dp`.
pub fn integrate_phase(field: &PhaseField) -> f64 {
    let g = field.grid();
    field.values.iter().sum::<f64>() * g.dx() * g.dp()
}

/// Weighted distance `sqrt(sum (f - g)^2 / M dx dp)`.
pub fn weighted_l2_distance(f: &PhaseField, g: &PhaseField) -> Result<f64, GridError> {
    f.ensure_same_grid(g)?;
    let grid = f.grid();
    let inv_m: Vec<f64> = grid.maxwellian().iter().map(|m| 1.0 / m).collect();
    let mut sum = 0.0;
    for (cf, cg) in f.columns().zip(g.columns()) {
        for ((a, b), w) in cf.iter().zip(cg).zip(&inv_m) {
            let d = a - b;
            sum += d * d * w;
        }
    }
    Ok((sum * grid.dx() * grid.dp()).sqrt())
}

pub fn weighted_l2_norm(f: &PhaseField) -> f64 {
    weighted_l2_distance(f, &PhaseField::zeros(*f.grid())).expect("same grid")
}

/// `sum |f - g| dx dp`.
pub fn l1_distance(f: &PhaseField, g: &PhaseField) -> Result<f64, GridError> {
    f.ensure_same_grid(g)?;
    let grid = f.grid();
    let s: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(s * grid.dx() * grid.dp())
}

/// Unweighted `sqrt(sum (f - g)^2 dx dp)`.
pub fn l2_distance(f: &PhaseField, g: &PhaseField) -> Result<f64, GridError> {
    f.ensure_same_grid(g)?;
    let grid = f.grid();
    let s: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((s * grid.dx() * grid.dp()).sqrt())
}

/// Writes a snapshot: a header line `nx np p_max t`, then `nx` rows of
/// `np` comma-separated values with 17 significant digits.
pub fn write_snapshot(path: &Path, field: &PhaseField, t: f64) -> Result<(), GridError> {
    fs::write(path, snapshot_to_string(field, t))?;
    Ok(())
}

pub fn snapshot_to_string(field: &PhaseField, t: f64) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(g.len() * 24 + 64);
    let _ = writeln!(out, "{} {} {:.16e} {:.16e}", g.nx, g.np, g.p_max, t);
    for col in field.columns() {
        for (j, v) in col.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn read_snapshot(path: &Path) -> Result<(PhaseField, f64), GridError> {
    parse_snapshot(&fs::read_to_string(path)?)
}

pub fn parse_snapshot(text: &str) -> Result<(PhaseField, f64), GridError> {
    let err = |line: usize, msg: String| GridError::Snapshot { line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty snapshot".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 4 {
        return Err(err(1, format!("header needs `nx np p_max t`, got {header:?}")));
    }
    let nx: usize = head[0].parse().map_err(|e| err(1, format!("nx: {e}")))?;
    let np: usize = head[1].parse().map_err(|e| err(1, format!("np: {e}")))?;
    let p_max: f64 = head[2].parse().map_err(|e| err(1, format!("p_max: {e}")))?;
    let t: f64 = head[3].parse().map_err(|e| err(1, format!("t: {e}")))?;
    let grid = GridSpec::new(nx, np, p_max)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (i, line) in lines {
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| err(i + 1, format!("{tok:?}: {e}")))?;
            values.push(v);
        }
        if values.len() - before != np {
            return Err(err(i + 1, format!("expected {np} columns, got {}", values.len() - before)));
        }
        rows += 1;
    }
    if rows != nx {
        return Err(err(0, format!("expected {nx} rows, got {rows}")));
    }
    Ok((PhaseField::from_values(grid, values)?, t))
}
