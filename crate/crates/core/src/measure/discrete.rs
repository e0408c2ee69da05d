use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Default per-cell / total-mass tolerance.
pub const MASS_TOL: f64 = 1e-10;

/// A real function sampled at the cell centers of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dimension();
        let values = (0..grid.num_cells()).map(|i| f(&grid.center(i)[..d])).collect();
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.num_cells()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &GridFunction, beta: f64) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        Ok(GridFunction { grid: self.grid, values })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A nonnegative (sub)probability measure stored as mass per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    grid: GridSpec,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates nonnegativity and total mass `<= 1 + MASS_TOL`.
    pub fn new(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(grid, weights, MASS_TOL)
    }

    pub fn with_tolerance(grid: GridSpec, weights: Vec<f64>, mass_tol: f64) -> Result<Self> {
        if weights.len() != grid.num_cells() {
            return Err(Error::GridMismatch);
        }
        if let Some((cell, &w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {w} at cell {cell} is not >= 0")));
        }
        let mass: f64 = weights.iter().sum();
        if mass > 1.0 + mass_tol {
            return Err(Error::InvalidMeasure(format!("total mass {mass} exceeds 1")));
        }
        Ok(Self { grid, weights })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(grid: GridSpec, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), grid.num_cells());
        Self { grid, weights }
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self { grid, weights: vec![0.0; grid.num_cells()] }
    }

    /// Unit mass in a single cell.
    pub fn dirac_cell(grid: GridSpec, cell: usize) -> Result<Self> {
        if cell >= grid.num_cells() {
            return Err(Error::InvalidMeasure(format!("cell {cell} out of range")));
        }
        let mut weights = vec![0.0; grid.num_cells()];
        weights[cell] = 1.0;
        Ok(Self { grid, weights })
    }

    /// Unit mass in the cell containing `point`.
    pub fn dirac(grid: GridSpec, point: &[f64]) -> Result<Self> {
        let cell = grid.cell_containing(point).ok_or_else(|| Error::InvalidMeasure(format!("point {point:?} outside the domain")))?;
        Self::dirac_cell(grid, cell)
    }

    /// Isotropic Gaussian with given mean and per-axis variance, integrated over
    /// cells and renormalised to unit mass on the truncated domain.
    pub fn gaussian(grid: GridSpec, mean: &[f64], variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::InvalidMeasure(format!("variance {variance} must be positive")));
        }
        let d = grid.dimension();
        let h = grid.cell_width();
        let sd = variance.sqrt();
        let axis_mass = |k: usize, i: usize| {
            let c = grid.axis_center(i) - mean.get(k).copied().unwrap_or(0.0);
            normal_cdf((c + 0.5 * h) / sd) - normal_cdf((c - 0.5 * h) / sd)
        };
        let mut weights: Vec<f64> = (0..grid.num_cells())
            .map(|idx| {
                let ax = grid.axis_indices(idx);
                (0..d).map(|k| axis_mass(k, ax[k])).product()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("Gaussian has no mass on the grid".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { grid, weights })
    }

    /// Mass `mass / cells.len()` on each listed cell.
    pub fn uniform_on(grid: GridSpec, cells: &[usize], mass: f64) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidMeasure("no cells given".into()));
        }
        let mut weights = vec![0.0; grid.num_cells()];
        for &c in cells {
            if c >= weights.len() {
                return Err(Error::InvalidMeasure(format!("cell {c} out of range")));
            }
            weights[c] += mass / cells.len() as f64;
        }
        Self::new(grid, weights)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Lebesgue density value in a cell (weight / cell volume).
    pub fn density(&self, cell: usize) -> f64 {
        self.weights[cell] / self.grid.cell_volume()
    }

    /// Cells with strictly positive weight.
    pub fn charged_cells(&self) -> Vec<usize> {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect()
    }

    /// `alpha * self + beta * other`; result is validated as a measure.
    pub fn combine(&self, alpha: f64, other: &DiscreteMeasure, beta: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let weights = self.weights.iter().zip(&other.weights).map(|(a, b)| alpha * a + beta * b).collect();
        Self::new(self.grid, weights)
    }

    /// Largest per-cell absolute difference.
    pub fn max_abs_diff(&self, other: &DiscreteMeasure) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.weights.iter().zip(&other.weights).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Mean of each coordinate, normalised by total mass.
    pub fn mean(&self) -> [f64; 2] {
        let mass = self.total_mass();
        let mut m = [0.0; 2];
        for (i, w) in self.weights.iter().enumerate() {
            let c = self.grid.center(i);
            m[0] += w * c[0];
            m[1] += w * c[1];
        }
        [m[0] / mass, m[1] / mass]
    }

    /// Per-axis variance, normalised by total mass.
    pub fn variance(&self) -> [f64; 2] {
        let mass = self.total_mass();
        let mean = self.mean();
        let mut v = [0.0; 2];
        for (i, w) in self.weights.iter().enumerate() {
            let c = self.grid.center(i);
            v[0] += w * (c[0] - mean[0]).powi(2);
            v[1] += w * (c[1] - mean[1]).powi(2);
        }
        [v[0] / mass, v[1] / mass]
    }
}

/// `∫ φ dμ = Σ_i μ_i φ(x_i)`.
pub fn integrate(mu: &DiscreteMeasure, phi: &GridFunction) -> Result<f64> {
    if mu.grid != phi.grid {
        return Err(Error::GridMismatch);
    }
    Ok(dot(&mu.weights, &phi.values))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
