use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, GridSpec};

/// Symmetric diffusion matrix; only the leading `d × d` block is meaningful.
pub type Mat2 = [[f64; 2]; 2];
/// Drift vector; only the first `d` entries are meaningful.
pub type Vec2 = [f64; 2];

pub type SpaceTimeMatrix = Arc<dyn Fn(f64, &[f64]) -> Mat2 + Send + Sync>;
pub type SpaceTimeVector = Arc<dyn Fn(f64, &[f64]) -> Vec2 + Send + Sync>;
/// Finite-dimensional summary of a measure on which globally nonlinear
/// coefficients depend.
pub type MeasureFeatures = Arc<dyn Fn(&DiscreteMeasure) -> Vec<f64> + Send + Sync>;
pub type FeatureMatrix = Arc<dyn Fn(f64, &[f64], &[f64]) -> Mat2 + Send + Sync>;
pub type FeatureVector = Arc<dyn Fn(f64, &[f64], &[f64]) -> Vec2 + Send + Sync>;
/// `b̃(t, r, x)` with `r` the density value at `x`.
pub type DensityDrift = Arc<dyn Fn(f64, f64, &[f64]) -> Vec2 + Send + Sync>;

/// How the coefficients depend on the solution.
#[derive(Clone)]
pub enum Dependence {
    Linear {
        diffusion: SpaceTimeMatrix,
        drift: SpaceTimeVector,
    },
    /// `a(t, ζ, x)`, `b(t, ζ, x)` through `features(ζ)`.
    GlobalNonlinear {
        features: MeasureFeatures,
        diffusion: FeatureMatrix,
        drift: FeatureVector,
    },
    /// `a(t, x)`, `b(t, ζ, x) = b̃(t, dζ/dx(x), x)`.
    Nemytskii {
        diffusion: SpaceTimeMatrix,
        drift: DensityDrift,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Linear,
    GlobalNonlinear,
    Nemytskii,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Linear => "linear",
            Mode::GlobalNonlinear => "global-nonlinear",
            Mode::Nemytskii => "nemytskii",
        }
    }
}

/// Declared properties the validators compare against.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMeta {
    /// Declared `sup_{t,x} (|a| + |b|)`; `None` means the field is not claimed
    /// to be globally bounded.
    pub global_bound: Option<f64>,
    /// Declared ellipticity constants `(λ1, λ2)`.
    pub ellipticity: Option<(f64, f64)>,
}

/// Diffusion and drift in one of the three dependence modes.
#[derive(Clone)]
pub struct CoefficientField {
    pub name: String,
    pub dimension: usize,
    pub dependence: Dependence,
    pub meta: CoefficientMeta,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("mode", &self.mode())
            .field("meta", &self.meta)
            .finish()
    }
}

/// Coefficients evaluated at every cell center for one time and one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenCoefficients {
    pub grid: GridSpec,
    pub time: f64,
    pub diffusion: Vec<Mat2>,
    pub drift: Vec<Vec2>,
}

impl FrozenCoefficients {
    /// `max_{i,j} (|a_ij(x)| + |b_i(x)|)` at one cell.
    pub fn local_size(&self, cell: usize) -> f64 {
        let d = self.grid.dimension();
        let a = &self.diffusion[cell];
        let b = &self.drift[cell];
        let mut m = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                m = m.max(a[i][j].abs() + b[i].abs());
            }
        }
        m
    }
}

impl CoefficientField {
    pub fn linear(
        name: impl Into<String>,
        dimension: usize,
        diffusion: impl Fn(f64, &[f64]) -> Mat2 + Send + Sync + 'static,
        drift: impl Fn(f64, &[f64]) -> Vec2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dimension,
            dependence: Dependence::Linear { diffusion: Arc::new(diffusion), drift: Arc::new(drift) },
            meta: CoefficientMeta::default(),
        }
    }

    pub fn global_nonlinear(
        name: impl Into<String>,
        dimension: usize,
        features: impl Fn(&DiscreteMeasure) -> Vec<f64> + Send + Sync + 'static,
        diffusion: impl Fn(f64, &[f64], &[f64]) -> Mat2 + Send + Sync + 'static,
        drift: impl Fn(f64, &[f64], &[f64]) -> Vec2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dimension,
            dependence: Dependence::GlobalNonlinear {
                features: Arc::new(features),
                diffusion: Arc::new(diffusion),
                drift: Arc::new(drift),
            },
            meta: CoefficientMeta::default(),
        }
    }

    pub fn nemytskii(
        name: impl Into<String>,
        dimension: usize,
        diffusion: impl Fn(f64, &[f64]) -> Mat2 + Send + Sync + 'static,
        drift: impl Fn(f64, f64, &[f64]) -> Vec2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dimension,
            dependence: Dependence::Nemytskii { diffusion: Arc::new(diffusion), drift: Arc::new(drift) },
            meta: CoefficientMeta::default(),
        }
    }

    pub fn with_meta(mut self, meta: CoefficientMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn mode(&self) -> Mode {
        match self.dependence {
            Dependence::Linear { .. } => Mode::Linear,
            Dependence::GlobalNonlinear { .. } => Mode::GlobalNonlinear,
            Dependence::Nemytskii { .. } => Mode::Nemytskii,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.mode() == Mode::Linear
    }

    /// Point evaluation; `zeta` is required outside linear mode. In Nemytskii
    /// mode the density value is read from the cell containing `x`.
    pub fn eval(&self, t: f64, zeta: Option<&DiscreteMeasure>, x: &[f64]) -> Result<(Mat2, Vec2)> {
        match &self.dependence {
            Dependence::Linear { diffusion, drift } => Ok((diffusion(t, x), drift(t, x))),
            Dependence::GlobalNonlinear { features, diffusion, drift } => {
                let z = zeta.ok_or(Error::MissingMeasure { mode: self.mode().name() })?;
                let f = features(z);
                Ok((diffusion(t, &f, x), drift(t, &f, x)))
            }
            Dependence::Nemytskii { diffusion, drift } => {
                let z = zeta.ok_or(Error::MissingMeasure { mode: self.mode().name() })?;
                let r = z.grid().cell_containing(x).map_or(0.0, |c| z.density(c));
                Ok((diffusion(t, x), drift(t, r, x)))
            }
        }
    }

    /// Coefficients at every cell center of `grid` for time `t` and measure `zeta`.
    pub fn frozen_at(&self, grid: &GridSpec, t: f64, zeta: Option<&DiscreteMeasure>) -> Result<FrozenCoefficients> {
        if self.dimension != grid.dimension() {
            return Err(Error::DimensionMismatch { field: self.dimension, grid: grid.dimension() });
        }
        if let Some(z) = zeta {
            if z.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        let d = grid.dimension();
        let n = grid.num_cells();
        let mut diffusion = Vec::with_capacity(n);
        let mut drift = Vec::with_capacity(n);
        match &self.dependence {
            Dependence::Linear { diffusion: a, drift: b } => {
                for i in 0..n {
                    let x = grid.center(i);
                    diffusion.push(a(t, &x[..d]));
                    drift.push(b(t, &x[..d]));
                }
            }
            Dependence::GlobalNonlinear { features, diffusion: a, drift: b } => {
                let z = zeta.ok_or(Error::MissingMeasure { mode: self.mode().name() })?;
                let f = features(z);
                for i in 0..n {
                    let x = grid.center(i);
                    diffusion.push(a(t, &f, &x[..d]));
                    drift.push(b(t, &f, &x[..d]));
                }
            }
            Dependence::Nemytskii { diffusion: a, drift: b } => {
                let z = zeta.ok_or(Error::MissingMeasure { mode: self.mode().name() })?;
                for i in 0..n {
                    let x = grid.center(i);
                    diffusion.push(a(t, &x[..d]));
                    drift.push(b(t, z.density(i), &x[..d]));
                }
            }
        }
        Ok(FrozenCoefficients { grid: *grid, time: t, diffusion, drift })
    }
}

pub fn scalar_diffusion(a: f64) -> Mat2 {
    [[a, 0.0], [0.0, a]]
}
