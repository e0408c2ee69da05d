use serde::{Deserialize, Serialize};

use crate::curve::{MeasureCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, TestFunctionFamily};
use crate::operators::{CoefficientField, Mode};
use crate::solver::{solve_linear, solve_nonlinear_fixed_point, Boundary, SolverConfig};

/// Which class of solutions a family is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Subprobability,
    Probability,
    AbsolutelyContinuous,
}

/// A finite set of solution curves sharing the initial condition `(s, ν)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub start: f64,
    pub initial: DiscreteMeasure,
    pub curves: Vec<MeasureCurve>,
    /// Human-readable tag per curve, e.g. `release@0.25`.
    pub labels: Vec<String>,
    pub generator_id: String,
    pub kind: FamilyKind,
}

impl CandidateSet {
    pub fn new(
        start: f64,
        initial: DiscreteMeasure,
        curves: Vec<MeasureCurve>,
        labels: Vec<String>,
        generator_id: String,
        kind: FamilyKind,
    ) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::EmptyCandidateSet);
        }
        if labels.len() != curves.len() {
            return Err(Error::InvalidMeasure(format!("{} labels for {} curves", labels.len(), curves.len())));
        }
        for c in &curves {
            if (c.start() - start).abs() > crate::curve::NODE_TOL {
                return Err(Error::InvalidTimeGrid(format!("member starts at {}, family at {start}", c.start())));
            }
            if c.initial().max_abs_diff(&initial)? > crate::measure::MASS_TOL {
                return Err(Error::Inadmissible("member does not start from the family's initial datum".into()));
            }
        }
        Ok(Self { start, initial, curves, labels, generator_id, kind })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Copy without the members at `indices`; used to build deliberately
    /// incomplete families.
    pub fn without(&self, indices: &[usize]) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|i| !indices.contains(i)).collect();
        Self::new(
            self.start,
            self.initial.clone(),
            keep.iter().map(|&i| self.curves[i].clone()).collect(),
            keep.iter().map(|&i| self.labels[i].clone()).collect(),
            format!("{}-without{indices:?}", self.generator_id),
            self.kind,
        )
    }
}

/// A deterministic rule producing the family at any admissible `(s, ν)`.
pub trait FamilyGenerator: Send + Sync {
    fn id(&self) -> String;
    /// Parameters recorded with every family this generator produces.
    fn parameters(&self) -> serde_json::Value;
    fn horizon(&self) -> f64;
    /// Time nodes all members live on.
    fn time_grid(&self) -> TimeGrid;
    fn generate(&self, s: f64, nu: &DiscreteMeasure) -> Result<CandidateSet>;
}

/// Singleton families: the solver's solution from `(s, ν)`.
pub struct SolverGenerator {
    pub coefficients: CoefficientField,
    pub config: SolverConfig,
    pub time_grid: TimeGrid,
    /// Test family used for the Picard stopping rule in nonlinear modes.
    pub picard_family: Option<TestFunctionFamily>,
}

impl FamilyGenerator for SolverGenerator {
    fn id(&self) -> String {
        format!("solver:{}", self.coefficients.name)
    }

    fn parameters(&self) -> serde_json::Value {
        serde_json::json!({
            "coefficients": self.coefficients.name,
            "mode": self.coefficients.mode(),
            "config": self.config,
            "time_grid": self.time_grid,
        })
    }

    fn horizon(&self) -> f64 {
        self.time_grid.end()
    }

    fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }

    fn generate(&self, s: f64, nu: &DiscreteMeasure) -> Result<CandidateSet> {
        let tg = self.time_grid.restricted(s)?;
        let curve = match self.coefficients.mode() {
            Mode::Linear => solve_linear(&self.coefficients, nu, &tg, &self.config)?,
            _ => {
                let family =
                    self.picard_family.as_ref().ok_or_else(|| Error::Scenario("nonlinear solver family needs a test family".into()))?;
                solve_nonlinear_fixed_point(&self.coefficients, nu, &tg, &self.config, family)?.0
            }
        };
        let kind = match (self.coefficients.mode(), self.config.boundary) {
            (Mode::Nemytskii, _) => FamilyKind::AbsolutelyContinuous,
            (_, Boundary::Conservative) if (nu.total_mass() - 1.0).abs() <= self.config.cons_tol => FamilyKind::Probability,
            _ => FamilyKind::Subprobability,
        };
        CandidateSet::new(s, nu.clone(), vec![curve], vec!["solution".into()], self.id(), kind)
    }
}
