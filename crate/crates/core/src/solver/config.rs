use serde::{Deserialize, Serialize};

use crate::curve::TimeGrid;
use crate::error::Result;
use crate::measure::MASS_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Transitions leaving the domain are removed together with their mass.
    Absorbing,
    /// Transitions leaving the domain are dropped; mass stays.
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepping {
    /// Forward Euler; coefficients frozen at the left node.
    Explicit,
    /// Backward Euler; coefficients frozen at the right node.
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time_step: f64,
    pub boundary: Boundary,
    pub stepping: Stepping,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Explicit steps must satisfy `dt <= cfl_safety * min(h²/(2d sup a), h/sup|b|)`.
    pub cfl_safety: f64,
    pub mass_tol: f64,
    pub cons_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_step: 1.0 / 1024.0,
            boundary: Boundary::Conservative,
            stepping: Stepping::Explicit,
            picard_tol: 1e-9,
            picard_max_iter: 50,
            cfl_safety: 0.5,
            mass_tol: MASS_TOL,
            cons_tol: MASS_TOL,
        }
    }
}

impl SolverConfig {
    pub fn time_grid(&self, start: f64, end: f64) -> Result<TimeGrid> {
        TimeGrid::new(start, end, self.time_step)
    }
}
