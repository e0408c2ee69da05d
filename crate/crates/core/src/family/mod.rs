//! Finite candidate families of solution curves, their generators, and the
//! restriction/concatenation admissibility checks.

mod admissible;
mod branching;
mod generator;

pub use admissible::{check_flow_admissible, AdmissibilityReport, AdmissibilityViolation};
pub use branching::BranchingTransport;
pub use generator::{CandidateSet, FamilyGenerator, FamilyKind, SolverGenerator};

use crate::curve::MeasureCurve;
use crate::error::Result;

/// `(μ ∘_r η)`: `μ` up to and including `r`, `η` afterwards.
pub fn concatenate(mu: &MeasureCurve, eta: &MeasureCurve, r: f64) -> Result<MeasureCurve> {
    mu.concatenate(eta, r)
}

/// `μ` on `[r, T]` with initial datum `μ_r`.
pub fn restrict(mu: &MeasureCurve, r: f64) -> Result<MeasureCurve> {
    mu.restrict(r)
}
