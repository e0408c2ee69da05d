use serde::{Deserialize, Serialize};

use super::generator::{CandidateSet, FamilyGenerator};
use crate::curve::{sup_distance, MeasureCurve};
use crate::error::Result;
use crate::measure::{DiscreteMeasure, TestFunctionFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityViolation {
    /// `"restriction"` or `"concatenation"`.
    pub property: String,
    pub start: f64,
    pub restart: f64,
    pub member: String,
    pub continuation: Option<String>,
    /// Distance to the closest member of the family that should contain it.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub generator: String,
    pub restriction_checks: usize,
    pub concatenation_checks: usize,
    pub violations: Vec<AdmissibilityViolation>,
    pub tolerance: f64,
    pub passed: bool,
}

fn closest(curve: &MeasureCurve, family: &CandidateSet, tf: &TestFunctionFamily) -> Result<f64> {
    let mut best = f64::INFINITY;
    for c in &family.curves {
        best = best.min(sup_distance(curve, c, tf)?);
    }
    Ok(best)
}

/// Checks stability of the generated families under restriction and
/// concatenation at every `(s, ν)` in `initials` and every restart node `r`
/// strictly inside `(s, T)`:
/// (a) `μ|_[r,T]` lies in the family at `(r, μ_r)`;
/// (b) `μ ∘_r η` lies in the family at `(s, ν)` for every `η` of the family at `(r, μ_r)`.
/// Membership means sup-in-time `d_v` distance at most `tol` to some member.
pub fn check_flow_admissible(
    generator: &dyn FamilyGenerator,
    initials: &[(f64, DiscreteMeasure)],
    restarts: &[f64],
    tf: &TestFunctionFamily,
    tol: f64,
) -> Result<AdmissibilityReport> {
    let mut violations = Vec::new();
    let (mut n_a, mut n_b) = (0, 0);
    for (s, nu) in initials {
        let family = generator.generate(*s, nu)?;
        for (mu, label) in family.curves.iter().zip(&family.labels) {
            for &r in restarts {
                if r <= *s || r >= mu.end() {
                    continue;
                }
                let mu_r = mu.state_at(r)?;
                let tail_family = generator.generate(r, mu_r)?;
                let tail = mu.restrict(r)?;
                n_a += 1;
                let d = closest(&tail, &tail_family, tf)?;
                if d > tol {
                    violations.push(AdmissibilityViolation {
                        property: "restriction".into(),
                        start: *s,
                        restart: r,
                        member: label.clone(),
                        continuation: None,
                        distance: d,
                    });
                }
                for (eta, eta_label) in tail_family.curves.iter().zip(&tail_family.labels) {
                    let spliced = mu.concatenate(eta, r)?;
                    n_b += 1;
                    let d = closest(&spliced, &family, tf)?;
                    if d > tol {
                        violations.push(AdmissibilityViolation {
                            property: "concatenation".into(),
                            start: *s,
                            restart: r,
                            member: label.clone(),
                            continuation: Some(eta_label.clone()),
                            distance: d,
                        });
                    }
                }
            }
        }
    }
    Ok(AdmissibilityReport {
        generator: generator.id(),
        restriction_checks: n_a,
        concatenation_checks: n_b,
        passed: violations.is_empty(),
        violations,
        tolerance: tol,
    })
}
