use serde::{Deserialize, Serialize};

use super::engine::{select, SelectionConfig};
use crate::curve::sup_distance;
use crate::error::{Error, Result};
use crate::family::CandidateSet;
use crate::measure::{dv_distance, Enumeration, TestFunctionFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeVerdict {
    /// Two enumerations select different curves.
    SelectionsDiffer,
    /// Both enumerations select the same curve (expected for singletons).
    SelectionsCoincide,
    /// No enumerated pair `(h, q)` separates the members.
    Inconclusive,
    /// A distinguishing pair was promoted but the selections still agree.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub verdict: ProbeVerdict,
    pub family_size: usize,
    pub first_enumeration: String,
    pub second_enumeration: String,
    pub first_selection: String,
    pub second_selection: String,
    /// Promoted `(function index, time)`, if any.
    pub promoted: Option<(usize, f64)>,
    /// `d_v` of the two selections at the promoted time.
    pub distance_at_promoted: f64,
    /// `sup_t d_v` of the two selections.
    pub sup_distance: f64,
    pub tolerance: f64,
}

/// Builds a second enumeration from `xi` and compares the two selections.
///
/// For families with at least two members, looks for a member `γ` and an
/// enumerated pair `(h, q)` with `∫h dγ_q - ∫h dμ_q` as large as possible,
/// `μ` being the selection under `xi`, and promotes `(h, q)` to position 0.
/// With `H = -H` such a pair exists whenever `γ_q ≠ μ_q` is seen by some
/// `h`, and the promoted functional then rules `μ` out. Singleton families
/// are compared under `xi` and a reshuffled enumeration instead.
pub fn uniqueness_probe(
    family: &CandidateSet,
    tf: &TestFunctionFamily,
    xi: &Enumeration,
    cfg: &SelectionConfig,
    tol: f64,
) -> Result<UniquenessReport> {
    if !tf.is_symmetric() {
        return Err(Error::InvalidEnumeration("the probe needs a test family closed under negation".into()));
    }
    let first = select(family, tf, xi, cfg)?;
    let mut report = UniquenessReport {
        verdict: ProbeVerdict::Inconclusive,
        family_size: family.len(),
        first_enumeration: xi.id(),
        second_enumeration: xi.id(),
        first_selection: first.label.clone(),
        second_selection: first.label.clone(),
        promoted: None,
        distance_at_promoted: 0.0,
        sup_distance: 0.0,
        tolerance: tol,
    };
    if family.len() == 1 {
        let other = Enumeration::new(xi.num_functions(), xi.times().to_vec(), xi.horizon(), xi.seed().wrapping_add(1))?;
        let second = select(family, tf, &other, cfg)?;
        report.second_enumeration = other.id();
        report.second_selection = second.label.clone();
        report.sup_distance = sup_distance(&first.curve, &second.curve, tf)?;
        report.verdict = if first.curve == second.curve { ProbeVerdict::SelectionsCoincide } else { ProbeVerdict::Failed };
        return Ok(report);
    }
    let mu = &first.curve;
    let mut best: Option<(f64, usize, usize)> = None;
    for (j, &q) in xi.times().iter().enumerate() {
        if q < family.start {
            continue;
        }
        let mu_q = mu.state_at(q)?;
        let base = tf.moments(mu_q)?;
        for (g, gamma) in family.curves.iter().enumerate() {
            if g == first.index {
                continue;
            }
            let m = tf.moments(gamma.state_at(q)?)?;
            for n in 0..xi.num_functions() {
                let gap = m[n] - base[n];
                if best.is_none_or(|(b, _, _)| gap > b) {
                    best = Some((gap, n, j));
                }
            }
        }
    }
    let Some((_, n, j)) = best.filter(|(gap, _, _)| *gap > cfg.tie_tol) else {
        return Ok(report);
    };
    let second_xi = xi.promote(n, j)?;
    let second = select(family, tf, &second_xi, cfg)?;
    let q = xi.times()[j];
    report.second_enumeration = second_xi.id();
    report.second_selection = second.label.clone();
    report.promoted = Some((n, q));
    report.distance_at_promoted = dv_distance(mu.state_at(q)?, second.curve.state_at(q)?, tf)?.value;
    report.sup_distance = sup_distance(mu, &second.curve, tf)?;
    report.verdict = if report.distance_at_promoted > tol { ProbeVerdict::SelectionsDiffer } else { ProbeVerdict::Failed };
    Ok(report)
}
