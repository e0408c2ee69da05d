use serde::{Deserialize, Serialize};

use super::engine::{select, Selection, SelectionConfig};
use crate::error::{Error, Result};
use crate::family::FamilyGenerator;
use crate::measure::{dv_distance, DiscreteMeasure, Enumeration, TestFunctionFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedEntry {
    pub start: f64,
    pub initial: DiscreteMeasure,
    pub selection: Selection,
}

/// Selected curves `μ^{s,ν}` for sampled initial conditions, with the
/// choices that determine them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFlow {
    pub entries: Vec<SelectedEntry>,
    pub test_family_id: String,
    pub enumeration_id: String,
    pub tie_tol: f64,
}

impl SelectedFlow {
    pub fn get(&self, s: f64, nu: &DiscreteMeasure) -> Option<&SelectedEntry> {
        self.entries.iter().find(|e| e.start == s && &e.initial == nu)
    }
}

/// Runs the selection at every `(s, ν)` of `initials` over the generated families.
pub fn select_flow(
    generator: &dyn FamilyGenerator,
    initials: &[(f64, DiscreteMeasure)],
    tf: &TestFunctionFamily,
    xi: &Enumeration,
    cfg: &SelectionConfig,
) -> Result<SelectedFlow> {
    let mut entries = Vec::with_capacity(initials.len());
    for (s, nu) in initials {
        let family = generator.generate(*s, nu)?;
        let selection = select(&family, tf, xi, cfg)?;
        entries.push(SelectedEntry { start: *s, initial: nu.clone(), selection });
    }
    Ok(SelectedFlow { entries, test_family_id: tf.id(), enumeration_id: xi.id(), tie_tol: cfg.tie_tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCheck {
    pub s: f64,
    pub r: f64,
    pub t: f64,
    pub distance: f64,
    pub selected: String,
    pub reselected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPropertyReport {
    pub checks: Vec<FlowCheck>,
    pub max_distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// For each entry `(s, ν)` and restart node `r ∈ (s, T)`, reselects at
/// `(r, μ^{s,ν}_r)` over the regenerated family and compares with
/// `μ^{s,ν}_t` at every later node `t`.
pub fn verify_flow_property(
    flow: &SelectedFlow,
    generator: &dyn FamilyGenerator,
    tf: &TestFunctionFamily,
    xi: &Enumeration,
    cfg: &SelectionConfig,
    restarts: &[f64],
    tol: f64,
) -> Result<FlowPropertyReport> {
    let mut checks = Vec::new();
    for e in &flow.entries {
        let mu = &e.selection.curve;
        for &r in restarts {
            if r <= e.start || r >= mu.end() {
                continue;
            }
            let mu_r = mu.state_at(r)?;
            let family = generator.generate(r, mu_r)?;
            if family.is_empty() {
                return Err(Error::Inadmissible(format!("restart family at r = {r} is empty")));
            }
            let again = select(&family, tf, xi, cfg)?;
            for (&t, state) in mu.times().iter().zip(mu.states()) {
                if t <= r {
                    continue;
                }
                let d = dv_distance(state, again.curve.state_at(t)?, tf)?.value;
                checks.push(FlowCheck {
                    s: e.start,
                    r,
                    t,
                    distance: d,
                    selected: e.selection.label.clone(),
                    reselected: again.label.clone(),
                });
            }
        }
    }
    let max_distance = checks.iter().map(|c| c.distance).fold(0.0, f64::max);
    Ok(FlowPropertyReport { passed: max_distance <= tol, checks, max_distance, tolerance: tol })
}
