use serde::{Deserialize, Serialize};

use crate::curve::MeasureCurve;
use crate::error::{Error, Result};
use crate::family::CandidateSet;
use crate::measure::{Enumeration, TestFunctionFamily};
use crate::par::{map_slice, Exec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Members within `tie_tol` of the maximum survive a step.
    pub tie_tol: f64,
    /// Keep iterating until at least this many steps are recorded, even after
    /// a single survivor remains.
    pub min_trace_len: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { tie_tol: 1e-9, min_trace_len: 1, exec: Exec::Parallel }
    }
}

/// One maximisation step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    /// Position `m^s_k` in the enumeration.
    pub position: usize,
    pub function: usize,
    pub time: f64,
    /// `u_k = max_{γ ∈ M_{k-1}} G_k(γ)`.
    pub value: f64,
    /// Members of `M_k`, as indices into the family.
    pub survivors: Vec<usize>,
    /// `G_k` of every member of `M_{k-1}`, aligned with `evaluated`.
    pub values: Vec<f64>,
    pub evaluated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub records: Vec<TraceRecord>,
    pub tie_tol: f64,
    /// Set when the enumeration ran out with more than one survivor; the
    /// first survivor in family order is returned.
    pub unresolved_ties: bool,
}

impl SelectionTrace {
    pub fn survivor_counts(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.survivors.len()).collect()
    }

    /// `M_{k+1} ⊆ M_k` for all recorded steps.
    pub fn is_nested(&self) -> bool {
        self.records.windows(2).all(|w| w[1].survivors.iter().all(|i| w[0].survivors.contains(i)))
    }

    /// `G_k(selected) >= G_k(γ) - tie_tol` for every `γ` evaluated at step `k`.
    pub fn is_maximal_for(&self, selected: usize) -> bool {
        self.records.iter().all(|r| match r.evaluated.iter().position(|&i| i == selected) {
            Some(p) => r.values.iter().all(|&v| r.values[p] >= v - self.tie_tol),
            None => false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub label: String,
    pub curve: MeasureCurve,
    pub trace: SelectionTrace,
}

/// Runs `G_k(μ) = ∫ f_{n_k} dμ_{q_k}` over the enumeration positions with
/// `q_k >= s`, keeping the members within `tie_tol` of the maximum.
pub fn select(family: &CandidateSet, tf: &TestFunctionFamily, xi: &Enumeration, cfg: &SelectionConfig) -> Result<Selection> {
    if family.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    if xi.num_functions() > tf.len() {
        return Err(Error::InvalidEnumeration(format!("enumeration indexes {} functions, family has {}", xi.num_functions(), tf.len())));
    }
    let positions = xi.subsequence(family.start)?;
    let mut survivors: Vec<usize> = (0..family.len()).collect();
    let mut records = Vec::new();
    for (k, &pos) in positions.iter().enumerate() {
        if survivors.len() == 1 && records.len() >= cfg.min_trace_len {
            break;
        }
        let (n, q) = xi.pair_time(pos);
        let f = tf.get(n);
        let values: Vec<f64> = map_slice(&survivors, cfg.exec, |&i| family.curves[i].state_at(q).map(|mu| f.integrate(mu)))
            .into_iter()
            .collect::<Result<_>>()?;
        let u = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let evaluated = survivors.clone();
        survivors = evaluated.iter().zip(&values).filter(|(_, &v)| v >= u - cfg.tie_tol).map(|(&i, _)| i).collect();
        records.push(TraceRecord { k, position: pos, function: n, time: q, value: u, survivors: survivors.clone(), values, evaluated });
    }
    let index = survivors[0];
    Ok(Selection {
        index,
        label: family.labels[index].clone(),
        curve: family.curves[index].clone(),
        trace: SelectionTrace { records, tie_tol: cfg.tie_tol, unresolved_ties: survivors.len() > 1 },
    })
}
