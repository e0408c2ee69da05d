use serde::{Deserialize, Serialize};

use super::discrete::DiscreteMeasure;
use super::test_family::TestFunctionFamily;
use crate::error::{Error, Result};

/// Truncated vague distance together with the weight of the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvDistance {
    pub value: f64,
    /// Upper bound `Σ_{l > N} 2^{-l}` on the contribution of the dropped terms.
    pub truncation_tail: f64,
}

/// `Σ_l 2^{-l} C_l^{-1} min(|∫f_l dμ1 - ∫f_l dμ2|, 1)`, with `l` counted from 1.
pub fn dv_distance(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, family: &TestFunctionFamily) -> Result<DvDistance> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let m1 = family.moments(mu1)?;
    let m2 = family.moments(mu2)?;
    Ok(DvDistance { value: dv_from_moments(&m1, &m2, family), truncation_tail: family.truncation_tail() })
}

/// Same sum evaluated on precomputed moment vectors.
pub fn dv_from_moments(m1: &[f64], m2: &[f64], family: &TestFunctionFamily) -> f64 {
    let mut scale = 1.0;
    let mut acc = 0.0;
    for ((a, b), f) in m1.iter().zip(m2).zip(family.members()) {
        scale *= 0.5;
        acc += scale * (a - b).abs().min(1.0) / f.weight;
    }
    acc
}
