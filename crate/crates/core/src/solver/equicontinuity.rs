use serde::{Deserialize, Serialize};

use super::config::Stepping;
use super::freeze_index;
use crate::curve::MeasureCurve;
use crate::error::Result;
use crate::measure::{dv_from_moments, TestFunctionFamily};
use crate::operators::CoefficientField;

/// Comparison of `d_v(μ_{t1}, μ_{t2})` with
/// `Σ_l 2^{-l} min(∫_{t1}^{t2} max_{i,j} sup_{K_l} (|a_ij| + |b_i|) dt, 1)`
/// over all node pairs, `K_l` being the support of `f_l` widened by one cell
/// (the reach of the difference stencil).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityReport {
    pub pairs_checked: usize,
    /// `max (lhs - rhs)` over all pairs; `<= slack` means the bound holds.
    pub max_excess: f64,
    pub worst_pair: (f64, f64),
    /// Smallest ratio `rhs / lhs` seen where `lhs > 0`, a measure of tightness.
    pub min_ratio: f64,
    pub slack: f64,
    pub passed: bool,
}

pub fn equicontinuity_check(
    curve: &MeasureCurve,
    c: &CoefficientField,
    family: &TestFunctionFamily,
    stepping: Stepping,
    slack: f64,
) -> Result<EquicontinuityReport> {
    let grid = *curve.grid();
    let n = curve.len();
    let dilated: Vec<Vec<usize>> = family
        .members()
        .iter()
        .map(|f| {
            let mut cells: Vec<usize> = Vec::new();
            for &i in f.support_cells() {
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        if grid.dimension() == 1 && dy != 0 {
                            continue;
                        }
                        if let Some(j) = grid.neighbor(i, [dx, dy]) {
                            cells.push(j);
                        }
                    }
                }
            }
            cells.sort_unstable();
            cells.dedup();
            cells
        })
        .collect();
    // prefix[l][k] = Σ_{steps j < k} dt_j sup_{K_l} size_j
    let mut prefix = vec![vec![0.0; n]; family.len()];
    let linear = c.is_linear();
    for k in 0..n - 1 {
        let j = freeze_index(k, stepping);
        let zeta = if linear { None } else { Some(&curve.states()[j]) };
        let frozen = c.frozen_at(&grid, curve.times()[j], zeta)?;
        let dt = curve.times()[k + 1] - curve.times()[k];
        for (l, cells) in dilated.iter().enumerate() {
            let sup = cells.iter().map(|&i| frozen.local_size(i)).fold(0.0, f64::max);
            prefix[l][k + 1] = prefix[l][k] + dt * sup;
        }
    }
    let moments: Vec<Vec<f64>> = curve.states().iter().map(|s| family.moments(s)).collect::<Result<_>>()?;
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_pair = (curve.start(), curve.start());
    let mut min_ratio = f64::INFINITY;
    let mut pairs = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            let lhs = dv_from_moments(&moments[a], &moments[b], family);
            let mut scale = 1.0;
            let mut rhs = 0.0;
            for p in &prefix {
                scale *= 0.5;
                rhs += scale * (p[b] - p[a]).min(1.0);
            }
            pairs += 1;
            if lhs - rhs > max_excess {
                max_excess = lhs - rhs;
                worst_pair = (curve.times()[a], curve.times()[b]);
            }
            if lhs > 0.0 {
                min_ratio = min_ratio.min(rhs / lhs);
            }
        }
    }
    Ok(EquicontinuityReport { pairs_checked: pairs, max_excess, worst_pair, min_ratio, slack, passed: max_excess <= slack })
}
