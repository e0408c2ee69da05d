use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::discrete::{DiscreteMeasure, GridFunction};
use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Smallest admissible bump radius, in cells.
const MIN_RADIUS_CELLS: f64 = 2.0;

/// `sup_u |d/du (1-u^2)^3| = 96 / (25 sqrt 5)` at `u = 1/sqrt 5`.
fn profile_first_derivative_sup() -> f64 {
    96.0 / (25.0 * 5f64.sqrt())
}

/// `sup_u |d²/du² (1-u^2)^3| = 6` at `u = 0`.
const PROFILE_SECOND_DERIVATIVE_SUP: f64 = 6.0;

/// One-dimensional C² bump `(1 - u²)³` on `|u| < 1`.
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - u * u;
        s * s * s
    }
}

/// A compactly supported test function `sign * Π_k bump((x_k - c_k) / r_k)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunction {
    pub level: usize,
    pub center: [f64; 2],
    /// Per-axis support radius (unused second entry in 1d).
    pub radius: [f64; 2],
    pub sign: f64,
    /// `(d² + d) max_{i,j} {‖∂_i f‖∞, ‖∂_ij f‖∞}`.
    pub deriv_bound: f64,
    /// `1 + deriv_bound`.
    pub weight: f64,
    values: GridFunction,
    support: Vec<usize>,
}

impl TestFunction {
    fn new(grid: &GridSpec, level: usize, center: [f64; 2], radius: [f64; 2], sign: f64) -> Self {
        let d = grid.dimension();
        let values = GridFunction::from_fn(*grid, |x| sign * (0..d).map(|k| bump_profile((x[k] - center[k]) / radius[k])).product::<f64>());
        let support = values.values().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        let first = |r: f64| profile_first_derivative_sup() / r;
        let second = |r: f64| PROFILE_SECOND_DERIVATIVE_SUP / (r * r);
        let max_partial = if d == 1 {
            first(radius[0]).max(second(radius[0]))
        } else {
            let (r0, r1) = (radius[0], radius[1]);
            first(r0).max(first(r1)).max(second(r0)).max(second(r1)).max(first(r0) * first(r1))
        };
        let deriv_bound = (d * d + d) as f64 * max_partial;
        Self { level, center, radius, sign, deriv_bound, weight: 1.0 + deriv_bound, values, support }
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    /// Cells where the sampled function is nonzero.
    pub fn support_cells(&self) -> &[usize] {
        &self.support
    }

    /// Closed-form value at an arbitrary point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.sign * (0..x.len()).map(|k| bump_profile((x[k] - self.center[k]) / self.radius[k])).product::<f64>()
    }

    /// True when `x` lies in the closed support box `Π_k [c_k - r_k, c_k + r_k]`.
    pub fn in_support(&self, x: &[f64]) -> bool {
        (0..x.len()).all(|k| (x[k] - self.center[k]).abs() <= self.radius[k])
    }

    /// `∫ f dμ`, summing only over the support.
    pub fn integrate(&self, mu: &DiscreteMeasure) -> f64 {
        let w = mu.weights();
        let v = self.values.values();
        self.support.iter().map(|&i| w[i] * v[i]).sum()
    }
}

/// Ordered family of bump test functions at dyadic centers and scales.
///
/// One-dimensional level `k` (0-based) uses radius `L / 2^k` and centers
/// `-L + j L / 2^k`, `j = 1 .. 2^(k+1) - 1`. In 2d the members are tensor
/// products of two such bumps from levels `k1`, `k2`, and the product belongs
/// to level `max(k1, k2)`; mixing scales is what lets the family tell apart
/// cells that mirror each other across the diagonal near a corner.
///
/// Members are ordered by level, then by `(k1, k2)`, then lexicographically by
/// center; with negations each bump is immediately followed by its negative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    grid: GridSpec,
    levels: usize,
    with_negations: bool,
    members: Vec<TestFunction>,
}

impl TestFunctionFamily {
    pub fn build(grid: GridSpec, levels: usize) -> Result<Self> {
        Self::build_with(grid, levels, false)
    }

    /// Family closed under negation (`H = -H`).
    pub fn build_symmetric(grid: GridSpec, levels: usize) -> Result<Self> {
        Self::build_with(grid, levels, true)
    }

    fn build_with(grid: GridSpec, levels: usize, with_negations: bool) -> Result<Self> {
        if levels == 0 {
            return Err(Error::EmptyFamily);
        }
        let l = grid.half_extent();
        let min_radius = MIN_RADIUS_CELLS * grid.cell_width();
        let mut axis_levels = Vec::with_capacity(levels);
        for level in 0..levels {
            let spacing = l / f64::from(1u32 << level);
            if spacing < min_radius {
                return Err(Error::FamilyTooFine { level, radius: spacing, min_radius });
            }
            let centers: Vec<f64> = (1..(2usize << level)).map(|j| -l + j as f64 * spacing).collect();
            axis_levels.push((spacing, centers));
        }
        let mut members = Vec::new();
        let mut push = |level: usize, c: [f64; 2], r: [f64; 2]| {
            members.push(TestFunction::new(&grid, level, c, r, 1.0));
            if with_negations {
                members.push(TestFunction::new(&grid, level, c, r, -1.0));
            }
        };
        for level in 0..levels {
            if grid.dimension() == 1 {
                let (r, centers) = &axis_levels[level];
                for &c in centers {
                    push(level, [c, 0.0], [*r, 0.0]);
                }
                continue;
            }
            for k1 in 0..=level {
                for k2 in 0..=level {
                    if k1.max(k2) != level {
                        continue;
                    }
                    let ((r1, c1s), (r2, c2s)) = (&axis_levels[k1], &axis_levels[k2]);
                    for &c1 in c1s {
                        for &c2 in c2s {
                            push(level, [c1, c2], [*r1, *r2]);
                        }
                    }
                }
            }
        }
        Ok(Self { grid, levels, with_negations, members })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.with_negations
    }

    pub fn members(&self) -> &[TestFunction] {
        &self.members
    }

    pub fn get(&self, l: usize) -> &TestFunction {
        &self.members[l]
    }

    /// Index of `-f_l` when the family is closed under negation.
    pub fn negation_of(&self, l: usize) -> Option<usize> {
        if !self.with_negations || l >= self.members.len() {
            return None;
        }
        Some(if l.is_multiple_of(2) { l + 1 } else { l - 1 })
    }

    /// `(∫ f_l dμ)_l`.
    pub fn moments(&self, mu: &DiscreteMeasure) -> Result<Vec<f64>> {
        if mu.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.members.iter().map(|f| f.integrate(mu)).collect())
    }

    /// `Σ_{l > N} 2^{-l} = 2^{-N}`: what the truncated metric leaves out.
    pub fn truncation_tail(&self) -> f64 {
        0.5f64.powi(self.members.len() as i32)
    }

    /// Stable identifier recorded with every selection result.
    pub fn id(&self) -> String {
        let g = &self.grid;
        let tag = format!(
            "bumps-d{}-L{}-n{}-lv{}{}",
            g.dimension(),
            g.half_extent(),
            g.cells_per_axis(),
            self.levels,
            if self.with_negations { "-sym" } else { "" }
        );
        let digest = Sha256::digest(tag.as_bytes());
        format!("{tag}-{}", &hex::encode(digest)[..8])
    }
}
