use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centred grid on `[-L, L]^d`, `d` in {1, 2}.
///
/// Cells are indexed row-major: in 2d the flat index of `(ix, iy)` is
/// `ix * n + iy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dimension: usize,
    half_extent: f64,
    cells_per_axis: usize,
}

impl GridSpec {
    pub fn new(dimension: usize, half_extent: f64, cells_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::InvalidGrid(format!("dimension {dimension} not in {{1, 2}}")));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::InvalidGrid(format!("half extent {half_extent} must be positive")));
        }
        if cells_per_axis < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells per axis, got {cells_per_axis}")));
        }
        Ok(Self { dimension, half_extent, cells_per_axis })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_extent / self.cells_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dimension as i32)
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dimension as u32)
    }

    /// Center of cell `i` along one axis.
    pub fn axis_center(&self, i: usize) -> f64 {
        -self.half_extent + (i as f64 + 0.5) * self.cell_width()
    }

    /// Per-axis indices of a flat cell index (unused axes are 0).
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        match self.dimension {
            1 => [idx, 0],
            _ => [idx / self.cells_per_axis, idx % self.cells_per_axis],
        }
    }

    pub fn flat_index(&self, axes: [usize; 2]) -> usize {
        match self.dimension {
            1 => axes[0],
            _ => axes[0] * self.cells_per_axis + axes[1],
        }
    }

    /// Cell center as a point; only the first `dimension` coordinates are meaningful.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.axis_indices(idx);
        match self.dimension {
            1 => [self.axis_center(i), 0.0],
            _ => [self.axis_center(i), self.axis_center(j)],
        }
    }

    /// Euclidean norm of the cell center.
    pub fn center_radius(&self, idx: usize) -> f64 {
        let c = self.center(idx);
        c[..self.dimension].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Neighbor of `idx` shifted by `offset` cells per axis, `None` outside the domain.
    pub fn neighbor(&self, idx: usize, offset: [i64; 2]) -> Option<usize> {
        let axes = self.axis_indices(idx);
        let n = self.cells_per_axis as i64;
        let mut out = [0usize; 2];
        for k in 0..self.dimension {
            let v = axes[k] as i64 + offset[k];
            if v < 0 || v >= n {
                return None;
            }
            out[k] = v as usize;
        }
        if self.dimension == 1 && offset[1] != 0 {
            return None;
        }
        Some(self.flat_index(out))
    }

    /// True when the cell touches the domain boundary.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let axes = self.axis_indices(idx);
        let last = self.cells_per_axis - 1;
        axes[..self.dimension].iter().any(|&a| a == 0 || a == last)
    }

    /// Cell containing `point` (half-open cells `[a, b)`, the last cell closed),
    /// `None` outside `[-L, L]^d`.
    pub fn cell_containing(&self, point: &[f64]) -> Option<usize> {
        let mut axes = [0usize; 2];
        for (k, axis) in axes.iter_mut().enumerate().take(self.dimension) {
            let x = point.get(k).copied().unwrap_or(0.0);
            if !(x >= -self.half_extent && x <= self.half_extent) {
                return None;
            }
            let i = ((x + self.half_extent) / self.cell_width()).floor() as usize;
            *axis = i.min(self.cells_per_axis - 1);
        }
        Some(self.flat_index(axes))
    }

    /// Largest distance from the origin of any cell center.
    pub fn max_center_radius(&self) -> f64 {
        let edge = self.half_extent - 0.5 * self.cell_width();
        edge * (self.dimension as f64).sqrt()
    }
}
