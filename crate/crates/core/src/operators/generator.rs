use super::coefficients::{CoefficientField, FrozenCoefficients};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, GridFunction};

/// `L_{t,ζ} φ = a_ij ∂_ij φ + b_i ∂_i φ` by central differences at interior
/// cells; boundary cells get 0.
pub fn apply_generator(c: &CoefficientField, t: f64, zeta: Option<&DiscreteMeasure>, phi: &GridFunction) -> Result<GridFunction> {
    let frozen = c.frozen_at(phi.grid(), t, zeta)?;
    apply_frozen(&frozen, phi)
}

/// Generator with coefficients already evaluated on the grid.
pub fn apply_frozen(frozen: &FrozenCoefficients, phi: &GridFunction) -> Result<GridFunction> {
    let grid = *phi.grid();
    if frozen.grid != grid {
        return Err(Error::GridMismatch);
    }
    let h = grid.cell_width();
    let v = phi.values();
    let d = grid.dimension();
    let at = |i: usize, o: [i64; 2]| v[grid.neighbor(i, o).expect("interior cell")];
    let out = (0..grid.num_cells())
        .map(|i| {
            if grid.is_boundary(i) {
                return 0.0;
            }
            let a = &frozen.diffusion[i];
            let b = &frozen.drift[i];
            let mut acc = 0.0;
            for k in 0..d {
                let mut e = [0i64; 2];
                e[k] = 1;
                let plus = at(i, e);
                let minus = at(i, [-e[0], -e[1]]);
                acc += a[k][k] * (plus - 2.0 * v[i] + minus) / (h * h);
                acc += b[k] * (plus - minus) / (2.0 * h);
            }
            if d == 2 {
                let cross = (at(i, [1, 1]) - at(i, [1, -1]) - at(i, [-1, 1]) + at(i, [-1, -1])) / (4.0 * h * h);
                acc += (a[0][1] + a[1][0]) * cross;
            }
            acc
        })
        .collect();
    GridFunction::new(grid, out)
}
