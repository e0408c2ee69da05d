//! Markov-jump finite-volume discretisation of the forward equation.
//!
//! The generator is approximated by a rate matrix `Q` on the cells: central
//! rates `a/h² ± b/(2h)` along each axis when both are nonnegative, upwind
//! rates otherwise, and a positive seven-point stencil for the mixed term.
//! Measures evolve by `m ← m + dt Qᵀ m` (explicit) or `(I - dt Qᵀ) m_new = m`
//! (implicit); both keep weights nonnegative and move mass only between
//! cells, so conservation and positivity are structural.

use super::config::{Boundary, SolverConfig, Stepping};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, GridSpec};
use crate::operators::FrozenCoefficients;

/// Outgoing jumps of one cell; `None` marks a jump out of the domain.
#[derive(Debug, Clone, Default)]
pub(crate) struct CellRates {
    pub jumps: Vec<(Option<usize>, f64)>,
}

impl CellRates {
    fn push(&mut self, target: Option<usize>, rate: f64) {
        if rate > 0.0 {
            self.jumps.push((target, rate));
        }
    }

    /// Total rate counted against the cell under `boundary`.
    pub fn outflow(&self, boundary: Boundary) -> f64 {
        self.jumps.iter().filter(|(t, _)| t.is_some() || boundary == Boundary::Absorbing).map(|(_, r)| r).sum()
    }
}

pub(crate) fn assemble_rates(frozen: &FrozenCoefficients) -> Result<Vec<CellRates>> {
    let grid = &frozen.grid;
    let h = grid.cell_width();
    let d = grid.dimension();
    let mut out = Vec::with_capacity(grid.num_cells());
    for i in 0..grid.num_cells() {
        let a = &frozen.diffusion[i];
        let b = &frozen.drift[i];
        let cross = if d == 2 { 0.5 * (a[0][1] + a[1][0]) } else { 0.0 };
        let mut rates = CellRates::default();
        for k in 0..d {
            let diag = a[k][k] - cross.abs();
            if diag < -1e-14 * a[k][k].abs().max(1.0) {
                return Err(Error::InvalidCoefficients(format!(
                    "cell {i}: |a12| = {} exceeds a{k}{k} = {}, mixed stencil not positive",
                    cross.abs(),
                    a[k][k]
                )));
            }
            let diag = diag.max(0.0);
            let diff = diag / (h * h);
            let half = b[k] / (2.0 * h);
            let (up, down) =
                if diff >= half.abs() { (diff + half, diff - half) } else { (diff + b[k].max(0.0) / h, diff + (-b[k]).max(0.0) / h) };
            let mut e = [0i64; 2];
            e[k] = 1;
            rates.push(grid.neighbor(i, e), up);
            rates.push(grid.neighbor(i, [-e[0], -e[1]]), down);
        }
        if cross != 0.0 {
            let r = cross.abs() / (h * h);
            let s = if cross > 0.0 { 1 } else { -1 };
            rates.push(grid.neighbor(i, [1, s]), r);
            rates.push(grid.neighbor(i, [-1, -s]), r);
        }
        out.push(rates);
    }
    Ok(out)
}

/// Largest stable explicit step for these rates.
pub(crate) fn explicit_limit(rates: &[CellRates], boundary: Boundary) -> f64 {
    let m = rates.iter().map(|r| r.outflow(boundary)).fold(0.0, f64::max);
    if m > 0.0 {
        1.0 / m
    } else {
        f64::INFINITY
    }
}

/// `cfl_safety * min(h²/(2d sup a), h/sup|b|)` for the frozen coefficients.
pub fn cfl_limit(frozen: &FrozenCoefficients, cfl_safety: f64) -> f64 {
    let grid = &frozen.grid;
    let d = grid.dimension();
    let h = grid.cell_width();
    let mut sup_a = 0.0f64;
    let mut sup_b = 0.0f64;
    for i in 0..grid.num_cells() {
        for k in 0..d {
            sup_a = sup_a.max(frozen.diffusion[i][k][k].abs());
            sup_b = sup_b.max(frozen.drift[i][k].abs());
        }
    }
    let da = if sup_a > 0.0 { h * h / (2.0 * d as f64 * sup_a) } else { f64::INFINITY };
    let db = if sup_b > 0.0 { h / sup_b } else { f64::INFINITY };
    cfl_safety * da.min(db)
}

fn finish(grid: GridSpec, mut w: Vec<f64>, tol: f64) -> Result<DiscreteMeasure> {
    for (cell, v) in w.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::NegativeWeight { cell, value: *v });
            }
            *v = 0.0;
        }
    }
    DiscreteMeasure::with_tolerance(grid, w, tol)
}

/// One step with coefficients already evaluated on the grid.
pub fn step_frozen(frozen: &FrozenCoefficients, mu: &DiscreteMeasure, dt: f64, cfg: &SolverConfig) -> Result<DiscreteMeasure> {
    if mu.grid() != &frozen.grid {
        return Err(Error::GridMismatch);
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeGrid(format!("time step {dt} must be positive")));
    }
    let rates = assemble_rates(frozen)?;
    match cfg.stepping {
        Stepping::Explicit => {
            let limit = explicit_limit(&rates, cfg.boundary).min(cfl_limit(frozen, cfg.cfl_safety));
            if dt > limit * (1.0 + 1e-12) {
                return Err(Error::CflViolation { dt, limit });
            }
            Ok(explicit_step(&rates, mu, dt, cfg))
        }
        Stepping::Implicit => implicit_step(&rates, mu, dt, cfg),
    }
}

fn explicit_step(rates: &[CellRates], mu: &DiscreteMeasure, dt: f64, cfg: &SolverConfig) -> DiscreteMeasure {
    let m = mu.weights();
    let mut out = vec![0.0; m.len()];
    for (i, r) in rates.iter().enumerate() {
        if m[i] == 0.0 {
            continue;
        }
        let keep = (1.0 - dt * r.outflow(cfg.boundary)).max(0.0);
        out[i] += m[i] * keep;
        for &(t, rate) in &r.jumps {
            if let Some(j) = t {
                out[j] += m[i] * dt * rate;
            }
        }
    }
    DiscreteMeasure::from_raw(*mu.grid(), out)
}

/// Banded `I - dt Qᵀ`, factorised without pivoting: the matrix is strictly
/// column diagonally dominant, so the elimination is stable.
fn implicit_step(rates: &[CellRates], mu: &DiscreteMeasure, dt: f64, cfg: &SolverConfig) -> Result<DiscreteMeasure> {
    let grid = *mu.grid();
    let n = grid.num_cells();
    let bw = if grid.dimension() == 1 { 1 } else { grid.cells_per_axis() + 1 };
    let width = 2 * bw + 1;
    // band[r * width + (c + bw - r)] holds A[r][c].
    let mut band = vec![0.0; n * width];
    for (i, r) in rates.iter().enumerate() {
        band[i * width + bw] += 1.0 + dt * r.outflow(cfg.boundary);
        for &(t, rate) in &r.jumps {
            if let Some(j) = t {
                band[j * width + (i + bw - j)] -= dt * rate;
            }
        }
    }
    let mut x = mu.weights().to_vec();
    for k in 0..n {
        let pivot = band[k * width + bw];
        let last = (k + bw).min(n - 1);
        for r in (k + 1)..=last {
            let lk = band[r * width + (k + bw - r)];
            if lk == 0.0 {
                continue;
            }
            let f = lk / pivot;
            band[r * width + (k + bw - r)] = 0.0;
            for c in (k + 1)..=((k + bw).min(n - 1)) {
                band[r * width + (c + bw - r)] -= f * band[k * width + (c + bw - k)];
            }
            x[r] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in (k + 1)..=((k + bw).min(n - 1)) {
            s -= band[k * width + (c + bw - k)] * x[c];
        }
        x[k] = s / band[k * width + bw];
    }
    finish(grid, x, cfg.mass_tol)
}
