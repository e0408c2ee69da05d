use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use super::evolve;
use crate::curve::{MeasureCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::measure::{dv_from_moments, DiscreteMeasure, TestFunctionFamily};
use crate::operators::CoefficientField;

/// Successive-iterate distances `sup_t d_v(μ^(k)_t, μ^(k-1)_t)`, one per
/// iteration `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace {
    pub distances: Vec<f64>,
    pub tolerance: f64,
}

impl PicardTrace {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    pub fn is_monotone(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Solves the linear equation whose coefficients are frozen along `along`:
/// the step that freezes at node `k` uses `a(t_k, along_k, ·)`.
pub fn solve_frozen_along(c: &CoefficientField, nu: &DiscreteMeasure, along: &MeasureCurve, cfg: &SolverConfig) -> Result<MeasureCurve> {
    let grid = *nu.grid();
    let tg = TimeGrid::new(along.start(), along.end(), cfg.time_step)?;
    if tg.steps() + 1 != along.len() {
        return Err(Error::InvalidTimeGrid(format!(
            "freezing curve has {} nodes, step {} needs {}",
            along.len(),
            cfg.time_step,
            tg.steps() + 1
        )));
    }
    evolve(nu, &tg, cfg, |k, t| c.frozen_at(&grid, t, Some(&along.states()[k])))
}

fn sup_distance(a: &[Vec<f64>], b: &[Vec<f64>], family: &TestFunctionFamily) -> f64 {
    a.iter().zip(b).map(|(x, y)| dv_from_moments(x, y, family)).fold(0.0, f64::max)
}

/// Picard iteration: `μ^(0)` solves the equation frozen at the constant curve
/// `ν`; `μ^(k)` solves it frozen along `μ^(k-1)`. Stops once the sup-in-time
/// `d_v` distance between consecutive iterates is at most `cfg.picard_tol`.
pub fn solve_nonlinear_fixed_point(
    c: &CoefficientField,
    nu: &DiscreteMeasure,
    tg: &TimeGrid,
    cfg: &SolverConfig,
    family: &TestFunctionFamily,
) -> Result<(MeasureCurve, PicardTrace)> {
    let cfg = SolverConfig { time_step: tg.step(), ..cfg.clone() };
    let moments = |curve: &MeasureCurve| -> Result<Vec<Vec<f64>>> { curve.states().iter().map(|s| family.moments(s)).collect() };
    let frozen_nu = MeasureCurve::constant(nu.clone(), tg.nodes())?;
    let mut current = solve_frozen_along(c, nu, &frozen_nu, &cfg)?;
    let mut current_m = moments(&current)?;
    let mut distances = Vec::new();
    for _ in 0..cfg.picard_max_iter {
        let next = solve_frozen_along(c, nu, &current, &cfg)?;
        let next_m = moments(&next)?;
        let d = sup_distance(&next_m, &current_m, family);
        distances.push(d);
        current = next;
        current_m = next_m;
        if d <= cfg.picard_tol {
            return Ok((current, PicardTrace { distances, tolerance: cfg.picard_tol }));
        }
    }
    let last = distances.last().copied().unwrap_or(f64::NAN);
    Err(Error::PicardDiverged { iterations: distances.len(), last, trace: distances })
}
