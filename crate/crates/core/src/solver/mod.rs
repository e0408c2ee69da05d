//! Time stepping for the forward equation, Picard iteration for nonlinear
//! coefficients, and the weak-formulation certificates.

mod config;
mod equicontinuity;
mod picard;
mod residual;
mod scheme;

pub use config::{Boundary, SolverConfig, Stepping};
pub use equicontinuity::{equicontinuity_check, EquicontinuityReport};
pub use picard::{solve_frozen_along, solve_nonlinear_fixed_point, PicardTrace};
pub use residual::{weak_residual, weak_residual_with, WeakResidualReport};
pub use scheme::{cfl_limit, step_frozen};

use crate::curve::{MeasureCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::operators::{CoefficientField, FrozenCoefficients};

/// Time at which step `k` (from node `k` to `k + 1`) evaluates coefficients.
pub(crate) fn freeze_index(k: usize, stepping: Stepping) -> usize {
    match stepping {
        Stepping::Explicit => k,
        Stepping::Implicit => k + 1,
    }
}

/// One forward step of a linear field from time `t`.
pub fn step_linear(c: &CoefficientField, mu: &DiscreteMeasure, t: f64, dt: f64, cfg: &SolverConfig) -> Result<DiscreteMeasure> {
    if !c.is_linear() {
        return Err(Error::NotLinear { mode: c.mode().name() });
    }
    let tf = match cfg.stepping {
        Stepping::Explicit => t,
        Stepping::Implicit => t + dt,
    };
    let frozen = c.frozen_at(mu.grid(), tf, None)?;
    step_frozen(&frozen, mu, dt, cfg)
}

/// Steps `nu` across `tg`, asking `coeffs(k, t_k)` for the coefficients at
/// node `k` whenever a step freezes there.
pub(crate) fn evolve(
    nu: &DiscreteMeasure,
    tg: &TimeGrid,
    cfg: &SolverConfig,
    mut coeffs: impl FnMut(usize, f64) -> Result<FrozenCoefficients>,
) -> Result<MeasureCurve> {
    let mut states = Vec::with_capacity(tg.steps() + 1);
    states.push(nu.clone());
    for k in 0..tg.steps() {
        let j = freeze_index(k, cfg.stepping);
        let frozen = coeffs(j, tg.node(j))?;
        let next = step_frozen(&frozen, &states[k], tg.step(), cfg)?;
        states.push(next);
    }
    MeasureCurve::new(tg.nodes(), states)
}

/// Solution of the linear equation from `(tg.start(), nu)` on the nodes of `tg`.
pub fn solve_linear(c: &CoefficientField, nu: &DiscreteMeasure, tg: &TimeGrid, cfg: &SolverConfig) -> Result<MeasureCurve> {
    if !c.is_linear() {
        return Err(Error::NotLinear { mode: c.mode().name() });
    }
    let grid = *nu.grid();
    evolve(nu, tg, cfg, |_, t| c.frozen_at(&grid, t, None))
}
