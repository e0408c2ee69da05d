use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{dv_from_moments, DiscreteMeasure, GridSpec, TestFunctionFamily, MASS_TOL};

/// Two node times closer than this are the same node.
pub const NODE_TOL: f64 = 1e-12;

/// Uniform time nodes `start + k * step`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    start: f64,
    end: f64,
    step: f64,
    steps: usize,
}

impl TimeGrid {
    /// `end - start` must be a whole multiple of `step`.
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && end > start) {
            return Err(Error::InvalidTimeGrid(format!("need step > 0 and end > start, got [{start}, {end}] step {step}")));
        }
        let steps = ((end - start) / step).round() as usize;
        if steps == 0 || ((steps as f64) * step - (end - start)).abs() > NODE_TOL * end.abs().max(1.0) {
            return Err(Error::InvalidTimeGrid(format!("[{start}, {end}] is not a multiple of step {step}")));
        }
        Ok(Self { start, end, step, steps })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.end
        } else {
            self.start + k as f64 * self.step
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// Same step, starting at node `r` of this grid.
    pub fn restricted(&self, r: f64) -> Result<Self> {
        let k = self.index_of(r)?;
        if k >= self.steps {
            return Err(Error::InvalidTimeGrid(format!("restart {r} is the final node")));
        }
        Ok(Self { start: self.node(k), end: self.end, step: self.step, steps: self.steps - k })
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = ((t - self.start) / self.step).round();
        if k < 0.0 || k as usize > self.steps || (self.node(k as usize) - t).abs() > NODE_TOL {
            return Err(Error::NotANode(t));
        }
        Ok(k as usize)
    }
}

/// Measures at the nodes of a time grid; `states[0]` is the initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCurve {
    times: Vec<f64>,
    states: Vec<DiscreteMeasure>,
}

impl MeasureCurve {
    pub fn new(times: Vec<f64>, states: Vec<DiscreteMeasure>) -> Result<Self> {
        if times.len() < 2 || times.len() != states.len() {
            return Err(Error::InvalidTimeGrid(format!("{} times for {} states (need at least two nodes)", times.len(), states.len())));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidTimeGrid("times must be strictly increasing".into()));
        }
        let g = states[0].grid();
        if states.iter().any(|s| s.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { times, states })
    }

    /// `ν` held fixed at every node.
    pub fn constant(nu: DiscreteMeasure, times: Vec<f64>) -> Result<Self> {
        let states = vec![nu; times.len()];
        Self::new(times, states)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DiscreteMeasure] {
        &self.states
    }

    pub fn initial(&self) -> &DiscreteMeasure {
        &self.states[0]
    }

    pub fn last(&self) -> &DiscreteMeasure {
        self.states.last().unwrap()
    }

    pub fn grid(&self) -> &GridSpec {
        self.states[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_index(&self, t: f64) -> Result<usize> {
        let k = self.times.partition_point(|&s| s < t - NODE_TOL);
        if k < self.times.len() && (self.times[k] - t).abs() <= NODE_TOL {
            Ok(k)
        } else {
            Err(Error::NotANode(t))
        }
    }

    pub fn state_at(&self, t: f64) -> Result<&DiscreteMeasure> {
        Ok(&self.states[self.node_index(t)?])
    }

    pub fn mass_profile(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.total_mass()).collect()
    }

    /// The curve on `[r, end]` with initial datum `μ_r`.
    pub fn restrict(&self, r: f64) -> Result<Self> {
        let k = self.node_index(r)?;
        if k + 1 >= self.times.len() {
            return Err(Error::InvalidTimeGrid(format!("restriction time {r} leaves fewer than two nodes")));
        }
        Self::new(self.times[k..].to_vec(), self.states[k..].to_vec())
    }

    /// `μ ∘_r η`: states of `self` at nodes `<= r`, states of `eta` after.
    pub fn concatenate(&self, eta: &MeasureCurve, r: f64) -> Result<Self> {
        self.concatenate_with_tolerance(eta, r, MASS_TOL)
    }

    pub fn concatenate_with_tolerance(&self, eta: &MeasureCurve, r: f64, tol: f64) -> Result<Self> {
        let k = self.node_index(r)?;
        if k == 0 || k + 1 >= self.times.len() {
            return Err(Error::InvalidTimeGrid(format!("splice time {r} must lie strictly inside the curve")));
        }
        if eta.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        if (eta.start() - r).abs() > NODE_TOL {
            return Err(Error::InvalidTimeGrid(format!("continuation starts at {}, not {r}", eta.start())));
        }
        let deviation = eta.initial().max_abs_diff(&self.states[k])?;
        if deviation > tol {
            return Err(Error::SpliceMismatch { r, deviation });
        }
        let mut times = self.times[..=k].to_vec();
        let mut states = self.states[..=k].to_vec();
        times.extend_from_slice(&eta.times[1..]);
        states.extend_from_slice(&eta.states[1..]);
        Self::new(times, states)
    }

    /// Replaces the state at node `k`; used for defect injection in checks.
    pub fn with_state(mut self, k: usize, state: DiscreteMeasure) -> Result<Self> {
        if state.grid() != self.grid() || k >= self.states.len() {
            return Err(Error::GridMismatch);
        }
        self.states[k] = state;
        Ok(self)
    }
}

/// `max_k d_v(μ_{t_k}, η_{t_k})` over the nodes of `a`; `b` must contain them.
pub fn sup_distance(a: &MeasureCurve, b: &MeasureCurve, family: &TestFunctionFamily) -> Result<f64> {
    let mut out = 0.0f64;
    for (t, s) in a.times().iter().zip(a.states()) {
        let other = b.state_at(*t)?;
        out = out.max(dv_from_moments(&family.moments(s)?, &family.moments(other)?, family));
    }
    Ok(out)
}
