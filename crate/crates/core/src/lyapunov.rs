//! Radial Lyapunov functions built from a measure's tails, the inequality
//! `Lψ <= C + Cψ`, Gronwall moment bounds and tightness certificates.

use serde::{Deserialize, Serialize};

use crate::curve::MeasureCurve;
use crate::error::{Error, Result};
use crate::family::CandidateSet;
use crate::measure::{integrate, DiscreteMeasure, GridFunction, GridSpec};
use crate::operators::{apply_generator, CoefficientField};

/// `sup |g'|` of a unit smoothing step over an interval of length 1/2.
pub const STEP_SLOPE: f64 = 3.75;

/// `sup |g''|` of the same step, `40/√3`.
pub fn step_curvature() -> f64 {
    40.0 / 3f64.sqrt()
}

/// Quintic `S(u) = 10u³ - 15u⁴ + 6u⁵`: `S(0) = 0`, `S(1) = 1`, vanishing
/// first and second derivatives at both ends.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// `V` rises from `low` to `low + 1` on `[from, to]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSegment {
    pub from: f64,
    pub to: f64,
    pub low: f64,
    /// Coefficients of `S` in powers `u³, u⁴, u⁵`.
    pub coefficients: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFunction {
    values: GridFunction,
    /// `R_1 < R_2 < ...`, `R_{n+1} >= R_n + 1`.
    pub radii: Vec<f64>,
    /// `ν(|x| > R_n)` for each radius.
    pub tails: Vec<f64>,
    pub segments: Vec<SmoothingSegment>,
    pub grad_bound: f64,
    pub hess_bound: f64,
    /// Total mass of the measure the function was built from.
    pub mass: f64,
    /// `∫V dν` and `∫W dν`.
    pub integral: f64,
    pub step_integral: f64,
    /// `ν(B̄_{R_1})`.
    pub first_shell_mass: f64,
}

/// Builds `V_ν` with radii `ν(|x| > R_n) <= mass · n⁻³` (capped at the
/// grid), `R_1 >= h/2`, unit gaps, and quintic steps on
/// `[R_{n+1} + 1/4, R_{n+1} + 3/4]`.
pub fn construct_lyapunov(nu: &DiscreteMeasure) -> Result<LyapunovFunction> {
    let mass = nu.total_mass();
    if !(mass > 0.0) {
        return Err(Error::InvalidMeasure("Lyapunov construction needs positive mass".into()));
    }
    let grid = *nu.grid();
    let mut charged: Vec<(f64, f64)> = nu.charged_cells().into_iter().map(|c| (grid.center_radius(c), nu.weights()[c])).collect();
    charged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = |r: f64| charged.iter().filter(|(rho, _)| *rho > r).map(|(_, w)| w).sum::<f64>();
    // smallest charged radius rho (or 0) with tail(rho) <= bound
    let min_radius = |bound: f64| std::iter::once(0.0).chain(charged.iter().map(|c| c.0)).find(|&r| tail(r) <= bound).unwrap_or(0.0);
    let outer = grid.max_center_radius();
    let mut radii: Vec<f64> = Vec::new();
    let mut n = 1usize;
    loop {
        let floor = radii.last().map_or(0.5 * grid.cell_width(), |r| r + 1.0);
        let r = min_radius(mass / (n as f64).powi(3)).max(floor);
        radii.push(r);
        // two radii beyond the grid fix V on every cell
        if radii.len() >= 3 && radii[radii.len() - 2] > outer {
            break;
        }
        n += 1;
    }
    let tails: Vec<f64> = radii.iter().map(|&r| tail(r)).collect();
    let segments: Vec<SmoothingSegment> = radii[1..]
        .iter()
        .enumerate()
        .map(|(i, &r)| SmoothingSegment { from: r + 0.25, to: r + 0.75, low: (i + 1) as f64, coefficients: [10.0, -15.0, 6.0] })
        .collect();
    let hess_bound = match grid.dimension() {
        1 => step_curvature(),
        _ => step_curvature() + STEP_SLOPE / segments[0].from,
    };
    let values = GridFunction::from_fn(grid, |x| radial_value(&segments, norm(x)));
    let step_values = GridFunction::from_fn(grid, |x| step_value(&radii, norm(x)));
    let first_shell_mass = mass - tails[0];
    Ok(LyapunovFunction {
        integral: integrate(nu, &values)?,
        step_integral: integrate(nu, &step_values)?,
        values,
        radii,
        tails,
        segments,
        grad_bound: STEP_SLOPE,
        hess_bound,
        mass,
        first_shell_mass,
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn radial_value(segments: &[SmoothingSegment], r: f64) -> f64 {
    segments.iter().fold(1.0, |v, s| if r <= s.from { v } else { v + smoothstep((r - s.from) / (s.to - s.from)) })
}

/// `W = 1` on `B̄_{R_1}`, `n` on `B̄_{R_{n+1}} \ B̄_{R_n}`.
fn step_value(radii: &[f64], r: f64) -> f64 {
    match radii.iter().position(|&rn| r <= rn) {
        Some(0) => 1.0,
        Some(k) => k as f64,
        None => radii.len() as f64,
    }
}

impl LyapunovFunction {
    pub fn grid(&self) -> &GridSpec {
        self.values.grid()
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        radial_value(&self.segments, r)
    }

    pub fn step_function(&self) -> GridFunction {
        GridFunction::from_fn(*self.grid(), |x| step_value(&self.radii, norm(x)))
    }

    /// Radius of `{V <= c}`; `None` for `c < 1` (empty set).
    pub fn sublevel_radius(&self, c: f64) -> Option<f64> {
        if c < 1.0 {
            return None;
        }
        let k = c.floor() as usize;
        match self.segments.get(k - 1) {
            None => Some(f64::INFINITY),
            Some(s) if c == k as f64 => Some(s.from),
            Some(s) => {
                // invert the monotone step by bisection
                let (mut lo, mut hi) = (s.from, s.to);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if self.eval_radius(mid) <= c {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(lo)
            }
        }
    }

    /// Largest first and second difference quotients along the axes.
    pub fn finite_difference_bounds(&self) -> (f64, f64) {
        let g = *self.grid();
        let h = g.cell_width();
        let v = self.values.values();
        let (mut d1, mut d2) = (0.0f64, 0.0f64);
        for i in 0..g.num_cells() {
            for axis in 0..g.dimension() {
                let mut off = [0i64; 2];
                off[axis] = 1;
                let Some(up) = g.neighbor(i, off) else { continue };
                d1 = d1.max((v[up] - v[i]).abs() / h);
                off[axis] = -1;
                if let Some(down) = g.neighbor(i, off) {
                    d2 = d2.max((v[up] - 2.0 * v[i] + v[down]).abs() / (h * h));
                }
            }
        }
        (d1, d2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovWitness {
    pub t: f64,
    pub cell: usize,
    pub x: [f64; 2],
    /// `Lψ - C - Cψ`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovInequalityReport {
    pub constant: f64,
    pub slack: f64,
    pub max_excess: f64,
    /// Largest `Lψ / (1 + ψ)`, the smallest constant that would pass.
    pub required_constant: f64,
    /// Violating points, worst first (at most 16).
    pub witnesses: Vec<LyapunovWitness>,
    pub passed: bool,
}

/// Evaluates `Lψ` at every interior cell and each of `times`.
pub fn check_lyapunov_inequality(
    c: &CoefficientField,
    psi: &LyapunovFunction,
    constant: f64,
    times: &[f64],
    slack: f64,
) -> Result<LyapunovInequalityReport> {
    if !c.is_linear() {
        return Err(Error::NotLinear { mode: c.mode().name() });
    }
    let g = *psi.grid();
    let v = psi.values.values();
    let mut witnesses = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    let mut required: f64 = 0.0;
    for &t in times {
        let l = apply_generator(c, t, None, &psi.values)?;
        for (cell, (&lv, &pv)) in l.values().iter().zip(v).enumerate() {
            if g.is_boundary(cell) {
                continue;
            }
            let excess = lv - constant - constant * pv;
            max_excess = max_excess.max(excess);
            required = required.max(lv / (1.0 + pv));
            if excess > slack {
                witnesses.push(LyapunovWitness { t, cell, x: g.center(cell), excess });
            }
        }
    }
    witnesses.sort_by(|a, b| b.excess.total_cmp(&a.excess));
    witnesses.truncate(16);
    Ok(LyapunovInequalityReport { constant, slack, max_excess, required_constant: required, passed: max_excess <= slack, witnesses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub times: Vec<f64>,
    pub moments: Vec<f64>,
    /// `(∫ψ dν + 1) e^{C(t-s)} - 1`.
    pub bounds: Vec<f64>,
    pub max_excess: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `∫ψ dμ_t` with the Gronwall bound at every node of `curve`.
pub fn moment_bound_check(curve: &MeasureCurve, psi: &LyapunovFunction, constant: f64, tol: f64) -> Result<MomentBoundReport> {
    let s = curve.start();
    let m0 = integrate(curve.initial(), &psi.values)?;
    let moments: Vec<f64> = curve.states().iter().map(|mu| integrate(mu, &psi.values)).collect::<Result<_>>()?;
    let bounds: Vec<f64> = curve.times().iter().map(|t| (m0 + 1.0) * (constant * (t - s)).exp() - 1.0).collect();
    let max_excess = moments.iter().zip(&bounds).map(|(m, b)| m - b).fold(f64::NEG_INFINITY, f64::max);
    Ok(MomentBoundReport { times: curve.times().to_vec(), moments, bounds, max_excess, tolerance: tol, passed: max_excess <= tol })
}

/// `(μ({ψ > c}), ∫ψ dμ / c)`; the first never exceeds the second for `ψ >= 0`.
pub fn markov_tail(mu: &DiscreteMeasure, psi: &GridFunction, c: f64) -> Result<(f64, f64)> {
    if mu.grid() != psi.grid() {
        return Err(Error::GridMismatch);
    }
    let tail = mu.weights().iter().zip(psi.values()).filter(|(_, &p)| p > c).map(|(w, _)| w).sum();
    Ok((tail, integrate(mu, psi)? / c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub level: f64,
    /// `sup_μ ∫ψ dμ_t / c`.
    pub bound: f64,
    /// `sup_μ μ_t({ψ > c})`.
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub t: f64,
    pub sup_moment: f64,
    pub argmax: String,
    pub moments: Vec<f64>,
    pub tails: Vec<TailBound>,
}

/// `sup_{μ ∈ family} ∫ψ dμ_t` and the implied tail bounds at `levels`.
pub fn tightness_certificate(family: &CandidateSet, t: f64, psi: &GridFunction, levels: &[f64]) -> Result<TightnessReport> {
    let states: Vec<&DiscreteMeasure> = family.curves.iter().map(|c| c.state_at(t)).collect::<Result<_>>()?;
    let moments: Vec<f64> = states.iter().map(|mu| integrate(mu, psi)).collect::<Result<_>>()?;
    let (arg, sup_moment) = moments.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, m)| if m > b.1 { (i, m) } else { b });
    let tails = levels
        .iter()
        .map(|&c| {
            let observed = states.iter().map(|mu| markov_tail(mu, psi, c).map(|p| p.0)).try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))?;
            Ok(TailBound { level: c, bound: sup_moment / c, observed })
        })
        .collect::<Result<_>>()?;
    Ok(TightnessReport { t, sup_moment, argmax: family.labels[arg].clone(), moments, tails })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::TimeGrid;
    use crate::operators::{builtin, Params};
    use crate::solver::{solve_linear, SolverConfig};

    #[test]
    fn smoothstep_has_the_declared_derivative_bounds() {
        let n = 20000;
        let h = 1.0 / n as f64;
        let g = |r: f64| smoothstep(2.0 * r);
        let (mut d1, mut d2) = (0.0f64, 0.0f64);
        for i in 1..n / 2 {
            let r = i as f64 * h;
            d1 = d1.max((g(r + h) - g(r - h)) / (2.0 * h));
            d2 = d2.max(((g(r + h) - 2.0 * g(r) + g(r - h)) / (h * h)).abs());
        }
        assert!((d1 - STEP_SLOPE).abs() < 1e-3);
        assert!((d2 - step_curvature()).abs() < 1e-2);
    }

    #[test]
    fn concentrated_measure_sees_a_single_shell() {
        let g = GridSpec::new(1, 4.0, 64).unwrap();
        let nu = DiscreteMeasure::dirac(g, &[0.1]).unwrap();
        let v = construct_lyapunov(&nu).unwrap();
        assert_eq!(v.values().values()[nu.charged_cells()[0]], 1.0);
        assert_eq!(v.integral, 1.0);
        assert!(v.radii.windows(2).all(|w| w[1] >= w[0] + 1.0));
    }

    #[test]
    fn v_is_below_w_and_monotone() {
        let g = GridSpec::new(1, 8.0, 256).unwrap();
        let nu = DiscreteMeasure::gaussian(g, &[0.0], 2.0).unwrap();
        let v = construct_lyapunov(&nu).unwrap();
        let w = v.step_function();
        assert!(v.values().values().iter().zip(w.values()).all(|(a, b)| a <= b));
        let half = &v.values().values()[128..];
        assert!(half.windows(2).all(|p| p[1] >= p[0]));
        let bound: f64 = (1..=v.radii.len()).map(|n| (n as f64).powi(-2)).sum::<f64>() * v.mass + v.first_shell_mass;
        assert!(v.integral <= v.step_integral && v.step_integral <= bound);
        let (d1, d2) = v.finite_difference_bounds();
        assert!(d1 <= v.grad_bound && d2 <= v.hess_bound);
        assert!(v.sublevel_radius(0.5).is_none());
        let r = v.sublevel_radius(2.5).unwrap();
        assert!((v.eval_radius(r) - 2.5).abs() < 1e-9);
    }

    #[test]
    fn ou_satisfies_the_inequality_and_the_moment_bound() {
        let g = GridSpec::new(1, 6.0, 96).unwrap();
        let c = builtin("ornstein-uhlenbeck", 1, &Params::new()).unwrap();
        let nu = DiscreteMeasure::gaussian(g, &[0.5], 0.5).unwrap();
        let psi = construct_lyapunov(&nu).unwrap();
        let rep = check_lyapunov_inequality(&c, &psi, 8.0, &[0.0, 0.5], 1e-9).unwrap();
        assert!(rep.passed, "{rep:?}");
        let cfg = SolverConfig { time_step: 1.0 / 256.0, ..SolverConfig::default() };
        let tg = TimeGrid::new(0.0, 0.5, cfg.time_step).unwrap();
        let curve = solve_linear(&c, &nu, &tg, &cfg).unwrap();
        assert!(moment_bound_check(&curve, &psi, 8.0, 1e-9).unwrap().passed);
        let far = DiscreteMeasure::dirac_cell(g, 94).unwrap();
        let corrupted = curve.clone().with_state(4, far).unwrap();
        assert!(!moment_bound_check(&corrupted, &psi, 8.0, 1e-9).unwrap().passed);
    }

    #[test]
    fn cubic_outward_drift_violates_the_inequality() {
        let g = GridSpec::new(1, 6.0, 96).unwrap();
        let c = builtin("cubic-outward", 1, &Params::new()).unwrap();
        let psi = construct_lyapunov(&DiscreteMeasure::gaussian(g, &[0.0], 0.5).unwrap()).unwrap();
        let rep = check_lyapunov_inequality(&c, &psi, 1.0, &[0.0], 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(rep.witnesses.iter().all(|w| w.x[0].abs() > 1.0));
    }

    #[test]
    fn zero_coefficients_need_no_constant() {
        let g = GridSpec::new(1, 4.0, 64).unwrap();
        let c = builtin("zero", 1, &Params::new()).unwrap();
        let psi = construct_lyapunov(&DiscreteMeasure::gaussian(g, &[0.0], 1.0).unwrap()).unwrap();
        assert!(check_lyapunov_inequality(&c, &psi, 0.0, &[0.0], 0.0).unwrap().passed);
    }
}
