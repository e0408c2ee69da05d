use serde::{Deserialize, Serialize};

use crate::curve::MeasureCurve;
use crate::error::Result;
use crate::measure::TestFunctionFamily;
use crate::operators::{apply_frozen, CoefficientField, FrozenCoefficients};

/// Weak-formulation defects `|∫φ dμ_t - ∫φ dν - ∫_s^t ∫ Lφ dμ_τ dτ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidualReport {
    /// Node times `t_1, ..., t_K` at which the defect is evaluated.
    pub times: Vec<f64>,
    /// `residuals[l][k]`: test function `l` at time `times[k]`.
    pub residuals: Vec<Vec<f64>>,
    pub max_residual: f64,
    /// Index pair `(l, k)` of the maximum.
    pub argmax: (usize, usize),
    pub quadrature: String,
}

/// Defects for every member of `family` at every node in `(s, t]`, with the
/// time integral by the trapezoidal rule. Outside linear mode the measure
/// argument of the coefficients is the curve itself.
pub fn weak_residual(
    curve: &MeasureCurve,
    c: &CoefficientField,
    family: &TestFunctionFamily,
    s: f64,
    t: f64,
) -> Result<WeakResidualReport> {
    let grid = *curve.grid();
    let linear = c.is_linear();
    weak_residual_with(curve, family, s, t, |k| {
        let zeta = if linear { None } else { Some(&curve.states()[k]) };
        c.frozen_at(&grid, curve.times()[k], zeta)
    })
}

/// Same defects with caller-supplied coefficients at each node index.
pub fn weak_residual_with(
    curve: &MeasureCurve,
    family: &TestFunctionFamily,
    s: f64,
    t: f64,
    coeffs: impl Fn(usize) -> Result<FrozenCoefficients>,
) -> Result<WeakResidualReport> {
    let i0 = curve.node_index(s)?;
    let i1 = curve.node_index(t)?;
    let nodes: Vec<usize> = (i0..=i1).collect();
    // pairing[k][l] = ∫ f_l dμ_k, generator[k][l] = ∫ L f_l dμ_k
    let mut pairing = Vec::with_capacity(nodes.len());
    let mut generator = Vec::with_capacity(nodes.len());
    for &k in &nodes {
        let mu = &curve.states()[k];
        let frozen = coeffs(k)?;
        pairing.push(family.moments(mu)?);
        let mut g = Vec::with_capacity(family.len());
        for f in family.members() {
            let lf = apply_frozen(&frozen, f.values())?;
            g.push(crate::measure::dot(mu.weights(), lf.values()));
        }
        generator.push(g);
    }
    let times: Vec<f64> = nodes[1..].iter().map(|&k| curve.times()[k]).collect();
    let mut residuals = vec![Vec::with_capacity(times.len()); family.len()];
    let mut max_residual = 0.0f64;
    let mut argmax = (0, 0);
    for (l, row) in residuals.iter_mut().enumerate() {
        let mut integral = 0.0;
        for j in 1..nodes.len() {
            let dt = curve.times()[nodes[j]] - curve.times()[nodes[j - 1]];
            integral += 0.5 * dt * (generator[j - 1][l] + generator[j][l]);
            let r = (pairing[j][l] - pairing[0][l] - integral).abs();
            if r > max_residual {
                max_residual = r;
                argmax = (l, j - 1);
            }
            row.push(r);
        }
    }
    Ok(WeakResidualReport { times, residuals, max_residual, argmax, quadrature: "trapezoidal".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::TimeGrid;
    use crate::measure::{DiscreteMeasure, GridSpec};
    use crate::operators::{builtin, Params};
    use crate::solver::{solve_linear, SolverConfig};

    #[test]
    fn constant_curve_under_zero_coefficients() {
        let g = GridSpec::new(1, 1.0, 32).unwrap();
        let f = TestFunctionFamily::build(g, 3).unwrap();
        let c = builtin("zero", 1, &Params::new()).unwrap();
        let nu = DiscreteMeasure::gaussian(g, &[0.0], 0.1).unwrap();
        let curve = MeasureCurve::constant(nu, vec![0.0, 0.5, 1.0]).unwrap();
        let r = weak_residual(&curve, &c, &f, 0.0, 1.0).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn solver_output_is_consistent_and_defects_are_detected() {
        let g = GridSpec::new(1, 4.0, 128).unwrap();
        let f = TestFunctionFamily::build(g, 4).unwrap();
        let c = builtin("heat", 1, &Params::new()).unwrap();
        let nu = DiscreteMeasure::gaussian(g, &[0.0], 0.05).unwrap();
        let cfg = SolverConfig { time_step: 1.0 / 2048.0, ..SolverConfig::default() };
        let tg = TimeGrid::new(0.0, 0.25, cfg.time_step).unwrap();
        let curve = solve_linear(&c, &nu, &tg, &cfg).unwrap();
        let ok = weak_residual(&curve, &c, &f, 0.0, 0.25).unwrap();
        let h = g.cell_width();
        let tol = 10.0 * (cfg.time_step + h * h);
        assert!(ok.max_residual < tol, "{} vs {tol}", ok.max_residual);
        let k = curve.len() / 2;
        let halved: Vec<f64> = curve.states()[k].weights().iter().map(|w| 0.5 * w).collect();
        let bad = curve.clone().with_state(k, DiscreteMeasure::new(g, halved).unwrap()).unwrap();
        let r = weak_residual(&bad, &c, &f, 0.0, 0.25).unwrap();
        assert!(r.max_residual > tol);
    }
}
