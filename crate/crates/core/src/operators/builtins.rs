//! Named coefficient fields selectable from scenario files, and tabulated
//! coefficients read from CSV.

use std::collections::BTreeMap;
use std::path::Path;

use super::coefficients::{scalar_diffusion, CoefficientField, CoefficientMeta, Mat2, Vec2};
use crate::error::{Error, Result};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "zero",
    "heat",
    "ornstein-uhlenbeck",
    "time-dependent-ou",
    "linear-drift",
    "cubic-outward",
    "branching-transport",
    "burgers-nemytskii",
    "porous-style-nemytskii",
    "mean-field",
];

/// Numeric parameters of a built-in; missing keys take the defaults below.
pub type Params = BTreeMap<String, f64>;

fn param(p: &Params, key: &str, default: f64) -> f64 {
    p.get(key).copied().unwrap_or(default)
}

fn per_axis(d: usize, f: impl Fn(f64) -> f64, x: &[f64]) -> Vec2 {
    let mut out = [0.0; 2];
    for k in 0..d {
        out[k] = f(x[k]);
    }
    out
}

/// Built-in coefficient field by name.
///
/// Parameters: `diffusion` (scalar `a`, default 0.5 except where noted),
/// `theta` (drift rate, default 1), `kappa` (mean-field coupling, default 0.5).
pub fn builtin(name: &str, dimension: usize, p: &Params) -> Result<CoefficientField> {
    if !(1..=2).contains(&dimension) {
        return Err(Error::InvalidCoefficients(format!("dimension {dimension} not in {{1, 2}}")));
    }
    let d = dimension;
    let a = param(p, "diffusion", 0.5);
    let theta = param(p, "theta", 1.0);
    let elliptic = |a: f64| if a > 0.0 { Some((a, a)) } else { None };
    let field = match name {
        "zero" => CoefficientField::linear(name, d, |_, _| [[0.0; 2]; 2], |_, _| [0.0; 2])
            .with_meta(CoefficientMeta { global_bound: Some(0.0), ellipticity: None }),
        "heat" => CoefficientField::linear(name, d, move |_, _| scalar_diffusion(a), |_, _| [0.0; 2])
            .with_meta(CoefficientMeta { global_bound: Some(a), ellipticity: elliptic(a) }),
        "ornstein-uhlenbeck" => {
            CoefficientField::linear(name, d, move |_, _| scalar_diffusion(a), move |_, x| per_axis(d, |v| -theta * v, x))
                .with_meta(CoefficientMeta { global_bound: None, ellipticity: elliptic(a) })
        }
        "time-dependent-ou" => {
            CoefficientField::linear(name, d, move |_, _| scalar_diffusion(a), move |t, x| per_axis(d, |v| -theta * t * v, x))
                .with_meta(CoefficientMeta { global_bound: None, ellipticity: elliptic(a) })
        }
        "linear-drift" => CoefficientField::linear(name, d, move |_, _| scalar_diffusion(a), move |_, x| per_axis(d, |v| theta * v, x))
            .with_meta(CoefficientMeta { global_bound: None, ellipticity: elliptic(a) }),
        "cubic-outward" => CoefficientField::linear(name, d, move |_, _| scalar_diffusion(a), move |_, x| per_axis(d, |v| v * v * v, x))
            .with_meta(CoefficientMeta { global_bound: None, ellipticity: elliptic(a) }),
        "branching-transport" => CoefficientField::linear(
            name,
            d,
            |_, _| [[0.0; 2]; 2],
            move |_, x| per_axis(d, |v| 3.0 * v.signum() * v.abs().powf(2.0 / 3.0), x),
        )
        .with_meta(CoefficientMeta { global_bound: None, ellipticity: None }),
        "burgers-nemytskii" => CoefficientField::nemytskii(
            name,
            d,
            move |_, _| scalar_diffusion(a),
            move |_, r, _| {
                let mut b = [0.0; 2];
                b[..d].fill(r);
                b
            },
        )
        .with_meta(CoefficientMeta { global_bound: None, ellipticity: elliptic(a) }),
        "porous-style-nemytskii" => CoefficientField::nemytskii(
            name,
            d,
            move |_, _| scalar_diffusion(a),
            move |_, r, x| per_axis(d, |v| -v * r / (1.0 + r.abs()), x),
        )
        .with_meta(CoefficientMeta { global_bound: None, ellipticity: elliptic(a) }),
        "mean-field" => {
            let kappa = param(p, "kappa", 0.5);
            CoefficientField::global_nonlinear(
                name,
                d,
                move |zeta| {
                    let g = zeta.grid();
                    let w = zeta.weights();
                    (0..d).map(|k| (0..w.len()).map(|i| w[i] * g.center(i)[k].tanh()).sum()).collect()
                },
                move |_, _, _| scalar_diffusion(a),
                move |_, f, x| {
                    let mut b = [0.0; 2];
                    for k in 0..d {
                        b[k] = -theta * x[k] + kappa * f[k];
                    }
                    b
                },
            )
            .with_meta(CoefficientMeta { global_bound: None, ellipticity: elliptic(a) })
        }
        other => return Err(Error::InvalidCoefficients(format!("unknown built-in '{other}' (known: {})", BUILTIN_NAMES.join(", ")))),
    };
    Ok(field)
}

#[derive(Debug, Clone)]
struct Slice {
    time: f64,
    points: Vec<([f64; 2], Mat2, Vec2)>,
}

/// Linear coefficients from a CSV table.
///
/// 1d columns: `t,x,a11,b1`; 2d columns: `t,x,y,a11,a12,a22,b1,b2`. Values
/// are piecewise constant in time (the latest slice with `t_slice <= t`, the
/// first slice before it) and nearest-neighbor in space.
pub fn tabulated(path: &Path, dimension: usize) -> Result<CoefficientField> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidCoefficients(format!("{}: {e}", path.display())))?;
    let width = if dimension == 1 { 4 } else { 8 };
    let mut slices: Vec<Slice> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::InvalidCoefficients(format!("{}: {e}", path.display())))?;
        if rec.len() != width {
            return Err(Error::InvalidCoefficients(format!(
                "{}: row {} has {} columns, expected {width}",
                path.display(),
                line + 2,
                rec.len()
            )));
        }
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidCoefficients(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        let (x, a, b) = if dimension == 1 {
            ([v[1], 0.0], [[v[2], 0.0], [0.0, 0.0]], [v[3], 0.0])
        } else {
            ([v[1], v[2]], [[v[3], v[4]], [v[4], v[5]]], [v[6], v[7]])
        };
        if a[0][0] < 0.0 || a[1][1] < 0.0 || a[0][0] * a[1][1] < a[0][1] * a[0][1] {
            return Err(Error::InvalidCoefficients(format!("{}: row {}: diffusion not nonnegative definite", path.display(), line + 2)));
        }
        match slices.last_mut() {
            Some(s) if s.time == v[0] => s.points.push((x, a, b)),
            Some(s) if s.time > v[0] => return Err(Error::InvalidCoefficients(format!("{}: times must be nondecreasing", path.display()))),
            _ => slices.push(Slice { time: v[0], points: vec![(x, a, b)] }),
        }
    }
    if slices.is_empty() {
        return Err(Error::InvalidCoefficients(format!("{}: empty table", path.display())));
    }
    let lookup = move |t: f64, x: &[f64]| -> (Mat2, Vec2) {
        let idx = slices.partition_point(|s| s.time <= t).saturating_sub(1);
        let s = &slices[idx];
        let dist = |p: &[f64; 2]| (0..x.len()).map(|k| (p[k] - x[k]).powi(2)).sum::<f64>();
        let best = s.points.iter().min_by(|p, q| dist(&p.0).total_cmp(&dist(&q.0))).expect("nonempty slice");
        (best.1, best.2)
    };
    let lookup = std::sync::Arc::new(lookup);
    let la = lookup.clone();
    let name = format!("tabulated:{}", path.display());
    Ok(CoefficientField::linear(name, dimension, move |t, x| la(t, x).0, move |t, x| lookup(t, x).1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{DiscreteMeasure, GridSpec};

    #[test]
    fn every_builtin_constructs_in_both_dimensions() {
        for d in 1..=2 {
            for name in BUILTIN_NAMES {
                let c = builtin(name, d, &Params::new()).unwrap();
                let g = GridSpec::new(d, 1.0, 6).unwrap();
                let zeta = DiscreteMeasure::dirac_cell(g, 2).unwrap();
                assert!(c.frozen_at(&g, 0.1, Some(&zeta)).is_ok(), "{name}");
            }
        }
        assert!(builtin("nope", 1, &Params::new()).is_err());
    }

    #[test]
    fn tabulated_nearest_and_piecewise_constant() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "t,x,a11,b1\n0,-1,0.5,1\n0,1,0.5,2\n1,-1,0.25,3\n1,1,0.25,4\n").unwrap();
        let c = tabulated(&path, 1).unwrap();
        let (a, b) = c.eval(0.5, None, &[0.8]).unwrap();
        assert_eq!((a[0][0], b[0]), (0.5, 2.0));
        let (a, b) = c.eval(2.0, None, &[-0.1]).unwrap();
        assert_eq!((a[0][0], b[0]), (0.25, 3.0));
    }
}
