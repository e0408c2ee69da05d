//! CSV data files with JSON sidecars (`foo.csv` + `foo.json`) and
//! long-format plot dumps.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curve::MeasureCurve;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovFunction;
use crate::markov::TransitionKernel;
use crate::measure::{DiscreteMeasure, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    Measure,
    Curve,
    Kernel,
    Lyapunov,
}

/// Contents of a sidecar JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: ArtifactKind,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

pub fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_header(csv: &Path) -> Result<Header> {
    Ok(serde_json::from_str(&fs::read_to_string(sidecar(csv))?)?)
}

fn write_with_header(path: &Path, header: &Header, head: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(head).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    write_json(&sidecar(path), header)
}

/// Shortest round-trip representation.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `cell,x[,y],weight` for every charged cell.
pub fn write_measure(path: &Path, mu: &DiscreteMeasure) -> Result<()> {
    let g = *mu.grid();
    let header = Header {
        kind: ArtifactKind::Measure,
        grid: g,
        times: None,
        source: None,
        target: None,
        extra: serde_json::json!({ "total_mass": mu.total_mass() }),
    };
    let head = [&["cell"][..], &["x", "y"][..g.dimension()], &["weight"][..]].concat();
    let rows = mu.charged_cells().into_iter().map(|c| {
        let mut row = vec![c.to_string()];
        row.extend(g.center(c)[..g.dimension()].iter().map(|&v| num(v)));
        row.push(num(mu.weights()[c]));
        row
    });
    write_with_header(path, &header, &head, rows)
}

/// Reads the `cell` and `weight` columns onto `grid`; other columns and the
/// sidecar are optional.
pub fn read_measure(path: &Path, grid: GridSpec) -> Result<DiscreteMeasure> {
    if let Ok(h) = read_header(path) {
        if h.grid != grid {
            return Err(Error::GridMismatch);
        }
    }
    let bad = |what: String| Error::InvalidMeasure(format!("{what} in {}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let head = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| head.iter().position(|h| h.trim() == name).ok_or_else(|| bad(format!("no `{name}` column")));
    let (ci, wi) = (col("cell")?, col("weight")?);
    let mut weights = vec![0.0; grid.num_cells()];
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let cell: usize = field(ci).parse().map_err(|_| bad(format!("bad cell `{}`", field(ci))))?;
        let w: f64 = field(wi).parse().map_err(|_| bad(format!("bad weight `{}`", field(wi))))?;
        *weights.get_mut(cell).ok_or_else(|| bad(format!("cell {cell} out of range")))? += w;
    }
    DiscreteMeasure::new(grid, weights)
}

/// `time,cell,weight` for every charged cell at every node.
pub fn write_curve(path: &Path, curve: &MeasureCurve) -> Result<()> {
    write_curve_with(path, curve, serde_json::Value::Null)
}

/// [`write_curve`] with extra metadata stored in the sidecar.
pub fn write_curve_with(path: &Path, curve: &MeasureCurve, extra: serde_json::Value) -> Result<()> {
    let header =
        Header { kind: ArtifactKind::Curve, grid: *curve.grid(), times: Some(curve.times().to_vec()), source: None, target: None, extra };
    let rows = curve
        .times()
        .iter()
        .zip(curve.states())
        .flat_map(|(&t, mu)| mu.charged_cells().into_iter().map(move |c| vec![num(t), c.to_string(), num(mu.weights()[c])]));
    write_with_header(path, &header, &["time", "cell", "weight"], rows)
}

pub fn read_curve(path: &Path) -> Result<MeasureCurve> {
    let h = read_header(path)?;
    let times = h.times.ok_or_else(|| Error::Scenario(format!("{} has no time list", path.display())))?;
    let mut weights = vec![vec![0.0; h.grid.num_cells()]; times.len()];
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    for rec in r.deserialize::<(f64, usize, f64)>() {
        let (t, cell, w) = rec.map_err(csv_err)?;
        let k = times.iter().position(|&s| s == t).ok_or(Error::NotANode(t))?;
        weights[k][cell] = w;
    }
    let states = weights.into_iter().map(|w| DiscreteMeasure::new(h.grid, w)).collect::<Result<_>>()?;
    MeasureCurve::new(times, states)
}

/// Dense row-major matrix, one CSV row per source cell.
pub fn write_kernel(path: &Path, k: &TransitionKernel) -> Result<()> {
    let header = Header {
        kind: ArtifactKind::Kernel,
        grid: *k.grid(),
        times: None,
        source: Some(k.source),
        target: Some(k.target),
        extra: serde_json::Value::Null,
    };
    let n = k.size();
    let head: Vec<String> = (0..n).map(|x| format!("to_{x}")).collect();
    let head: Vec<&str> = head.iter().map(String::as_str).collect();
    let rows = (0..n).map(|y| k.row(y).iter().map(|&v| num(v)).collect());
    write_with_header(path, &header, &head, rows)
}

pub fn read_kernel(path: &Path) -> Result<TransitionKernel> {
    let h = read_header(path)?;
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let rows = r.deserialize::<Vec<f64>>().map(|rec| rec.map_err(csv_err)).collect::<Result<_>>()?;
    TransitionKernel::from_rows(h.source.unwrap_or(0.0), h.target.unwrap_or(0.0), h.grid, rows)
}

/// `cell,value` plus the construction trace in the sidecar.
pub fn write_lyapunov(path: &Path, v: &LyapunovFunction) -> Result<()> {
    let header = Header {
        kind: ArtifactKind::Lyapunov,
        grid: *v.grid(),
        times: None,
        source: None,
        target: None,
        extra: serde_json::json!({
            "radii": v.radii,
            "tails": v.tails,
            "segments": v.segments,
            "grad_bound": v.grad_bound,
            "hess_bound": v.hess_bound,
            "integral": v.integral,
            "step_integral": v.step_integral,
        }),
    };
    let rows = v.values().values().iter().enumerate().map(|(c, &x)| vec![c.to_string(), num(x)]);
    write_with_header(path, &header, &["cell", "value"], rows)
}

/// Writes `<dir>/<stem>.plot.csv` in long format and returns its path.
///
/// Curves give `t,x[,y],density` for every cell and node, kernels give
/// `x_from,x_to,value` row-major, measures and Lyapunov functions give
/// `x[,y],value`.
pub fn emit_plot_data(artifact: &Path, out_dir: &Path) -> Result<PathBuf> {
    let h = read_header(artifact)?;
    let g = h.grid;
    let coords = |c: usize| -> Vec<String> { g.center(c)[..g.dimension()].iter().map(|&v| num(v)).collect() };
    let axes: Vec<&str> = ["x", "y"][..g.dimension()].to_vec();
    fs::create_dir_all(out_dir)?;
    let stem = artifact.file_stem().and_then(|s| s.to_str()).unwrap_or("artifact");
    let out = out_dir.join(format!("{stem}.plot.csv"));
    let mut w = csv::Writer::from_path(&out).map_err(csv_err)?;
    let mut head = |cols: Vec<&str>| w.write_record(cols).map_err(csv_err);
    match h.kind {
        ArtifactKind::Curve => {
            head([vec!["t"], axes, vec!["density"]].concat())?;
            let curve = read_curve(artifact)?;
            for (&t, mu) in curve.times().iter().zip(curve.states()) {
                for c in 0..g.num_cells() {
                    w.write_record([vec![num(t)], coords(c), vec![num(mu.density(c))]].concat()).map_err(csv_err)?;
                }
            }
        }
        ArtifactKind::Kernel => {
            head(vec!["x_from", "x_to", "value"])?;
            let k = read_kernel(artifact)?;
            for y in 0..k.size() {
                for (x, &v) in k.row(y).iter().enumerate() {
                    w.write_record([y.to_string(), x.to_string(), num(v)]).map_err(csv_err)?;
                }
            }
        }
        ArtifactKind::Measure | ArtifactKind::Lyapunov => {
            head([axes, vec!["value"]].concat())?;
            let values = match h.kind {
                ArtifactKind::Measure => read_measure(artifact, g)?.into_weights(),
                _ => {
                    let mut values = vec![0.0; g.num_cells()];
                    let mut r = csv::Reader::from_path(artifact).map_err(csv_err)?;
                    for rec in r.deserialize::<(usize, f64)>() {
                        let (c, v) = rec.map_err(csv_err)?;
                        values[c] = v;
                    }
                    values
                }
            };
            for (c, v) in values.into_iter().enumerate() {
                w.write_record([coords(c), vec![num(v)]].concat()).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(out)
}
