use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curve::TimeGrid;
use crate::error::{Error, Result};
use crate::io::read_measure;
use crate::measure::{DiscreteMeasure, GridSpec};
use crate::operators::{builtin, tabulated, CoefficientField, Params, BUILTIN_NAMES};
use crate::solver::{Boundary, SolverConfig, Stepping};

/// A declarative run description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Seeds every randomised probe of the run.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub time: TimeSection,
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub initial: InitialSpec,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dimension: usize,
    pub half_extent: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default)]
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    #[serde(default)]
    pub builtin: Option<String>,
    /// Tabulated CSV, relative to the scenario file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub boundary: Boundary,
    pub stepping: Stepping,
    pub cfl_safety: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub mass_tol: f64,
    pub cons_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            boundary: d.boundary,
            stepping: d.stepping,
            cfl_safety: d.cfl_safety,
            picard_tol: d.picard_tol,
            picard_max_iter: d.picard_max_iter,
            mass_tol: d.mass_tol,
            cons_tol: d.cons_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Dirac {
        point: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        variance: f64,
    },
    /// Equal mass on the cells containing `points`.
    Uniform {
        points: Vec<Vec<f64>>,
        #[serde(default = "one")]
        mass: f64,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    /// `cell,weight` CSV, relative to the scenario file.
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// The solver output as a single-member family.
    #[default]
    Solver,
    BranchingTransport {
        #[serde(default)]
        branch_times: Option<Vec<f64>>,
        #[serde(default)]
        mixture_weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    /// Number of dyadic levels of the test family.
    pub levels: usize,
    pub enumeration_seed: u64,
    pub tie_tol: f64,
    pub min_trace_len: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self { levels: 4, enumeration_seed: 0, tie_tol: 1e-9, min_trace_len: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub mass: Option<MassCheck>,
    pub residual: Option<ResidualCheck>,
    pub picard: Option<PicardCheck>,
    pub equicontinuity: Option<EquicontinuityCheck>,
    pub flow: Option<FlowCheckSpec>,
    pub admissibility: Option<FlowCheckSpec>,
    pub uniqueness_probe: Option<ProbeCheck>,
    pub ck: Option<CkCheckSpec>,
    pub convex_extension: Option<ConvexExtensionCheckSpec>,
    pub disintegration: Option<DisintegrationCheck>,
    pub lyapunov: Option<LyapunovCheck>,
    pub tightness: Option<TightnessCheck>,
    pub assumptions: Option<AssumptionCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassCheck {
    /// `|mass - 1|` bound (conservative) or per-step increase bound (absorbing).
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualCheck {
    /// Passes when the max residual is `<= constant * (dt + h²)`.
    pub constant: f64,
    /// Generated transport families: every member must stay within
    /// `transport_constant * (dt + h)`. Grid Diracs moving along
    /// characteristics carry snapping and time-quadrature errors that the
    /// diffusive bound does not cover.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardCheck {
    pub require_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquicontinuityCheck {
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowCheckSpec {
    pub restarts: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeCheck {
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CkCheckSpec {
    pub nodes: Vec<f64>,
    pub tol: f64,
    /// Run the check on a coarser grid with this many cells per axis.
    #[serde(default)]
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexExtensionCheckSpec {
    /// Equally weighted atoms of the sampled `ν`.
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub start: f64,
    /// Cellwise bound for `convex_extension` against the solver.
    #[serde(default)]
    pub extension_tol: Option<f64>,
    /// `d_v` bound for the selected flow against the weighted Dirac selections.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisintegrationCheck {
    /// Atoms of the disintegrated initial measure (equal weights).
    pub points: Vec<Vec<f64>>,
    pub tol: f64,
    /// The reconstruction is expected to fail (nonlinear equations).
    #[serde(default)]
    pub expect_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovCheck {
    pub constant: f64,
    pub slack: f64,
    pub moment_tol: f64,
    /// Evaluate the inequality at every `time_stride`-th node.
    #[serde(default = "default_stride")]
    pub time_stride: usize,
    #[serde(default)]
    pub expect_failure: bool,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessCheck {
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionCheck {
    pub which: Vec<String>,
    /// Clause names (`"N1.iv"`) that must fail for the check to pass.
    #[serde(default)]
    pub expected_failures: Vec<String>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON form; insensitive to formatting.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dimension, self.grid.half_extent, self.grid.cells)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.start, self.time.end, self.time.step)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            time_step: self.time.step,
            boundary: s.boundary,
            stepping: s.stepping,
            picard_tol: s.picard_tol,
            picard_max_iter: s.picard_max_iter,
            cfl_safety: s.cfl_safety,
            mass_tol: s.mass_tol,
            cons_tol: s.cons_tol,
        }
    }

    pub fn coefficient_field(&self, base: &Path) -> Result<CoefficientField> {
        match (&self.coefficients.builtin, &self.coefficients.file) {
            (Some(name), None) => builtin(name, self.grid.dimension, &self.coefficients.params),
            (None, Some(file)) => tabulated(&base.join(file), self.grid.dimension),
            _ => Err(Error::Scenario("coefficients need exactly one of `builtin` and `file`".into())),
        }
    }

    pub fn initial_measure(&self, base: &Path) -> Result<DiscreteMeasure> {
        build_initial(&self.initial, self.grid_spec()?, base)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        let grid = self.grid_spec()?;
        let tg = self.time_grid()?;
        if let Some(name) = &self.coefficients.builtin {
            if !BUILTIN_NAMES.contains(&name.as_str()) {
                return bad(format!("unknown built-in coefficient field `{name}`"));
            }
        }
        let s = &self.solver;
        for (what, v) in [("cfl_safety", s.cfl_safety), ("picard_tol", s.picard_tol), ("mass_tol", s.mass_tol), ("cons_tol", s.cons_tol)] {
            if !(v > 0.0) {
                return bad(format!("solver.{what} must be positive"));
            }
        }
        if self.selection.levels == 0 || !(self.selection.tie_tol >= 0.0) {
            return bad("selection.levels must be >= 1 and tie_tol >= 0".into());
        }
        let v = &self.verify;
        let mut tols: Vec<(&str, f64)> = Vec::new();
        if let Some(c) = &v.mass {
            tols.push(("mass.tol", c.tol));
        }
        if let Some(c) = &v.residual {
            tols.push(("residual.constant", c.constant));
            if let Some(t) = c.transport_constant {
                tols.push(("residual.transport_constant", t));
            }
        }
        if let Some(c) = &v.equicontinuity {
            tols.push(("equicontinuity.slack", c.slack));
        }
        for (what, c) in [("flow", &v.flow), ("admissibility", &v.admissibility)] {
            if let Some(c) = c {
                tols.push((what, c.tol));
                for &r in &c.restarts {
                    tg.index_of(r).map_err(|_| Error::Scenario(format!("{what} restart {r} is not a time node")))?;
                }
            }
        }
        if let Some(c) = &v.uniqueness_probe {
            tols.push(("uniqueness_probe.tol", c.tol));
        }
        if let Some(c) = &v.ck {
            tols.push(("ck.tol", c.tol));
            for &r in &c.nodes {
                tg.index_of(r).map_err(|_| Error::Scenario(format!("ck node {r} is not a time node")))?;
            }
        }
        if let Some(c) = &v.convex_extension {
            tols.push(("convex_extension.tol", c.tol));
            if let Some(t) = c.extension_tol {
                tols.push(("convex_extension.extension_tol", t));
            }
            tg.index_of(c.start).map_err(|_| Error::Scenario(format!("convex_extension start {} is not a time node", c.start)))?;
        }
        if let Some(c) = &v.disintegration {
            tols.push(("disintegration.tol", c.tol));
        }
        if let Some(c) = &v.lyapunov {
            tols.push(("lyapunov.slack", c.slack));
            tols.push(("lyapunov.moment_tol", c.moment_tol));
        }
        if let Some(c) = &v.tightness {
            if c.levels.iter().any(|l| !(*l > 0.0)) {
                return bad("tightness levels must be positive".into());
            }
        }
        if let Some((what, _)) = tols.iter().find(|(_, t)| !(*t > 0.0)) {
            return bad(format!("verify.{what} must be positive"));
        }
        if let InitialSpec::Dirac { point } = &self.initial {
            if grid.cell_containing(point).is_none() {
                return bad(format!("initial point {point:?} lies outside the grid"));
            }
        }
        Ok(())
    }
}

pub(crate) fn points_measure(grid: GridSpec, points: &[Vec<f64>], mass: f64) -> Result<DiscreteMeasure> {
    let cells = points
        .iter()
        .map(|p| grid.cell_containing(p).ok_or_else(|| Error::Scenario(format!("point {p:?} lies outside the grid"))))
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::uniform_on(grid, &cells, mass)
}

fn build_initial(spec: &InitialSpec, grid: GridSpec, base: &Path) -> Result<DiscreteMeasure> {
    match spec {
        InitialSpec::Dirac { point } => DiscreteMeasure::dirac(grid, point),
        InitialSpec::Gaussian { mean, variance } => DiscreteMeasure::gaussian(grid, mean, *variance),
        InitialSpec::Uniform { points, mass } => points_measure(grid, points, *mass),
        InitialSpec::Mixture { components } => {
            let mut w = vec![0.0; grid.num_cells()];
            for c in components {
                let mu = build_initial(&c.initial, grid, base)?;
                w.iter_mut().zip(mu.weights()).for_each(|(a, b)| *a += c.weight * b);
            }
            DiscreteMeasure::new(grid, w)
        }
        InitialSpec::File { path } => read_measure(&base.join(path), grid),
    }
}
