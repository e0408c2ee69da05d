//! Transition kernels of linear equations, Chapman-Kolmogorov checks, convex
//! extension of Dirac-indexed flows and discrete disintegration.

use serde::{Deserialize, Serialize};

use crate::curve::{MeasureCurve, TimeGrid, NODE_TOL};
use crate::error::{Error, Result};
use crate::family::FamilyGenerator;
use crate::measure::{dv_distance, DiscreteMeasure, GridSpec, TestFunctionFamily};
use crate::operators::CoefficientField;
use crate::par::{map_range, Exec};
use crate::selection::SelectedFlow;
use crate::solver::{solve_linear, SolverConfig};

/// `K[y][x]`: mass in cell `x` at `target` from a unit Dirac in cell `y` at `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionKernel {
    pub source: f64,
    pub target: f64,
    grid: GridSpec,
    entries: Vec<f64>,
}

impl TransitionKernel {
    pub fn identity(grid: GridSpec, time: f64) -> Self {
        let n = grid.num_cells();
        let mut entries = vec![0.0; n * n];
        (0..n).for_each(|i| entries[i * n + i] = 1.0);
        Self { source: time, target: time, grid, entries }
    }

    pub fn from_rows(source: f64, target: f64, grid: GridSpec, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.num_cells();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { source, target, grid, entries: rows.concat() })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn size(&self) -> usize {
        self.grid.num_cells()
    }

    pub fn row(&self, y: usize) -> &[f64] {
        let n = self.size();
        &self.entries[y * n..(y + 1) * n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.size()).map(|y| self.row(y).iter().sum()).collect()
    }

    /// Nonnegative entries and row sums `<= 1 + mass_tol`.
    pub fn is_subprobability(&self, mass_tol: f64) -> bool {
        self.entries.iter().all(|&v| v >= 0.0) && self.row_sums().iter().all(|&s| s <= 1.0 + mass_tol)
    }

    pub fn is_stochastic(&self, cons_tol: f64) -> bool {
        self.entries.iter().all(|&v| v >= 0.0) && self.row_sums().iter().all(|&s| (s - 1.0).abs() <= cons_tol)
    }

    /// `K(s, r) K(r, t)`.
    pub fn compose(&self, next: &TransitionKernel, exec: Exec) -> Result<TransitionKernel> {
        if self.grid != next.grid {
            return Err(Error::GridMismatch);
        }
        if (self.target - next.source).abs() > NODE_TOL {
            return Err(Error::InvalidTimeGrid(format!(
                "cannot compose kernels ending at {} and starting at {}",
                self.target, next.source
            )));
        }
        let n = self.size();
        let rows = map_range(n, exec, |y| {
            let mut out = vec![0.0; n];
            for (z, &w) in self.row(y).iter().enumerate() {
                if w != 0.0 {
                    out.iter_mut().zip(next.row(z)).for_each(|(o, k)| *o += w * k);
                }
            }
            out
        });
        Ok(Self { source: self.source, target: next.target, grid: self.grid, entries: rows.concat() })
    }

    /// `ν K`.
    pub fn push_forward(&self, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if nu.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![0.0; self.size()];
        for (y, &w) in nu.weights().iter().enumerate() {
            if w != 0.0 {
                out.iter_mut().zip(self.row(y)).for_each(|(o, k)| *o += w * k);
            }
        }
        Ok(DiscreteMeasure::from_raw(self.grid, out))
    }

    pub fn max_abs_diff(&self, other: &TransitionKernel) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self.entries.iter().zip(&other.entries).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Kernels `K(s, t)` for a fixed source `s` and several targets `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFamily {
    pub source: f64,
    pub kernels: Vec<TransitionKernel>,
}

impl KernelFamily {
    pub fn times(&self) -> Vec<f64> {
        self.kernels.iter().map(|k| k.target).collect()
    }

    pub fn at(&self, t: f64) -> Result<&TransitionKernel> {
        self.kernels.iter().find(|k| (k.target - t).abs() <= NODE_TOL).ok_or(Error::NotANode(t))
    }
}

/// Solves from every Dirac cell at `s` on the nodes of `tg` and keeps the
/// states at `targets` (all `>= s`). Rows are computed independently.
pub fn kernel_family(
    c: &CoefficientField,
    grid: GridSpec,
    s: f64,
    targets: &[f64],
    tg: &TimeGrid,
    cfg: &SolverConfig,
    exec: Exec,
) -> Result<KernelFamily> {
    if !c.is_linear() {
        return Err(Error::NotLinear { mode: c.mode().name() });
    }
    let ks = tg.index_of(s)?;
    let idx: Vec<usize> = targets.iter().map(|&t| tg.index_of(t)).collect::<Result<_>>()?;
    if let Some(&bad) = idx.iter().find(|&&k| k < ks) {
        return Err(Error::InvalidTimeGrid(format!("target {} precedes source {s}", tg.node(bad))));
    }
    let n = grid.num_cells();
    let needs_solve = idx.iter().any(|&k| k > ks);
    let rows: Vec<Vec<Vec<f64>>> = map_range(n, exec, |y| {
        let dirac = DiscreteMeasure::dirac_cell(grid, y)?;
        if !needs_solve {
            return Ok(vec![dirac.weights().to_vec(); idx.len()]);
        }
        let curve = solve_linear(c, &dirac, &tg.restricted(s)?, cfg)?;
        Ok(idx.iter().map(|&k| curve.states()[k - ks].weights().to_vec()).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let kernels = idx
        .iter()
        .enumerate()
        .map(|(m, &k)| TransitionKernel {
            source: tg.node(ks),
            target: tg.node(k),
            grid,
            entries: rows.iter().flat_map(|r| r[m].iter().copied()).collect(),
        })
        .collect();
    Ok(KernelFamily { source: tg.node(ks), kernels })
}

/// `K(s, t)` with rows `solve_linear(δ_y)` evaluated at `t`.
pub fn propagator(
    c: &CoefficientField,
    grid: GridSpec,
    s: f64,
    t: f64,
    tg: &TimeGrid,
    cfg: &SolverConfig,
    exec: Exec,
) -> Result<TransitionKernel> {
    Ok(kernel_family(c, grid, s, &[t], tg, cfg, exec)?.kernels.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkCheck {
    pub s: f64,
    pub r: f64,
    pub t: f64,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapmanKolmogorovReport {
    pub checks: Vec<CkCheck>,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// `K(s, t) = K(s, r) K(r, t)` for every triple `s <= r <= t` of `nodes`.
///
/// One kernel family per source node covers all triples.
pub fn check_chapman_kolmogorov(
    c: &CoefficientField,
    grid: GridSpec,
    nodes: &[f64],
    tg: &TimeGrid,
    cfg: &SolverConfig,
    tol: f64,
    exec: Exec,
) -> Result<ChapmanKolmogorovReport> {
    let mut nodes = nodes.to_vec();
    nodes.sort_by(f64::total_cmp);
    let families: Vec<KernelFamily> =
        (0..nodes.len()).map(|i| kernel_family(c, grid, nodes[i], &nodes[i..], tg, cfg, exec)).collect::<Result<_>>()?;
    let mut checks = Vec::new();
    for i in 0..nodes.len() {
        for j in i..nodes.len() {
            for k in j..nodes.len() {
                let direct = &families[i].kernels[k - i];
                let composed = families[i].kernels[j - i].compose(&families[j].kernels[k - j], exec)?;
                checks.push(CkCheck { s: nodes[i], r: nodes[j], t: nodes[k], max_error: direct.max_abs_diff(&composed)? });
            }
        }
    }
    let max_error = checks.iter().map(|c| c.max_error).fold(0.0, f64::max);
    Ok(ChapmanKolmogorovReport { checks, max_error, tolerance: tol, passed: max_error <= tol })
}

/// `t ↦ Σ_y ν(y) K(s, t)[y][·]` over the targets of `family`.
pub fn convex_extension(family: &KernelFamily, nu: &DiscreteMeasure) -> Result<MeasureCurve> {
    let states = family.kernels.iter().map(|k| k.push_forward(nu)).collect::<Result<_>>()?;
    MeasureCurve::new(family.times(), states)
}

/// `Σ_y ν(y) μ^{s,δ_y}` from the kernel rows of the charged cells only,
/// on the nodes of `tg` (which starts at `s`).
pub fn convex_extension_rows(
    c: &CoefficientField,
    nu: &DiscreteMeasure,
    tg: &TimeGrid,
    cfg: &SolverConfig,
    exec: Exec,
) -> Result<MeasureCurve> {
    let grid = *nu.grid();
    let atoms = nu.charged_cells();
    let rows: Vec<MeasureCurve> = map_range(atoms.len(), exec, |i| solve_linear(c, &DiscreteMeasure::dirac_cell(grid, atoms[i])?, tg, cfg))
        .into_iter()
        .collect::<Result<_>>()?;
    let states = (0..=tg.steps())
        .map(|k| {
            let mut w = vec![0.0; grid.num_cells()];
            for (&y, row) in atoms.iter().zip(&rows) {
                let a = nu.weights()[y];
                w.iter_mut().zip(row.states()[k].weights()).for_each(|(o, v)| *o += a * v);
            }
            DiscreteMeasure::from_raw(grid, w)
        })
        .collect();
    MeasureCurve::new(tg.nodes(), states)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisintegrationReport {
    /// Charged cells `y` with weights `ν(y)`.
    pub atoms: Vec<(usize, f64)>,
    pub curves: Vec<MeasureCurve>,
    /// `max_t max_x |Σ_y ν(y) μ^y_t(x) - μ_t(x)|`.
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Splits `curve` into the curves generated from the Dirac masses of its
/// initial state and checks `Σ_y ν(y) μ^y_t = μ_t` at every node.
///
/// Each atom must yield a single-member family. A curve that is not a
/// superposition of its Dirac solutions (e.g. from a nonlinear equation) is
/// reported through `passed = false`.
pub fn disintegrate_linear(curve: &MeasureCurve, generator: &dyn FamilyGenerator, tol: f64, exec: Exec) -> Result<DisintegrationReport> {
    let nu = curve.initial();
    let grid = *nu.grid();
    let s = curve.start();
    let atoms: Vec<(usize, f64)> = nu.charged_cells().into_iter().map(|y| (y, nu.weights()[y])).collect();
    let curves: Vec<MeasureCurve> = map_range(atoms.len(), exec, |i| {
        let family = generator.generate(s, &DiscreteMeasure::dirac_cell(grid, atoms[i].0)?)?;
        match family.curves.len() {
            1 => Ok(family.curves.into_iter().next().unwrap()),
            m => Err(Error::Inadmissible(format!("Dirac at cell {} has {m} solutions", atoms[i].0))),
        }
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut max_error: f64 = 0.0;
    for (k, (&t, state)) in curve.times().iter().zip(curve.states()).enumerate() {
        let mut sum = vec![0.0; grid.num_cells()];
        for ((_, w), c) in atoms.iter().zip(&curves) {
            let other = c.states().get(k).filter(|_| (c.times()[k] - t).abs() <= NODE_TOL).ok_or(Error::NotANode(t))?;
            sum.iter_mut().zip(other.weights()).for_each(|(o, v)| *o += w * v);
        }
        let err = sum.iter().zip(state.weights()).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        max_error = max_error.max(err);
    }
    Ok(DisintegrationReport { atoms, curves, max_error, tolerance: tol, passed: max_error <= tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexExtensionCheck {
    pub start: f64,
    pub atoms: usize,
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexExtensionReport {
    pub checks: Vec<ConvexExtensionCheck>,
    pub max_distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Initial conditions a selected flow must cover to compare `(s, ν)` with
/// the Dirac selections at the charged cells of `ν`.
pub fn convex_extension_initials(samples: &[(f64, DiscreteMeasure)]) -> Result<Vec<(f64, DiscreteMeasure)>> {
    let mut out: Vec<(f64, DiscreteMeasure)> = Vec::new();
    for (s, nu) in samples {
        let mut push = |m: DiscreteMeasure| {
            if !out.iter().any(|(s2, m2)| s2 == s && *m2 == m) {
                out.push((*s, m));
            }
        };
        push(nu.clone());
        for y in nu.charged_cells() {
            push(DiscreteMeasure::dirac_cell(*nu.grid(), y)?);
        }
    }
    Ok(out)
}

/// `d_v(μ^{s,ν}_t, Σ_y ν(y) μ^{s,δ_y}_t)` at every node, all selections
/// read from one flow (same test family and enumeration).
pub fn check_flow_equals_convex_extension(
    flow: &SelectedFlow,
    samples: &[(f64, DiscreteMeasure)],
    tf: &TestFunctionFamily,
    tol: f64,
) -> Result<ConvexExtensionReport> {
    if flow.test_family_id != tf.id() {
        return Err(Error::Scenario("selected flow was built with a different test family".into()));
    }
    let missing = |s: f64| Error::Inadmissible(format!("selected flow does not cover an initial condition at s = {s}"));
    let mut checks = Vec::new();
    for (s, nu) in samples {
        let whole = &flow.get(*s, nu).ok_or_else(|| missing(*s))?.selection.curve;
        let grid = *nu.grid();
        let parts: Vec<(f64, &MeasureCurve)> = nu
            .charged_cells()
            .into_iter()
            .map(|y| {
                let e = flow.get(*s, &DiscreteMeasure::dirac_cell(grid, y)?).ok_or_else(|| missing(*s))?;
                Ok((nu.weights()[y], &e.selection.curve))
            })
            .collect::<Result<_>>()?;
        let mut max_distance: f64 = 0.0;
        for (k, state) in whole.states().iter().enumerate() {
            let mut sum = vec![0.0; grid.num_cells()];
            for (w, c) in &parts {
                sum.iter_mut().zip(c.states()[k].weights()).for_each(|(o, v)| *o += w * v);
            }
            let mixed = DiscreteMeasure::from_raw(grid, sum);
            max_distance = max_distance.max(dv_distance(state, &mixed, tf)?.value);
        }
        checks.push(ConvexExtensionCheck { start: *s, atoms: parts.len(), max_distance });
    }
    let max_distance = checks.iter().map(|c| c.max_distance).fold(0.0, f64::max);
    Ok(ConvexExtensionReport { checks, max_distance, tolerance: tol, passed: max_distance <= tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{BranchingTransport, SolverGenerator};
    use crate::measure::Enumeration;
    use crate::operators::{builtin, Params};
    use crate::selection::{select_flow, SelectionConfig};
    use crate::solver::Boundary;

    fn heat_setup() -> (CoefficientField, GridSpec, TimeGrid, SolverConfig) {
        let g = GridSpec::new(1, 2.0, 64).unwrap();
        let cfg = SolverConfig { time_step: 1.0 / 512.0, ..SolverConfig::default() };
        let tg = cfg.time_grid(0.0, 0.125).unwrap();
        (builtin("heat", 1, &Params::new()).unwrap(), g, tg, cfg)
    }

    #[test]
    fn equal_times_give_the_identity() {
        let (c, g, tg, cfg) = heat_setup();
        let k = propagator(&c, g, 0.0, 0.0, &tg, &cfg, Exec::Parallel).unwrap();
        assert_eq!(k, TransitionKernel::identity(g, 0.0));
    }

    #[test]
    fn conservative_rows_are_stochastic() {
        let g = GridSpec::new(1, 3.0, 64).unwrap();
        let c = builtin("ornstein-uhlenbeck", 1, &Params::new()).unwrap();
        let cfg = SolverConfig { time_step: 1.0 / 512.0, boundary: Boundary::Conservative, ..SolverConfig::default() };
        let tg = cfg.time_grid(0.0, 0.25).unwrap();
        let k = propagator(&c, g, 0.0, 0.25, &tg, &cfg, Exec::Parallel).unwrap();
        assert!(k.is_stochastic(1e-12));
    }

    #[test]
    fn chapman_kolmogorov_holds_for_time_dependent_drift() {
        let (_, g, tg, cfg) = heat_setup();
        let c = builtin("time-dependent-ou", 1, &Params::new()).unwrap();
        let nodes: Vec<f64> = (0..=4).map(|k| k as f64 / 32.0).collect();
        let rep = check_chapman_kolmogorov(&c, g, &nodes, &tg, &cfg, 1e-10, Exec::Parallel).unwrap();
        assert_eq!(rep.checks.len(), 35);
        assert!(rep.passed, "{}", rep.max_error);
    }

    #[test]
    fn convex_extension_matches_the_solver() {
        let (c, g, tg, cfg) = heat_setup();
        let fam = kernel_family(&c, g, 0.0, &tg.nodes(), &tg, &cfg, Exec::Parallel).unwrap();
        let nu = DiscreteMeasure::uniform_on(g, &[20, 31, 40], 1.0).unwrap();
        let ext = convex_extension(&fam, &nu).unwrap();
        let direct = solve_linear(&c, &nu, &tg, &cfg).unwrap();
        for (a, b) in ext.states().iter().zip(direct.states()) {
            assert!(a.max_abs_diff(b).unwrap() <= 1e-12);
        }
        let rows = convex_extension_rows(&c, &nu, &tg, &cfg, Exec::Sequential).unwrap();
        assert_eq!(rows, ext);
        let one = convex_extension(&fam, &DiscreteMeasure::dirac_cell(g, 31).unwrap()).unwrap();
        assert_eq!(one.last().weights(), fam.kernels.last().unwrap().row(31));
    }

    #[test]
    fn disintegration_reconstructs_linear_curves_only() {
        let (c, g, tg, cfg) = heat_setup();
        let gen = SolverGenerator { coefficients: c.clone(), config: cfg.clone(), time_grid: tg, picard_family: None };
        let nu = DiscreteMeasure::uniform_on(g, &[20, 31, 40], 1.0).unwrap();
        let curve = solve_linear(&c, &nu, &tg, &cfg).unwrap();
        let rep = disintegrate_linear(&curve, &gen, 1e-10, Exec::Parallel).unwrap();
        assert_eq!(rep.atoms.len(), 3);
        assert!(rep.passed, "{}", rep.max_error);
        let corrupted = curve.clone().with_state(3, nu.clone()).unwrap();
        assert!(!disintegrate_linear(&corrupted, &gen, 1e-10, Exec::Parallel).unwrap().passed);
    }

    #[test]
    fn branching_selection_at_a_two_atom_measure_is_the_mixture() {
        let g = GridSpec::new(1, 1.25, 801).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 0.125).unwrap();
        let b = BranchingTransport::new(g, tg, None, vec![]).unwrap();
        let tf = TestFunctionFamily::build_symmetric(g, 4).unwrap();
        let xi = Enumeration::on_nodes(tf.len(), 1.0, 0.125, 0).unwrap();
        let w = [(b.origin_cell(), 0.5), (b.lattice_cell(2), 0.5)];
        let mut weights = vec![0.0; g.num_cells()];
        w.iter().for_each(|&(c, m)| weights[c] = m);
        // mass released two steps before s = 0.25 sits on lattice cell 2
        let samples = vec![(0.25, b.origin_dirac()), (0.25, DiscreteMeasure::new(g, weights).unwrap())];
        let initials = convex_extension_initials(&samples).unwrap();
        let flow = select_flow(&b, &initials, &tf, &xi, &SelectionConfig::default()).unwrap();
        let rep = check_flow_equals_convex_extension(&flow, &samples, &tf, 1e-8).unwrap();
        assert!(rep.passed, "{}", rep.max_distance);
    }
}
