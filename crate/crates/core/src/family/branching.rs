use std::collections::BTreeMap;

use super::generator::{CandidateSet, FamilyGenerator, FamilyKind};
use crate::curve::{MeasureCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, GridSpec};

/// Candidate families for `∂_t μ + ∂_x(b μ) = 0` with `b(x) = 3 sign(x)|x|^{2/3}`,
/// whose characteristics through 0 are `x ≡ 0` and `x(t) = (t - r)³` for any
/// release time `r`.
///
/// Released mass sits on the lattice `x_j = (j dt)³`, `j` = number of steps
/// since release, each point snapped to its cell. The construction requires
/// the lattice cells to be pairwise distinct and different from the origin
/// cell, so that a state determines the elapsed time of every atom and
/// restarting from any reachable state reproduces the continuation exactly.
#[derive(Debug, Clone)]
pub struct BranchingTransport {
    grid: GridSpec,
    time_grid: TimeGrid,
    branch_times: Option<Vec<f64>>,
    mixture_weights: Vec<f64>,
    origin: usize,
    lattice: Vec<usize>,
    elapsed: BTreeMap<usize, usize>,
}

impl BranchingTransport {
    /// `time_grid` starts at 0; `branch_times = None` allows release at every
    /// node up to `T - 2 dt` (a release at `T - dt` differs from staying only
    /// at `T`, a time the enumeration never visits).
    pub fn new(grid: GridSpec, time_grid: TimeGrid, branch_times: Option<Vec<f64>>, mixture_weights: Vec<f64>) -> Result<Self> {
        if grid.dimension() != 1 {
            return Err(Error::Scenario("branching transport is one-dimensional".into()));
        }
        if mixture_weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Scenario("mixture weights must lie in [0, 1]".into()));
        }
        if let Some(bt) = &branch_times {
            for &r in bt {
                let k = time_grid.index_of(r)?;
                if k + 1 > time_grid.steps() {
                    return Err(Error::Scenario(format!("branch time {r} must precede the horizon")));
                }
            }
        }
        let origin = grid.cell_containing(&[0.0]).expect("origin in domain");
        let dt = time_grid.step();
        let mut lattice = Vec::with_capacity(time_grid.steps() + 1);
        let mut elapsed = BTreeMap::new();
        for j in 0..=time_grid.steps() {
            let x = (j as f64 * dt).powi(3);
            let cell = grid
                .cell_containing(&[x])
                .ok_or_else(|| Error::Scenario(format!("transported point {x} leaves the domain [-{0}, {0}]", grid.half_extent())))?;
            if elapsed.insert(cell, j).is_some() {
                return Err(Error::Scenario(format!(
                    "lattice points (j dt)^3 are not resolved by cells of width {}: step {j} repeats a cell \
                     (need dt^3 >= h/2 and 7 dt^3 > h)",
                    grid.cell_width()
                )));
            }
            lattice.push(cell);
        }
        Ok(Self { grid, time_grid, branch_times, mixture_weights, origin, lattice, elapsed })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn origin_cell(&self) -> usize {
        self.origin
    }

    /// Cell of the mass released `j` steps ago.
    pub fn lattice_cell(&self, j: usize) -> usize {
        self.lattice[j]
    }

    /// Unit Dirac in the origin cell.
    pub fn origin_dirac(&self) -> DiscreteMeasure {
        DiscreteMeasure::dirac_cell(self.grid, self.origin).expect("origin cell exists")
    }

    /// The family from `(s, ν)` where `ν` must be the unit Dirac at the origin.
    pub fn branch_family(&self, s: f64, nu: &DiscreteMeasure) -> Result<CandidateSet> {
        if nu != &self.origin_dirac() {
            return Err(Error::Inadmissible("branch families start from the unit Dirac at 0".into()));
        }
        self.generate(s, nu)
    }

    fn branch_indices(&self, ks: usize) -> Result<Vec<usize>> {
        let last = self.time_grid.steps().saturating_sub(2);
        match &self.branch_times {
            None => Ok((ks..=last).collect()),
            Some(bt) => {
                let mut out: Vec<usize> =
                    bt.iter().map(|&r| self.time_grid.index_of(r)).collect::<Result<Vec<_>>>()?.into_iter().filter(|&k| k >= ks).collect();
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
        }
    }
}

impl FamilyGenerator for BranchingTransport {
    fn id(&self) -> String {
        "branching-transport".into()
    }

    fn parameters(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": self.grid,
            "time_grid": self.time_grid,
            "branch_times": self.branch_times,
            "mixture_weights": self.mixture_weights,
        })
    }

    fn horizon(&self) -> f64 {
        self.time_grid.end()
    }

    fn time_grid(&self) -> TimeGrid {
        self.time_grid
    }

    fn generate(&self, s: f64, nu: &DiscreteMeasure) -> Result<CandidateSet> {
        if nu.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let ks = self.time_grid.index_of(s)?;
        let tg = self.time_grid.restricted(s)?;
        let steps = tg.steps();
        let mut at_origin = 0.0;
        let mut atoms = Vec::new();
        for cell in nu.charged_cells() {
            let w = nu.weights()[cell];
            if cell == self.origin {
                at_origin = w;
                continue;
            }
            match self.elapsed.get(&cell) {
                Some(&j) if j <= ks => atoms.push((j, w)),
                Some(&j) => {
                    return Err(Error::Inadmissible(format!("mass in cell {cell} would have been released {j} steps before time {s}")))
                }
                None => return Err(Error::Inadmissible(format!("cell {cell} is neither the origin nor on a transport characteristic"))),
            }
        }
        let n = self.grid.num_cells();
        let base: Vec<Vec<f64>> = (0..=steps)
            .map(|m| {
                let mut w = vec![0.0; n];
                for &(j, a) in &atoms {
                    w[self.lattice[j + m]] += a;
                }
                w
            })
            .collect();
        let build = |origin_path: &dyn Fn(usize) -> Vec<(usize, f64)>| -> Result<MeasureCurve> {
            let states = (0..=steps)
                .map(|m| {
                    let mut w = base[m].clone();
                    for (cell, a) in origin_path(m) {
                        w[cell] += a;
                    }
                    DiscreteMeasure::new(self.grid, w)
                })
                .collect::<Result<Vec<_>>>()?;
            MeasureCurve::new(tg.nodes(), states)
        };
        let mut curves = Vec::new();
        let mut labels = Vec::new();
        if at_origin > 0.0 {
            let origin = self.origin;
            let release = |kr: usize, m: usize| -> usize {
                let k = ks + m;
                if k <= kr {
                    origin
                } else {
                    self.lattice[k - kr]
                }
            };
            curves.push(build(&|_| vec![(origin, at_origin)])?);
            labels.push("stay".to_string());
            let branches = self.branch_indices(ks)?;
            for &kr in &branches {
                curves.push(build(&|m| vec![(release(kr, m), at_origin)])?);
                labels.push(format!("release@{}", self.time_grid.node(kr)));
            }
            for &lambda in &self.mixture_weights {
                for &kr in &branches {
                    curves.push(build(&|m| vec![(origin, lambda * at_origin), (release(kr, m), (1.0 - lambda) * at_origin)])?);
                    labels.push(format!("mix{lambda}@{}", self.time_grid.node(kr)));
                }
            }
        } else {
            curves.push(build(&|_| Vec::new())?);
            labels.push("transport".to_string());
        }
        CandidateSet::new(s, nu.clone(), curves, labels, self.id(), FamilyKind::Probability)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator(branch_times: Option<Vec<f64>>, weights: Vec<f64>) -> BranchingTransport {
        let g = GridSpec::new(1, 1.25, 801).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 0.125).unwrap();
        BranchingTransport::new(g, tg, branch_times, weights).unwrap()
    }

    #[test]
    fn minimal_family_has_stay_and_immediate_release() {
        let b = generator(Some(vec![0.0]), vec![]);
        let fam = b.branch_family(0.0, &b.origin_dirac()).unwrap();
        assert_eq!(fam.labels, vec!["stay", "release@0"]);
    }

    #[test]
    fn released_mass_follows_the_cubic() {
        let b = generator(None, vec![]);
        let fam = b.branch_family(0.0, &b.origin_dirac()).unwrap();
        let release = &fam.curves[1];
        let g = b.grid();
        for (t, state) in release.times().iter().zip(release.states()) {
            let cell = g.cell_containing(&[t.powi(3)]).unwrap();
            assert_eq!(state.weights()[cell], 1.0);
        }
    }

    #[test]
    fn restart_from_released_state_is_a_single_transport() {
        let b = generator(None, vec![]);
        let fam = b.branch_family(0.0, &b.origin_dirac()).unwrap();
        let release = &fam.curves[2]; // release@0.125
        let r = 0.5;
        let restart = b.generate(r, release.state_at(r).unwrap()).unwrap();
        assert_eq!(restart.len(), 1);
        assert_eq!(restart.curves[0], release.restrict(r).unwrap());
    }

    #[test]
    fn unreachable_or_off_lattice_states_are_inadmissible() {
        let b = generator(None, vec![]);
        let g = *b.grid();
        let off = DiscreteMeasure::dirac(g, &[-0.5]).unwrap();
        assert!(matches!(b.generate(0.0, &off), Err(Error::Inadmissible(_))));
        assert!(b.branch_family(0.0, &off).is_err());
        let far = DiscreteMeasure::dirac_cell(g, b.lattice_cell(5)).unwrap();
        assert!(matches!(b.generate(0.25, &far), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = GridSpec::new(1, 1.25, 101).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 0.125).unwrap();
        assert!(BranchingTransport::new(g, tg, None, vec![]).is_err());
    }
}
