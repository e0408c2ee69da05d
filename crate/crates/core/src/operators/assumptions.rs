//! Sampling-based consistency checks of the standing assumptions. A passing
//! clause means the sampled quantities behave as the clause requires at the
//! recorded resolution; it is evidence, never a proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coefficients::{CoefficientField, Dependence, Mat2, Mode, Vec2};
use crate::measure::{DiscreteMeasure, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    A1,
    A2,
    B1,
    B2,
    N1,
}

/// Sampling resolution shared by all clauses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub time_samples: usize,
    pub space_samples: usize,
    /// Radii `R` of the compacts `[-R, R]^d` (clipped to the domain).
    pub radii: Vec<f64>,
    /// Growing half-ranges for the density argument in Nemytskii mode.
    pub density_ranges: Vec<f64>,
    /// Length of each probe sequence `ζ_n → ζ`.
    pub sequence_len: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            time_samples: 8,
            space_samples: 64,
            radii: vec![0.25, 0.5, 1.0],
            density_ranges: vec![1.0, 10.0, 100.0, 1000.0],
            sequence_len: 6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseVerdict {
    pub clause: String,
    pub passed: bool,
    /// The sampled quantity the verdict is based on.
    pub estimate: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub assumption: Assumption,
    pub coefficient: String,
    pub clauses: Vec<ClauseVerdict>,
    pub resolution: ProbeConfig,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseVerdict> {
        self.clauses.iter().find(|c| c.clause == name)
    }
}

const GROWTH_FACTOR: f64 = 2.0;
const CONTINUITY_RATIO: f64 = 0.8;
const FLAT_JUMP: f64 = 1e-12;

fn size(d: usize, a: &Mat2, b: &Vec2) -> f64 {
    let mut m = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            m = m.max(a[i][j].abs() + b[i].abs());
        }
    }
    m
}

struct Sampler<'a> {
    c: &'a CoefficientField,
    grid: GridSpec,
    times: Vec<f64>,
    cfg: &'a ProbeConfig,
}

impl<'a> Sampler<'a> {
    fn d(&self) -> usize {
        self.grid.dimension()
    }

    fn lattice(&self, radius: f64, m: usize) -> Vec<[f64; 2]> {
        let r = radius.min(self.grid.half_extent());
        let axis: Vec<f64> = (0..m).map(|i| -r + 2.0 * r * i as f64 / (m - 1) as f64).collect();
        if self.d() == 1 {
            axis.iter().map(|&x| [x, 0.0]).collect()
        } else {
            axis.iter().flat_map(|&x| axis.iter().map(move |&y| [x, y])).collect()
        }
    }

    fn eval(&self, t: f64, zeta: Option<&DiscreteMeasure>, x: &[f64; 2]) -> (Mat2, Vec2) {
        self.c.eval(t, zeta, &x[..self.d()]).expect("measure supplied for nonlinear modes")
    }

    /// Riemann estimate of `∫ sup_{x ∈ K_R, ζ ∈ probes} size dt`.
    fn integrated_sup(&self, radius: f64, probes: &[Option<&DiscreteMeasure>]) -> f64 {
        let span = self.times.last().unwrap() - self.times[0];
        let dt = span.max(1e-300) / self.times.len() as f64;
        let pts = self.lattice(radius, self.cfg.space_samples);
        self.times
            .iter()
            .map(|&t| {
                let mut m = 0.0f64;
                for z in probes {
                    for x in &pts {
                        let (a, b) = self.eval(t, *z, x);
                        m = m.max(size(self.d(), &a, &b));
                    }
                }
                m * dt
            })
            .sum()
    }

    fn sup_on(&self, radius: f64, probes: &[Option<&DiscreteMeasure>]) -> f64 {
        let pts = self.lattice(radius, self.cfg.space_samples);
        let mut m = 0.0f64;
        for &t in &self.times {
            for z in probes {
                for x in &pts {
                    let (a, b) = self.eval(t, *z, x);
                    m = m.max(size(self.d(), &a, &b));
                }
            }
        }
        m
    }

    /// Largest neighbor jump of `(a, b)` on an `m`-point lattice.
    fn max_jump(&self, t: f64, zeta: Option<&DiscreteMeasure>, m: usize) -> f64 {
        let pts = self.lattice(self.grid.half_extent(), m);
        let vals: Vec<(Mat2, Vec2)> = pts.iter().map(|x| self.eval(t, zeta, x)).collect();
        let d = self.d();
        let diff = |p: &(Mat2, Vec2), q: &(Mat2, Vec2)| {
            let mut s = 0.0;
            for i in 0..d {
                s += (p.1[i] - q.1[i]).abs();
                for j in 0..d {
                    s += (p.0[i][j] - q.0[i][j]).abs();
                }
            }
            s
        };
        let mut out = 0.0f64;
        for i in 0..pts.len() {
            let (ix, iy) = if d == 1 { (i, 0) } else { (i / m, i % m) };
            if ix + 1 < m {
                let j = if d == 1 { i + 1 } else { i + m };
                out = out.max(diff(&vals[i], &vals[j]));
            }
            if d == 2 && iy + 1 < m {
                out = out.max(diff(&vals[i], &vals[i + 1]));
            }
        }
        out
    }

    fn continuity_clause(&self, name: &str, probes: &[Option<&DiscreteMeasure>]) -> ClauseVerdict {
        let m = self.cfg.space_samples;
        let mut worst = 0.0f64;
        let mut worst_jump = 0.0f64;
        for &t in &self.times {
            for z in probes {
                let coarse = self.max_jump(t, *z, m);
                let fine = self.max_jump(t, *z, 2 * m - 1);
                if fine > FLAT_JUMP {
                    worst = worst.max(fine / coarse.max(FLAT_JUMP));
                    worst_jump = worst_jump.max(fine);
                }
            }
        }
        ClauseVerdict {
            clause: name.into(),
            passed: worst <= CONTINUITY_RATIO,
            estimate: worst,
            detail: format!(
                "max neighbor jump shrinks by factor {worst:.3} under lattice refinement \
                 ({m} -> {} points/axis); largest fine jump {worst_jump:.3e}",
                2 * m - 1
            ),
        }
    }

    fn compact_clause(&self, name: &str, probes: &[Option<&DiscreteMeasure>]) -> ClauseVerdict {
        let ests: Vec<f64> = self.cfg.radii.iter().map(|&r| self.integrated_sup(r, probes)).collect();
        let worst = ests.iter().copied().fold(0.0, f64::max);
        ClauseVerdict {
            clause: name.into(),
            passed: ests.iter().all(|e| e.is_finite()),
            estimate: worst,
            detail: format!("∫ sup_K (|a|+|b|) dt over K = [-R,R]^d, R in {:?}: {ests:?}", self.cfg.radii),
        }
    }

    fn global_clause(&self, name: &str, probes: &[Option<&DiscreteMeasure>]) -> ClauseVerdict {
        let sampled = self.sup_on(self.grid.half_extent(), probes);
        match self.c.meta.global_bound {
            Some(bound) => ClauseVerdict {
                clause: name.into(),
                passed: sampled <= bound * (1.0 + 1e-9) + 1e-12,
                estimate: sampled,
                detail: format!("sampled sup over the domain {sampled:.6e} vs declared global bound {bound:.6e}"),
            },
            None => {
                let inner = self.sup_on(0.5 * self.grid.half_extent(), probes);
                ClauseVerdict {
                    clause: name.into(),
                    passed: false,
                    estimate: sampled,
                    detail: format!(
                        "no global bound declared; sampled sup grows from {inner:.6e} (R = L/2) \
                         to {sampled:.6e} (R = L) on the truncated domain"
                    ),
                }
            }
        }
    }

    fn zeta_continuity_clause(&self, name: &str, sequences: &[ProbeSequence]) -> ClauseVerdict {
        let pts = self.lattice(self.cfg.radii.iter().copied().fold(0.0, f64::max), self.cfg.space_samples);
        let d = self.d();
        let mut worst = 0.0f64;
        let mut details = Vec::new();
        for (label, seq, limit) in sequences {
            let dev = |z: &DiscreteMeasure| {
                let mut m = 0.0f64;
                for &t in &self.times {
                    for x in &pts {
                        let (a0, b0) = self.eval(t, Some(limit), x);
                        let (a1, b1) = self.eval(t, Some(z), x);
                        for i in 0..d {
                            m = m.max((b0[i] - b1[i]).abs());
                            for j in 0..d {
                                m = m.max((a0[i][j] - a1[i][j]).abs());
                            }
                        }
                    }
                }
                m
            };
            let first = dev(&seq[0]);
            let last = dev(seq.last().unwrap());
            let ratio = if last <= FLAT_JUMP { 0.0 } else { last / first.max(FLAT_JUMP) };
            worst = worst.max(ratio);
            details.push(format!("{label}: {first:.3e} -> {last:.3e}"));
        }
        ClauseVerdict {
            clause: name.into(),
            passed: worst <= 0.25,
            estimate: worst,
            detail: format!("sup_K deviation along probe sequences: {}", details.join("; ")),
        }
    }
}

/// Probe measures and converging sequences, reproducible from the seed.
/// `(label, ζ_n, ζ)`.
type ProbeSequence = (String, Vec<DiscreteMeasure>, DiscreteMeasure);

fn probes(grid: &GridSpec, cfg: &ProbeConfig) -> (Vec<DiscreteMeasure>, Vec<ProbeSequence>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = grid.num_cells();
    let mut measures = vec![DiscreteMeasure::zero(*grid)];
    let center = grid.cell_containing(&[0.0, 0.0]).expect("origin in domain");
    measures.push(DiscreteMeasure::dirac_cell(*grid, center).expect("valid cell"));
    for _ in 0..3 {
        let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mass = rng.gen_range(0.5..1.0) / w.iter().sum::<f64>();
        w.iter_mut().for_each(|v| *v *= mass);
        measures.push(DiscreteMeasure::new(*grid, w).expect("random subprobability"));
    }
    let len = cfg.sequence_len.max(2);
    let mut sequences = Vec::new();
    let a = measures[2].clone();
    let b = measures[3].clone();
    let mix: Vec<DiscreteMeasure> = (1..=len)
        .map(|k| {
            let eps = 0.5f64.powi(k as i32);
            a.combine(1.0 - eps, &b, eps).expect("same grid")
        })
        .collect();
    sequences.push(("convex perturbation".to_string(), mix, a));
    let h = grid.cell_width();
    let limit = DiscreteMeasure::gaussian(*grid, &[0.0, 0.0], (4.0 * h).powi(2)).expect("gaussian");
    let shrink: Vec<DiscreteMeasure> = (1..=len)
        .map(|k| {
            let var = (4.0 * h).powi(2) + 0.5f64.powi(k as i32);
            DiscreteMeasure::gaussian(*grid, &[0.0, 0.0], var).expect("gaussian")
        })
        .collect();
    sequences.push(("narrowing Gaussians".to_string(), shrink, limit));
    (measures, sequences)
}

/// Sampled verdicts for each clause of `which` on `grid` over times in `[t0, t1]`.
pub fn validate_assumptions(
    c: &CoefficientField,
    which: Assumption,
    grid: &GridSpec,
    span: (f64, f64),
    cfg: &ProbeConfig,
) -> AssumptionReport {
    let k = cfg.time_samples.max(1);
    let times = (0..k).map(|i| span.0 + (span.1 - span.0) * (i as f64 + 0.5) / k as f64).collect();
    let s = Sampler { c, grid: *grid, times, cfg };
    let (measures, sequences) = probes(grid, cfg);
    let linear_probe = [None];
    let measure_probes: Vec<Option<&DiscreteMeasure>> = measures.iter().map(Some).collect();
    let probes: &[Option<&DiscreteMeasure>] = if c.is_linear() { &linear_probe } else { &measure_probes };
    let mut clauses = Vec::new();
    match which {
        Assumption::A1 | Assumption::A2 => {
            if !c.is_linear() {
                clauses.push(not_applicable(which, c.mode()));
            } else if which == Assumption::A1 {
                clauses.push(s.compact_clause("A1.i", probes));
                clauses.push(s.continuity_clause("A1.ii", probes));
            } else {
                clauses.push(s.global_clause("A2.i", probes));
                clauses.push(s.continuity_clause("A2.ii", probes));
            }
        }
        Assumption::B1 => {
            clauses.push(s.compact_clause("B1.i", probes));
            clauses.push(s.continuity_clause("B1.ii", probes));
            clauses.push(zeta_clause(&s, "B1.iii", &sequences));
        }
        Assumption::B2 => {
            clauses.push(s.global_clause("B2.i", probes));
            clauses.push(s.continuity_clause("B2.ii", probes));
            clauses.push(zeta_clause(&s, "B2.iii", &sequences));
        }
        Assumption::N1 => match &c.dependence {
            Dependence::Nemytskii { diffusion, drift } => {
                clauses.extend(nemytskii_clauses(&s, diffusion.as_ref(), drift.as_ref()));
            }
            _ => clauses.push(not_applicable(which, c.mode())),
        },
    }
    AssumptionReport { assumption: which, coefficient: c.name.clone(), clauses, resolution: cfg.clone() }
}

fn zeta_clause(s: &Sampler, name: &str, sequences: &[ProbeSequence]) -> ClauseVerdict {
    if s.c.is_linear() {
        return ClauseVerdict {
            clause: name.into(),
            passed: true,
            estimate: 0.0,
            detail: "coefficients do not depend on the measure".into(),
        };
    }
    s.zeta_continuity_clause(name, sequences)
}

fn not_applicable(which: Assumption, mode: Mode) -> ClauseVerdict {
    ClauseVerdict {
        clause: format!("{which:?}"),
        passed: false,
        estimate: f64::NAN,
        detail: format!("assumption does not apply to {} coefficients", mode.name()),
    }
}

fn nemytskii_clauses(
    s: &Sampler,
    diffusion: &(dyn Fn(f64, &[f64]) -> Mat2 + Send + Sync),
    drift: &(dyn Fn(f64, f64, &[f64]) -> Vec2 + Send + Sync),
) -> Vec<ClauseVerdict> {
    let d = s.d();
    let radius = s.cfg.radii.iter().copied().fold(0.0, f64::max);
    let m = s.cfg.space_samples;
    let pts = s.lattice(radius, m);
    let step = 2.0 * radius.min(s.grid.half_extent()) / (m - 1) as f64;

    // N1.i: sup of |a| and of its finite-difference gradient.
    let mut w1 = 0.0f64;
    let mut a_sup = 0.0f64;
    for &t in &s.times {
        for x in &pts {
            let a = diffusion(t, &x[..d]);
            let mut local = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    local = local.max(a[i][j].abs());
                }
            }
            a_sup = a_sup.max(local);
            for k in 0..d {
                let mut xp = *x;
                xp[k] += step;
                let ap = diffusion(t, &xp[..d]);
                for i in 0..d {
                    for j in 0..d {
                        local = local.max(((ap[i][j] - a[i][j]) / step).abs());
                    }
                }
            }
            w1 = w1.max(local);
        }
    }
    let n1i = ClauseVerdict {
        clause: "N1.i".into(),
        passed: w1.is_finite(),
        estimate: w1,
        detail: format!("sampled W^{{1,∞}} size of a on [-{radius},{radius}]^d"),
    };

    // N1.ii: extreme eigenvalues of a.
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &t in &s.times {
        for x in &pts {
            let a = diffusion(t, &x[..d]);
            let (l1, l2) = if d == 1 {
                (a[0][0], a[0][0])
            } else {
                let tr = a[0][0] + a[1][1];
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
                (0.5 * tr - disc, 0.5 * tr + disc)
            };
            lo = lo.min(l1);
            hi = hi.max(l2);
        }
    }
    let declared_ok = match s.c.meta.ellipticity {
        Some((l1, l2)) => lo >= l1 * (1.0 - 1e-9) && hi <= l2 * (1.0 + 1e-9),
        None => true,
    };
    let n1ii = ClauseVerdict {
        clause: "N1.ii".into(),
        passed: lo > 0.0 && declared_ok,
        estimate: lo,
        detail: format!("sampled eigenvalue range [{lo:.6e}, {hi:.6e}], declared {:?}", s.c.meta.ellipticity),
    };

    // Sup of |b̃| over growing density ranges; bounded if it stops growing.
    let sup_b = |range: f64| {
        let rs: Vec<f64> = (0..=m).map(|i| -range + 2.0 * range * i as f64 / m as f64).collect();
        let mut out = 0.0f64;
        for &t in &s.times {
            for x in &pts {
                for &r in &rs {
                    let b = drift(t, r, &x[..d]);
                    out = out.max(b[..d].iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
                }
            }
        }
        out
    };
    let sups: Vec<f64> = s.cfg.density_ranges.iter().map(|&r| sup_b(r)).collect();
    let n = sups.len();
    let bounded = n < 2 || sups[n - 1] <= GROWTH_FACTOR * sups[n - 2].max(1e-300);

    // Continuity in r: jumps shrink when the r-lattice is refined.
    let range = s.cfg.density_ranges.first().copied().unwrap_or(1.0);
    let jump = |k: usize| {
        let mut out = 0.0f64;
        for &t in &s.times {
            for x in &pts {
                let mut prev = drift(t, -range, &x[..d]);
                for i in 1..=k {
                    let r = -range + 2.0 * range * i as f64 / k as f64;
                    let b = drift(t, r, &x[..d]);
                    for c in 0..d {
                        out = out.max((b[c] - prev[c]).abs());
                    }
                    prev = b;
                }
            }
        }
        out
    };
    let (coarse, fine) = (jump(m), jump(2 * m));
    let r_ratio = if fine <= FLAT_JUMP { 0.0 } else { fine / coarse.max(FLAT_JUMP) };
    let n1iii = ClauseVerdict {
        clause: "N1.iii".into(),
        passed: r_ratio <= CONTINUITY_RATIO && bounded,
        estimate: *sups.last().unwrap_or(&0.0),
        detail: format!(
            "continuity in r: jump ratio {r_ratio:.3}; sup |b̃| over r in [-R_r, R_r] for R_r in {:?}: {sups:?}",
            s.cfg.density_ranges
        ),
    };

    let span = s.times.last().unwrap() - s.times[0];
    let dt = span.max(1e-300) / s.times.len() as f64;
    let integral = (a_sup + sups.last().copied().unwrap_or(0.0)) * dt * s.times.len() as f64;
    let n1iv = ClauseVerdict {
        clause: "N1.iv".into(),
        passed: bounded && integral.is_finite(),
        estimate: integral,
        detail: format!(
            "∫ sup_(r,x) (|a| + |b̃|) dt with r over all reals: density-range sups {sups:?} {}",
            if bounded { "saturate" } else { "keep growing" }
        ),
    };
    vec![n1i, n1ii, n1iii, n1iv]
}
