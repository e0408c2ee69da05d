use fpkflow_core::curve::MeasureCurve;
use fpkflow_core::family::{BranchingTransport, CandidateSet, FamilyGenerator, FamilyKind};
use fpkflow_core::lyapunov::markov_tail;
use fpkflow_core::markov::{convex_extension, kernel_family};
use fpkflow_core::measure::{dv_distance, integrate, DiscreteMeasure, Enumeration, GridFunction, GridSpec, TestFunctionFamily};
use fpkflow_core::operators::{builtin, Params};
use fpkflow_core::par::Exec;
use fpkflow_core::selection::{select, SelectionConfig};
use fpkflow_core::solver::{solve_linear, SolverConfig};
use fpkflow_core::TimeGrid;
use proptest::prelude::*;

const CELLS: usize = 16;

fn grid() -> GridSpec {
    GridSpec::new(1, 2.0, CELLS).unwrap()
}

fn family() -> TestFunctionFamily {
    TestFunctionFamily::build_symmetric(grid(), 3).unwrap()
}

/// Subprobability weights: raw nonnegative values scaled to the given mass.
fn measure() -> impl Strategy<Value = DiscreteMeasure> {
    (prop::collection::vec(0.0f64..1.0, CELLS), 0.0f64..=1.0).prop_map(|(raw, mass)| {
        let total: f64 = raw.iter().sum();
        let w = if total > 0.0 { raw.iter().map(|v| v * mass / total).collect() } else { vec![0.0; CELLS] };
        DiscreteMeasure::new(grid(), w).unwrap()
    })
}

fn cell_path(len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..CELLS, len)
}

fn dirac_curve(cells: &[usize], t0: f64) -> MeasureCurve {
    let times = (0..cells.len()).map(|k| t0 + 0.125 * k as f64).collect();
    let states = cells.iter().map(|&c| DiscreteMeasure::dirac_cell(grid(), c).unwrap()).collect();
    MeasureCurve::new(times, states).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dv_is_a_metric(a in measure(), b in measure(), c in measure()) {
        let f = family();
        let d = |x: &DiscreteMeasure, y: &DiscreteMeasure| dv_distance(x, y, &f).unwrap().value;
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-14);
    }

    #[test]
    fn integration_is_bilinear(a in measure(), b in measure(), phi in prop::collection::vec(-3.0f64..3.0, CELLS),
                               psi in prop::collection::vec(-3.0f64..3.0, CELLS), s in 0.0f64..1.0) {
        let g = grid();
        let (phi, psi) = (GridFunction::new(g, phi).unwrap(), GridFunction::new(g, psi).unwrap());
        let mix = a.combine(s, &b, 1.0 - s).unwrap();
        let lhs = integrate(&mix, &phi).unwrap();
        let rhs = s * integrate(&a, &phi).unwrap() + (1.0 - s) * integrate(&b, &phi).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
        let sum = phi.combine(2.0, &psi, -0.5).unwrap();
        let rhs = 2.0 * integrate(&a, &phi).unwrap() - 0.5 * integrate(&a, &psi).unwrap();
        prop_assert!((integrate(&a, &sum).unwrap() - rhs).abs() <= 1e-12);
    }

    #[test]
    fn enumeration_is_a_bijection_with_nested_tails(nf in 1usize..12, nt in 1usize..10, seed in 0u64..1000, cut in 0usize..10) {
        let xi = Enumeration::on_nodes(nf, nt as f64, 1.0, seed).unwrap();
        let mut seen = vec![false; nf * nt];
        for k in 0..xi.len() {
            let (n, j) = xi.pair(k);
            prop_assert!(!seen[n * nt + j]);
            seen[n * nt + j] = true;
            prop_assert_eq!(xi.index_of(n, j), Some(k));
        }
        let s = (cut % nt) as f64;
        let later = xi.subsequence(s).unwrap();
        prop_assert_eq!(later.len(), nf * (nt - cut % nt));
        prop_assert!(later.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(later.iter().all(|&k| xi.pair_time(k).1 >= s));
        // positions after a later start are a subset
        if s + 1.0 < nt as f64 {
            let later2 = xi.subsequence(s + 1.0).unwrap();
            prop_assert!(later2.iter().all(|k| later.contains(k)));
        }
    }

    #[test]
    fn concatenation_is_associative(a in cell_path(7), b_tail in cell_path(4), c_tail in cell_path(2)) {
        let (r, q) = (0.25, 0.5);
        let mu = dirac_curve(&a, 0.0);
        let mut b = vec![a[2]];
        b.extend(&b_tail);
        let eta = dirac_curve(&b, r);
        let mut c = vec![b[2]];
        c.extend(&c_tail);
        // c covers [q, q + 0.25]; pad to the end of eta
        c.push(c_tail[1]);
        let zeta = dirac_curve(&c, q);
        let left = mu.concatenate(&eta, r).unwrap().concatenate(&zeta, q).unwrap();
        let right = mu.concatenate(&eta.concatenate(&zeta, q).unwrap(), r).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn solver_preserves_positivity_and_is_linear(a in measure(), b in measure(), s in 0.0f64..1.0) {
        let c = builtin("ornstein-uhlenbeck", 1, &Params::new()).unwrap();
        let cfg = SolverConfig { time_step: 1.0 / 64.0, ..SolverConfig::default() };
        let tg = TimeGrid::new(0.0, 0.25, cfg.time_step).unwrap();
        let ua = solve_linear(&c, &a, &tg, &cfg).unwrap();
        let ub = solve_linear(&c, &b, &tg, &cfg).unwrap();
        let mix = a.combine(s, &b, 1.0 - s).unwrap();
        let um = solve_linear(&c, &mix, &tg, &cfg).unwrap();
        for k in 0..ua.len() {
            prop_assert!(um.states()[k].weights().iter().all(|&w| w >= 0.0));
            let expect = ua.states()[k].combine(s, &ub.states()[k], 1.0 - s).unwrap();
            prop_assert!(um.states()[k].max_abs_diff(&expect).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn convex_extension_is_affine(a in measure(), b in measure(), s in 0.0f64..1.0) {
        let c = builtin("heat", 1, &Params::new()).unwrap();
        let cfg = SolverConfig { time_step: 1.0 / 64.0, ..SolverConfig::default() };
        let tg = TimeGrid::new(0.0, 0.125, cfg.time_step).unwrap();
        let fam = kernel_family(&c, grid(), 0.0, &tg.nodes(), &tg, &cfg, Exec::Sequential).unwrap();
        let mix = a.combine(s, &b, 1.0 - s).unwrap();
        let (ea, eb, em) = (convex_extension(&fam, &a).unwrap(), convex_extension(&fam, &b).unwrap(), convex_extension(&fam, &mix).unwrap());
        for k in 0..em.len() {
            let expect = ea.states()[k].combine(s, &eb.states()[k], 1.0 - s).unwrap();
            prop_assert!(em.states()[k].max_abs_diff(&expect).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn markov_tail_inequality(mu in measure(), psi in prop::collection::vec(0.0f64..10.0, CELLS), c in 0.01f64..10.0) {
        let psi = GridFunction::new(grid(), psi).unwrap();
        let (tail, bound) = markov_tail(&mu, &psi, c).unwrap();
        prop_assert!(tail <= bound + 1e-15);
    }

    #[test]
    fn selection_is_deterministic_and_order_invariant(seed in 0u64..500, rot in 0usize..8) {
        let g = GridSpec::new(1, 1.25, 801).unwrap();
        let b = BranchingTransport::new(g, TimeGrid::new(0.0, 1.0, 0.125).unwrap(), None, vec![]).unwrap();
        let tf = TestFunctionFamily::build_symmetric(g, 4).unwrap();
        let xi = Enumeration::on_nodes(tf.len(), 1.0, 0.125, seed).unwrap();
        let fam = b.generate(0.0, &b.origin_dirac()).unwrap();
        let cfg = SelectionConfig { tie_tol: 0.0, ..SelectionConfig::default() };
        let first = select(&fam, &tf, &xi, &cfg).unwrap();
        let again = select(&fam, &tf, &xi, &SelectionConfig { exec: Exec::Sequential, ..cfg.clone() }).unwrap();
        prop_assert_eq!(&first, &again);
        prop_assert!(first.trace.is_nested());
        prop_assert!(first.trace.is_maximal_for(first.index));
        let mut curves = fam.curves.clone();
        let mut labels = fam.labels.clone();
        let shift = rot % curves.len();
        curves.rotate_left(shift);
        labels.rotate_left(shift);
        let rotated = CandidateSet::new(0.0, fam.initial.clone(), curves, labels, fam.generator_id.clone(), FamilyKind::Probability).unwrap();
        let other = select(&rotated, &tf, &xi, &cfg).unwrap();
        prop_assert_eq!(other.label, first.label);
        prop_assert_eq!(other.curve, first.curve);
    }
}
