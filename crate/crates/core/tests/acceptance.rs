//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use fpkflow_core::family::{BranchingTransport, CandidateSet, FamilyGenerator};
use fpkflow_core::io::read_curve;
use fpkflow_core::lyapunov::{construct_lyapunov, markov_tail};
use fpkflow_core::markov::check_chapman_kolmogorov;
use fpkflow_core::measure::{dv_distance, DiscreteMeasure, Enumeration, GridSpec, TestFunctionFamily};
use fpkflow_core::par::Exec;
use fpkflow_core::scenario::{bundled, bundled_names, run_scenario, FamilySpec, RunOptions, RunReport, Scenario};
use fpkflow_core::selection::{select, select_flow, uniqueness_probe, verify_flow_property, ProbeVerdict, SelectionConfig};
use fpkflow_core::solver::{equicontinuity_check, solve_linear, Boundary};
use fpkflow_core::MeasureCurve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

struct BundledRun {
    reports: BTreeMap<String, RunReport>,
    dir: PathBuf,
    elapsed: Duration,
}

/// Every bundled scenario, run once with artifacts.
fn bundled_runs() -> &'static BundledRun {
    static RUNS: OnceLock<BundledRun> = OnceLock::new();
    RUNS.get_or_init(|| run_all(&std::env::temp_dir().join(format!("fpkflow-acceptance-{}", std::process::id()))))
}

fn run_all(dir: &Path) -> BundledRun {
    let start = Instant::now();
    let mut reports = BTreeMap::new();
    for name in bundled_names() {
        let opts = RunOptions { out_dir: Some(dir.join(name)), ..RunOptions::default() };
        let report = run_scenario(&bundled(name).unwrap(), Path::new("."), &opts).unwrap();
        reports.insert(name.to_string(), report);
    }
    BundledRun { reports, dir: dir.to_path_buf(), elapsed: start.elapsed() }
}

fn measured(r: &RunReport, check: &str, field: &str) -> serde_json::Value {
    r.verification(check).map(|v| v.measured[field].clone()).unwrap_or(serde_json::Value::Null)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// L1 distance between the heat solution at `t` and the exact Gaussian of
/// variance `t` centred at the Dirac cell centre, integrated over each cell.
fn heat_l1(cells: usize, dt: f64, t: f64) -> f64 {
    let mut sc = bundled("heat").unwrap();
    sc.grid.cells = cells;
    sc.time.step = dt;
    sc.time.end = t;
    let grid = sc.grid_spec().unwrap();
    let nu = DiscreteMeasure::dirac(grid, &[0.0]).unwrap();
    let m = grid.center(nu.charged_cells()[0])[0];
    let curve = solve_linear(&sc.coefficient_field(Path::new(".")).unwrap(), &nu, &sc.time_grid().unwrap(), &sc.solver_config()).unwrap();
    let h = grid.cell_width();
    let sd = t.sqrt();
    curve
        .last()
        .weights()
        .iter()
        .enumerate()
        .map(|(c, w)| {
            let x = grid.center(c)[0];
            let exact = normal_cdf((x + 0.5 * h - m) / sd) - normal_cdf((x - 0.5 * h - m) / sd);
            (w - exact).abs()
        })
        .sum()
}

fn solver_consistency() -> Outcome {
    let start = Instant::now();
    let coarse = heat_l1(256, 2f64.powi(-11), 0.5);
    let elapsed = start.elapsed();
    let fine = heat_l1(512, 2f64.powi(-13), 0.5);
    let ratio = fine / coarse;
    outcome(
        coarse <= 5e-2 && ratio <= 0.6 && elapsed < Duration::from_secs(10),
        format!("L1 {coarse:.3e} (<= 5e-2), refined {fine:.3e}, ratio {ratio:.3} (<= 0.6), {:.2}s (< 10s)", elapsed.as_secs_f64()),
    )
}

fn scenario_curve(sc: &Scenario) -> MeasureCurve {
    let base = Path::new(".");
    solve_linear(&sc.coefficient_field(base).unwrap(), &sc.initial_measure(base).unwrap(), &sc.time_grid().unwrap(), &sc.solver_config())
        .unwrap()
}

fn mass_laws() -> Outcome {
    let heat = scenario_curve(&bundled("heat").unwrap());
    let drift_sc = bundled("outward-drift").unwrap();
    assert_eq!(drift_sc.solver.boundary, Boundary::Absorbing);
    let drift = scenario_curve(&drift_sc);
    let dev = heat.mass_profile().iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    let profile = drift.mass_profile();
    let rise = profile.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let lost = profile[0] - profile[profile.len() - 1];
    outcome(
        dev <= 1e-8 && rise <= 1e-12 && lost > 0.0,
        format!("conservative |m-1| {dev:.2e} (<= 1e-8); absorbing max step rise {rise:.2e} (<= 1e-12), mass lost {lost:.3e}"),
    )
}

fn weak_residuals() -> Outcome {
    let runs = bundled_runs();
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (name, r) in &runs.reports {
        let ok = r.verification("weak-residual").is_some_and(|v| v.passed) && measured(r, "weak-residual", "defect_detected") == true;
        if !ok {
            bad.push(name.clone());
        }
        let ratio = measured(r, "weak-residual", "max_residual").as_f64().unwrap_or(f64::INFINITY)
            / measured(r, "weak-residual", "bound").as_f64().unwrap_or(0.0);
        worst = worst.max(ratio);
    }
    outcome(bad.is_empty(), format!("{} scenarios, worst residual/bound {worst:.3}, defects detected; failing {bad:?}", runs.reports.len()))
}

fn branching() -> (BranchingTransport, TestFunctionFamily, Enumeration, SelectionConfig) {
    let sc = bundled("branching-transport").unwrap();
    let FamilySpec::BranchingTransport { branch_times, mixture_weights } = sc.family.clone() else {
        panic!("branching scenario uses another generator")
    };
    let grid = sc.grid_spec().unwrap();
    let tg = sc.time_grid().unwrap();
    let gen = BranchingTransport::new(grid, tg, branch_times, mixture_weights).unwrap();
    let tf = TestFunctionFamily::build_symmetric(grid, sc.selection.levels).unwrap();
    let xi = Enumeration::on_nodes(tf.len(), tg.end(), tg.step(), sc.selection.enumeration_seed).unwrap();
    let cfg = SelectionConfig { tie_tol: sc.selection.tie_tol, min_trace_len: sc.selection.min_trace_len, exec: Exec::Parallel };
    (gen, tf, xi, cfg)
}

fn flow_property() -> Outcome {
    let start = Instant::now();
    let (gen, tf, xi, cfg) = branching();
    let tg = gen.time_grid();
    // every interior node is a restart; starts at 0 and at the first quarter
    let restarts: Vec<f64> = tg.nodes()[1..tg.steps()].to_vec();
    let initials = [(0.0, gen.origin_dirac()), (0.25, gen.origin_dirac())];
    let flow = select_flow(&gen, &initials, &tf, &xi, &cfg).unwrap();
    let rep = verify_flow_property(&flow, &gen, &tf, &xi, &cfg, &restarts, 1e-8).unwrap();
    let elapsed = start.elapsed();
    outcome(
        rep.passed && !rep.checks.is_empty() && elapsed < Duration::from_secs(30),
        format!("{} triples, max dv {:.2e} (<= 1e-8), {:.2}s (< 30s)", rep.checks.len(), rep.max_distance, elapsed.as_secs_f64()),
    )
}

fn uniqueness() -> Outcome {
    let (gen, tf, xi, cfg) = branching();
    let fam = gen.generate(0.0, &gen.origin_dirac()).unwrap();
    let probe = uniqueness_probe(&fam, &tf, &xi, &cfg, 1e-3).unwrap();
    let branching_ok = fam.len() >= 2 && tf.is_symmetric() && probe.verdict == ProbeVerdict::SelectionsDiffer && probe.sup_distance > 1e-3;

    let sc = bundled("heat").unwrap();
    let grid = sc.grid_spec().unwrap();
    let tg = sc.time_grid().unwrap();
    let heat_gen = fpkflow_core::family::SolverGenerator {
        coefficients: sc.coefficient_field(Path::new(".")).unwrap(),
        config: sc.solver_config(),
        time_grid: tg,
        picard_family: None,
    };
    let heat_fam = heat_gen.generate(0.0, &sc.initial_measure(Path::new(".")).unwrap()).unwrap();
    let htf = TestFunctionFamily::build_symmetric(grid, sc.selection.levels).unwrap();
    let picks: Vec<MeasureCurve> = [0u64, 1, 99]
        .iter()
        .map(|&seed| {
            let xi = Enumeration::on_nodes(htf.len(), tg.end(), tg.step(), seed).unwrap();
            select(&heat_fam, &htf, &xi, &cfg).unwrap().curve
        })
        .collect();
    let identical = heat_fam.len() == 1 && picks.windows(2).all(|w| w[0] == w[1]);
    outcome(
        branching_ok && identical,
        format!(
            "branching: {} vs {}, dv {:.3e} (> 1e-3); heat singleton selections bit-identical: {identical}",
            probe.first_selection, probe.second_selection, probe.sup_distance
        ),
    )
}

/// Recomputes every `G_k` in the trace from the family curves.
fn trace_is_sound(fam: &CandidateSet, tf: &TestFunctionFamily, xi: &Enumeration, cfg: &SelectionConfig) -> Result<usize, String> {
    let sel = select(fam, tf, xi, cfg).map_err(|e| e.to_string())?;
    let counts = sel.trace.survivor_counts();
    if !counts.windows(2).all(|w| w[1] <= w[0]) || counts.last() != Some(&1) {
        return Err(format!("survivor counts {counts:?}"));
    }
    let mut prev: Vec<usize> = (0..fam.len()).collect();
    for r in &sel.trace.records {
        let f = tf.members()[r.function].values().values();
        let g: Vec<f64> = prev
            .iter()
            .map(|&i| {
                let mu = fam.curves[i].state_at(r.time).unwrap();
                mu.weights().iter().zip(f).map(|(w, v)| w * v).sum()
            })
            .collect();
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mine = g[prev.iter().position(|&i| i == sel.index).ok_or("selected member eliminated")?];
        if mine < top - cfg.tie_tol {
            return Err(format!("step {}: selected {mine} below max {top}", r.k));
        }
        let survivors: Vec<usize> = prev.iter().zip(&g).filter(|(_, &v)| v >= top - cfg.tie_tol).map(|(&i, _)| i).collect();
        if survivors != r.survivors {
            return Err(format!("step {}: survivors {:?} vs recomputed {survivors:?}", r.k, r.survivors));
        }
        prev = survivors;
    }
    Ok(counts.len())
}

fn selection_structure() -> Outcome {
    let (gen, tf, xi, cfg) = branching();
    let mut steps = 0;
    let mut errors = Vec::new();
    for seed in [0u64, 1, 2, 3] {
        let xi = if seed == 0 {
            xi.clone()
        } else {
            Enumeration::on_nodes(tf.len(), gen.time_grid().end(), gen.time_grid().step(), seed).unwrap()
        };
        match trace_is_sound(&gen.generate(0.0, &gen.origin_dirac()).unwrap(), &tf, &xi, &cfg) {
            Ok(n) => steps += n,
            Err(e) => errors.push(e),
        }
    }
    for (name, r) in &bundled_runs().reports {
        let s = &r.selection;
        let counts: Vec<u64> = s["survivor_counts"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        if !(counts.windows(2).all(|w| w[1] <= w[0]) && counts.last() == Some(&1) && s["nested"] == true && s["maximal"] == true) {
            errors.push(format!("{name}: {counts:?}"));
        }
    }
    outcome(errors.is_empty(), format!("{steps} recomputed branching steps and all bundled traces; errors {errors:?}"))
}

fn chapman_kolmogorov() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut triples = 0;
    let mut ok = true;
    for name in ["heat", "ornstein-uhlenbeck", "time-dependent-ou"] {
        let sc = bundled(name).unwrap();
        let g = sc.grid_spec().unwrap();
        let grid = GridSpec::new(g.dimension(), g.half_extent(), 64).unwrap();
        let tg = sc.time_grid().unwrap();
        let cfg = sc.solver_config();
        let c = sc.coefficient_field(Path::new(".")).unwrap();
        // dyadic nodes at spacing 1/8
        let nodes: Vec<f64> = (0..).map(|k| k as f64 / 8.0).take_while(|&t| t <= tg.end()).collect();
        let rep = check_chapman_kolmogorov(&c, grid, &nodes, &tg, &cfg, 1e-10, Exec::Parallel).unwrap();
        worst = worst.max(rep.max_error);
        triples += rep.checks.len();
        ok &= rep.passed;
    }
    let elapsed = start.elapsed();
    outcome(
        ok && elapsed < Duration::from_secs(60),
        format!("{triples} triples on 64 cells, max entry error {worst:.2e} (<= 1e-10), {:.2}s (< 60s)", elapsed.as_secs_f64()),
    )
}

fn convex_extension() -> Outcome {
    let runs = &bundled_runs().reports;
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["heat", "ornstein-uhlenbeck", "time-dependent-ou"] {
        let r = &runs[name];
        let ext = measured(r, "convex-extension", "max_cell_error").as_f64().unwrap_or(f64::INFINITY);
        let flow = r.verification("flow-equals-convex-extension").map(|v| v.measured["max_distance"].as_f64().unwrap_or(f64::INFINITY));
        let flow = flow.unwrap_or(f64::INFINITY);
        ok &= ext <= 1e-12 && flow <= 1e-8;
        let dis = measured(r, "disintegration", "max_error").as_f64();
        if let Some(d) = dis {
            ok &= d <= 1e-10;
        }
        lines.push(format!("{name} ext {ext:.1e} flow {flow:.1e} disint {}", dis.map_or("-".into(), |d| format!("{d:.1e}"))));
    }
    let b = &runs["burgers-nemytskii"];
    let fails = measured(b, "disintegration", "reconstructed") == false;
    ok &= fails;
    lines.push(format!(
        "burgers disintegration error {:.2e}, reported failure: {fails}",
        measured(b, "disintegration", "max_error").as_f64().unwrap_or(0.0)
    ));
    outcome(ok, lines.join("; "))
}

fn fixed_point() -> Outcome {
    let r = &bundled_runs().reports["burgers-nemytskii"];
    let d: Vec<f64> = measured(r, "picard", "distances").as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    let last = d.last().copied().unwrap_or(f64::INFINITY);
    let residual = r.verification("weak-residual").is_some_and(|v| v.passed);
    outcome(
        monotone && last <= 1e-9 && d.len() <= 50 && residual,
        format!(
            "{} iterations (<= 50), monotone {monotone}, final distance {last:.2e} (<= 1e-9), frozen-linear residual passes {residual}",
            d.len()
        ),
    )
}

fn random_measure(rng: &mut ChaCha8Rng, grid: GridSpec) -> DiscreteMeasure {
    let n = grid.num_cells();
    let mut w = vec![0.0; n];
    for _ in 0..rng.gen_range(1..=8) {
        w[rng.gen_range(0..n)] += rng.gen::<f64>();
    }
    let scale = rng.gen_range(0.05..=1.0) / w.iter().sum::<f64>();
    DiscreteMeasure::new(grid, w.into_iter().map(|v| v * scale).collect()).unwrap()
}

/// Step function equal to 1 inside the first radius and `n` on the `n`-th shell.
fn step_oracle(radii: &[f64], r: f64) -> f64 {
    let inside = radii.iter().filter(|&&rn| rn < r).count();
    inside.max(1) as f64
}

fn lyapunov_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut errors = Vec::new();
    let mut tail_checks = 0;
    for (i, grid) in [GridSpec::new(1, 6.0, 120).unwrap(), GridSpec::new(2, 4.0, 24).unwrap()].into_iter().enumerate() {
        for trial in 0..500 {
            let nu = random_measure(&mut rng, grid);
            let v = construct_lyapunov(&nu).unwrap();
            let mass = nu.total_mass();
            let mut step_integral = 0.0;
            for c in 0..grid.num_cells() {
                let w = step_oracle(&v.radii, grid.center_radius(c));
                if v.values().values()[c] > w + 1e-12 {
                    errors.push(format!("grid {i} trial {trial} cell {c}: V > W"));
                }
                step_integral += nu.weights()[c] * w;
            }
            let first = nu.charged_cells().iter().filter(|&&c| grid.center_radius(c) <= v.radii[0]).map(|&c| nu.weights()[c]).sum::<f64>();
            let bound = (1..=v.radii.len()).map(|n| (n as f64).powi(-2)).sum::<f64>() * mass + first;
            if v.integral > bound + 1e-12 || step_integral > bound + 1e-12 {
                errors.push(format!("grid {i} trial {trial}: integral {} > {bound}", v.integral));
            }
            let level = rng.gen_range(0.5..8.0);
            let (tail, markov) = markov_tail(&nu, v.values(), level).unwrap();
            let oracle = (0..grid.num_cells()).filter(|&c| v.values().values()[c] >= level).map(|c| nu.weights()[c]).sum::<f64>();
            let rhs = (0..grid.num_cells()).map(|c| nu.weights()[c] * v.values().values()[c]).sum::<f64>() / level;
            if tail > markov || (tail - oracle).abs() > 1e-15 || oracle > rhs * (1.0 + 1e-15) {
                errors.push(format!("grid {i} trial {trial}: tail {tail} bound {markov}"));
            }
            tail_checks += 1;
        }
    }
    let ou = &bundled_runs().reports["ornstein-uhlenbeck"];
    let ou_ok = ou.verification("lyapunov").is_some_and(|v| v.passed) && measured(ou, "lyapunov", "expect_failure") == false;
    outcome(
        errors.is_empty() && ou_ok,
        format!(
            "{tail_checks} random measures (V <= W, integral bound, Markov tail); OU inequality excess {:.2e}, Gronwall excess {:.2e}; errors {:?}",
            measured(ou, "lyapunov", "inequality_max_excess").as_f64().unwrap_or(f64::NAN),
            measured(ou, "lyapunov", "moment_max_excess").as_f64().unwrap_or(f64::NAN),
            &errors[..errors.len().min(3)]
        ),
    )
}

fn metric_and_equicontinuity() -> Outcome {
    let grid = GridSpec::new(1, 3.0, 48).unwrap();
    let tf = TestFunctionFamily::build_symmetric(grid, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut min_slack = f64::INFINITY;
    let mut axioms = true;
    for _ in 0..1000 {
        let [a, b, c] = [(); 3].map(|_| random_measure(&mut rng, grid));
        let d = |x: &DiscreteMeasure, y: &DiscreteMeasure| dv_distance(x, y, &tf).unwrap().value;
        let (ab, bc, ac) = (d(&a, &b), d(&b, &c), d(&a, &c));
        axioms &= d(&a, &a) == 0.0 && ab == d(&b, &a) && ab >= 0.0 && (ab > 0.0 || a == b);
        min_slack = min_slack.min(ab + bc - ac);
    }
    let runs = bundled_runs();
    let mut worst = f64::NEG_INFINITY;
    let mut curves = 0;
    let mut eq_ok = true;
    for name in bundled_names() {
        let sc = bundled(name).unwrap();
        if !matches!(sc.family, FamilySpec::Solver) {
            continue;
        }
        let curve = read_curve(&runs.dir.join(name).join("selected-curve.csv")).unwrap();
        let tf = TestFunctionFamily::build_symmetric(sc.grid_spec().unwrap(), sc.selection.levels).unwrap();
        let c = sc.coefficient_field(Path::new(".")).unwrap();
        let rep = equicontinuity_check(&curve, &c, &tf, sc.solver.stepping, 1e-6).unwrap();
        worst = worst.max(rep.max_excess);
        eq_ok &= rep.passed;
        curves += 1;
    }
    outcome(
        axioms && min_slack >= -1e-14 && eq_ok,
        format!("1000 triples, min triangle slack {min_slack:.2e} (>= -1e-14); {curves} solver curves, max equicontinuity excess {worst:.2e} (slack 1e-6)"),
    )
}

fn determinism() -> Outcome {
    let first = bundled_runs();
    let dir = std::env::temp_dir().join(format!("fpkflow-acceptance-rerun-{}", std::process::id()));
    let second = run_all(&dir);
    let mut differing = Vec::new();
    for name in bundled_names() {
        if first.reports[name] != second.reports[name] {
            differing.push(format!("{name}/report"));
        }
        for artifact in &first.reports[name].artifacts {
            let a = std::fs::read(first.dir.join(name).join(artifact)).unwrap();
            let b = std::fs::read(dir.join(name).join(artifact)).unwrap();
            if a != b {
                differing.push(format!("{name}/{artifact}"));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let total = first.elapsed.max(second.elapsed);
    outcome(
        differing.is_empty() && total < Duration::from_secs(300),
        format!("{} scenarios rerun, differing artifacts {differing:?}, suite {:.1}s (< 300s)", first.reports.len(), total.as_secs_f64()),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 12] = [
        ("solver consistency", solver_consistency),
        ("mass laws", mass_laws),
        ("weak-residual certificate", weak_residuals),
        ("flow property", flow_property),
        ("uniqueness probe", uniqueness),
        ("selection structure", selection_structure),
        ("chapman-kolmogorov", chapman_kolmogorov),
        ("convex extension", convex_extension),
        ("nonlinear fixed point", fixed_point),
        ("lyapunov suite", lyapunov_suite),
        ("metric and equicontinuity", metric_and_equicontinuity),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failures += usize::from(!o.passed);
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    let _ = std::fs::remove_dir_all(&bundled_runs().dir);
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
