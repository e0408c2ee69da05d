use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::spec::{points_measure, FamilySpec, Scenario};
use crate::curve::MeasureCurve;
use crate::error::{Error, Result};
use crate::family::{check_flow_admissible, BranchingTransport, CandidateSet, FamilyGenerator, SolverGenerator};
use crate::io::{write_curve, write_curve_with, write_json, write_kernel, write_lyapunov};
use crate::lyapunov::{check_lyapunov_inequality, construct_lyapunov, moment_bound_check, tightness_certificate};
use crate::markov::{
    check_chapman_kolmogorov, check_flow_equals_convex_extension, convex_extension_initials, convex_extension_rows, disintegrate_linear,
    propagator,
};
use crate::measure::{DiscreteMeasure, Enumeration, GridSpec, TestFunctionFamily};
use crate::operators::{validate_assumptions, Assumption, CoefficientField, ProbeConfig};
use crate::par::Exec;
use crate::selection::{select, select_flow, uniqueness_probe, verify_flow_property, ProbeVerdict, Selection, SelectionConfig};
use crate::solver::{equicontinuity_check, solve_linear, solve_nonlinear_fixed_point, weak_residual, Boundary, SolverConfig};

/// Command-line overrides; applied before hashing.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub enumeration_seed: Option<u64>,
    pub tie_tol: Option<f64>,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub name: String,
    pub passed: bool,
    pub tolerance: f64,
    pub measured: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub config_hash: String,
    pub coefficients: String,
    pub mode: String,
    pub family: serde_json::Value,
    pub test_family_id: String,
    pub enumeration_id: String,
    pub selection: serde_json::Value,
    pub verifications: Vec<Verification>,
    pub artifacts: Vec<String>,
    pub passed: bool,
}

impl RunReport {
    pub fn verification(&self, name: &str) -> Option<&Verification> {
        self.verifications.iter().find(|v| v.name == name)
    }
}

struct Context<'a> {
    sc: &'a Scenario,
    grid: GridSpec,
    cfg: SolverConfig,
    c: CoefficientField,
    nu: DiscreteMeasure,
    tf: TestFunctionFamily,
    xi: Enumeration,
    sel_cfg: SelectionConfig,
    generator: Box<dyn FamilyGenerator>,
    family: CandidateSet,
    selection: Selection,
    exec: Exec,
    is_solver: bool,
}

impl Context<'_> {
    fn curve(&self) -> &MeasureCurve {
        &self.selection.curve
    }

    fn residual_bound(&self, constant: f64) -> f64 {
        let h = self.grid.cell_width();
        constant * (self.cfg.time_step + h * h)
    }

    fn require_linear(&self, what: &str) -> Result<()> {
        if self.c.is_linear() {
            Ok(())
        } else {
            Err(Error::Scenario(format!("verify.{what} needs linear coefficients, `{}` is {}", self.c.name, self.c.mode().name())))
        }
    }
}

fn check(name: &str, passed: bool, tolerance: f64, measured: serde_json::Value) -> Verification {
    Verification { name: name.into(), passed, tolerance, measured }
}

/// Loads a scenario file and runs it; relative paths resolve against the
/// file's directory.
pub fn run_scenario_file(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let sc = Scenario::from_path(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_scenario(&sc, base, opts)
}

/// Solves, selects and runs every configured verification. Report and data
/// files go to `opts.out_dir` when set.
pub fn run_scenario(scenario: &Scenario, base: &Path, opts: &RunOptions) -> Result<RunReport> {
    let mut sc = scenario.clone();
    if let Some(seed) = opts.enumeration_seed {
        sc.selection.enumeration_seed = seed;
    }
    if let Some(t) = opts.tie_tol {
        if !(t >= 0.0) {
            return Err(Error::Scenario(format!("tie tolerance {t} must be >= 0")));
        }
        sc.selection.tie_tol = t;
    }
    let sc = &sc;
    let grid = sc.grid_spec()?;
    let tg = sc.time_grid()?;
    let cfg = sc.solver_config();
    let c = sc.coefficient_field(base)?;
    let nu = sc.initial_measure(base)?;
    let tf = TestFunctionFamily::build_symmetric(grid, sc.selection.levels)?;
    let xi = Enumeration::on_nodes(tf.len(), tg.end(), tg.step(), sc.selection.enumeration_seed)?;
    let sel_cfg = SelectionConfig { tie_tol: sc.selection.tie_tol, min_trace_len: sc.selection.min_trace_len, exec: opts.exec };
    let (generator, is_solver): (Box<dyn FamilyGenerator>, bool) = match &sc.family {
        FamilySpec::Solver => (
            Box::new(SolverGenerator { coefficients: c.clone(), config: cfg.clone(), time_grid: tg, picard_family: Some(tf.clone()) }),
            true,
        ),
        FamilySpec::BranchingTransport { branch_times, mixture_weights } => {
            (Box::new(BranchingTransport::new(grid, tg, branch_times.clone(), mixture_weights.clone())?), false)
        }
    };
    let family = generator.generate(tg.start(), &nu)?;
    let selection = select(&family, &tf, &xi, &sel_cfg)?;
    let ctx = Context { sc, grid, cfg, c, nu, tf, xi, sel_cfg, generator, family, selection, exec: opts.exec, is_solver };

    let mut artifacts = Vec::new();
    let mut verifications = Vec::new();
    let out = opts.out_dir.as_deref();
    if let Some(dir) = out {
        let sel = &ctx.selection;
        write_json(&dir.join("selection.json"), &json!({ "index": sel.index, "label": sel.label, "trace": sel.trace }))?;
        artifacts.push("selection.json".to_string());
        let mut members = Vec::with_capacity(ctx.family.len());
        for (i, (curve, label)) in ctx.family.curves.iter().zip(&ctx.family.labels).enumerate() {
            let file = format!("family/member-{i}.csv");
            write_curve(&dir.join(&file), curve)?;
            members.push(json!({ "label": label, "curve": file }));
            artifacts.push(file);
        }
        let manifest = json!({
            "generator": ctx.generator.id(),
            "parameters": ctx.generator.parameters(),
            "kind": ctx.family.kind,
            "start": ctx.family.start,
            "members": members,
        });
        write_json(&dir.join("family/manifest.json"), &manifest)?;
        artifacts.push("family/manifest.json".to_string());
    }

    let v = &sc.verify;
    if let Some(m) = &v.mass {
        verifications.push(mass_check(&ctx, m.tol));
    }
    if let Some(r) = &v.residual {
        verifications.push(residual_check(&ctx, r.constant)?);
        if let Some(tc) = r.transport_constant {
            verifications.push(member_residual_check(&ctx, tc)?);
        }
    }
    if let Some(p) = &v.picard {
        verifications.push(picard_check(&ctx, p.require_monotone)?);
    }
    if let Some(e) = &v.equicontinuity {
        if !ctx.is_solver {
            return Err(Error::Scenario("verify.equicontinuity applies to solver families only".into()));
        }
        let rep = equicontinuity_check(ctx.curve(), &ctx.c, &ctx.tf, ctx.cfg.stepping, e.slack)?;
        verifications.push(check("equicontinuity", rep.passed, e.slack, serde_json::to_value(&rep)?));
    }
    if let Some(f) = &v.flow {
        let initials = [(tg.start(), ctx.nu.clone())];
        let flow = select_flow(ctx.generator.as_ref(), &initials, &ctx.tf, &ctx.xi, &ctx.sel_cfg)?;
        let rep = verify_flow_property(&flow, ctx.generator.as_ref(), &ctx.tf, &ctx.xi, &ctx.sel_cfg, &f.restarts, f.tol)?;
        let measured = json!({ "max_distance": rep.max_distance, "checks": rep.checks.len(), "selected": ctx.selection.label });
        verifications.push(check("flow-property", rep.passed, f.tol, measured));
    }
    if let Some(f) = &v.admissibility {
        let initials = [(tg.start(), ctx.nu.clone())];
        let rep = check_flow_admissible(ctx.generator.as_ref(), &initials, &f.restarts, &ctx.tf, f.tol)?;
        verifications.push(check("admissibility", rep.passed, f.tol, serde_json::to_value(&rep)?));
    }
    if let Some(p) = &v.uniqueness_probe {
        let rep = uniqueness_probe(&ctx.family, &ctx.tf, &ctx.xi, &ctx.sel_cfg, p.tol)?;
        let expected = if ctx.family.len() == 1 { ProbeVerdict::SelectionsCoincide } else { ProbeVerdict::SelectionsDiffer };
        verifications.push(check("uniqueness-probe", rep.verdict == expected, p.tol, serde_json::to_value(&rep)?));
    }
    if let Some(k) = &v.ck {
        ctx.require_linear("ck")?;
        let g = match k.cells {
            Some(n) => GridSpec::new(grid.dimension(), grid.half_extent(), n)?,
            None => grid,
        };
        let rep = check_chapman_kolmogorov(&ctx.c, g, &k.nodes, &tg, &ctx.cfg, k.tol, ctx.exec)?;
        let (first, last) =
            (k.nodes.iter().copied().fold(f64::INFINITY, f64::min), k.nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let kernel = propagator(&ctx.c, g, first, last, &tg, &ctx.cfg, ctx.exec)?;
        let rows_ok = match ctx.cfg.boundary {
            Boundary::Conservative => kernel.is_stochastic(ctx.cfg.cons_tol),
            Boundary::Absorbing => kernel.is_subprobability(ctx.cfg.mass_tol),
        };
        if let Some(dir) = out {
            write_kernel(&dir.join("kernel.csv"), &kernel)?;
            artifacts.push("kernel.csv".to_string());
        }
        let measured = json!({
            "max_error": rep.max_error,
            "triples": rep.checks.len(),
            "cells": g.num_cells(),
            "rows_valid": rows_ok,
            "min_row_sum": kernel.row_sums().into_iter().fold(f64::INFINITY, f64::min),
        });
        verifications.push(check("chapman-kolmogorov", rep.passed && rows_ok, k.tol, measured));
    }
    if let Some(x) = &v.convex_extension {
        verifications.extend(convex_extension_checks(&ctx, x)?);
    }
    if let Some(d) = &v.disintegration {
        let nu_d = points_measure(grid, &d.points, 1.0)?;
        let fam = ctx.generator.generate(tg.start(), &nu_d)?;
        if fam.len() != 1 {
            return Err(Error::Scenario("disintegration needs a single-member family".into()));
        }
        let rep = disintegrate_linear(&fam.curves[0], ctx.generator.as_ref(), d.tol, ctx.exec)?;
        let measured = json!({ "max_error": rep.max_error, "atoms": rep.atoms.len(), "reconstructed": rep.passed, "expect_failure": d.expect_failure });
        verifications.push(check("disintegration", rep.passed != d.expect_failure, d.tol, measured));
    }
    if v.lyapunov.is_some() || v.tightness.is_some() {
        let psi = construct_lyapunov(&ctx.nu)?;
        if let Some(dir) = out {
            write_lyapunov(&dir.join("lyapunov.csv"), &psi)?;
            artifacts.push("lyapunov.csv".to_string());
        }
        if let Some(l) = &v.lyapunov {
            ctx.require_linear("lyapunov")?;
            let times: Vec<f64> = ctx.curve().times().iter().step_by(l.time_stride.max(1)).copied().collect();
            let ineq = check_lyapunov_inequality(&ctx.c, &psi, l.constant, &times, l.slack)?;
            let moment = moment_bound_check(ctx.curve(), &psi, l.constant, l.moment_tol)?;
            let holds = ineq.passed && moment.passed;
            let measured = json!({
                "constant": l.constant,
                "inequality_max_excess": ineq.max_excess,
                "required_constant": ineq.required_constant,
                "witnesses": ineq.witnesses,
                "moment_max_excess": moment.max_excess,
                "moment_bound": "(∫ψ dν + 1) e^{C(t-s)} - 1, derived here from Lψ <= C + Cψ by Gronwall",
                "radii": psi.radii,
                "integral": psi.integral,
                "step_integral": psi.step_integral,
                "expect_failure": l.expect_failure,
            });
            verifications.push(check("lyapunov", holds != l.expect_failure, l.slack, measured));
        }
        if let Some(t) = &v.tightness {
            let rep = tightness_certificate(&ctx.family, tg.end(), psi.values(), &t.levels)?;
            let ok = rep.tails.iter().all(|b| b.observed <= b.bound);
            verifications.push(check("tightness", ok, 0.0, serde_json::to_value(&rep)?));
        }
    }
    if let Some(a) = &v.assumptions {
        verifications.push(assumption_check(&ctx, &a.which, &a.expected_failures, (tg.start(), tg.end()))?);
    }

    let passed = verifications.iter().all(|v| v.passed);
    if let Some(dir) = out {
        let residual = verifications.iter().find(|v| v.name == "weak-residual").map(|v| &v.measured);
        let meta = json!({
            "scenario": sc.name,
            "config_hash": sc.config_hash(),
            "config": sc,
            "coefficients": ctx.c.name,
            "test_family_id": ctx.tf.id(),
            "enumeration_id": ctx.xi.id(),
            "selected": ctx.selection.label,
            "residual": residual,
        });
        write_curve_with(&dir.join("selected-curve.csv"), ctx.curve(), meta)?;
        artifacts.insert(0, "selected-curve.csv".to_string());
    }
    let report = RunReport {
        scenario: sc.name.clone(),
        config_hash: sc.config_hash(),
        coefficients: ctx.c.name.clone(),
        mode: ctx.c.mode().name().to_string(),
        family: json!({
            "generator": ctx.generator.id(),
            "parameters": ctx.generator.parameters(),
            "size": ctx.family.len(),
            "labels": ctx.family.labels,
        }),
        test_family_id: ctx.tf.id(),
        enumeration_id: ctx.xi.id(),
        selection: json!({
            "index": ctx.selection.index,
            "label": ctx.selection.label,
            "steps": ctx.selection.trace.records.len(),
            "survivor_counts": ctx.selection.trace.survivor_counts(),
            "nested": ctx.selection.trace.is_nested(),
            "maximal": ctx.selection.trace.is_maximal_for(ctx.selection.index),
            "unresolved_ties": ctx.selection.trace.unresolved_ties,
            "tie_tol": ctx.sel_cfg.tie_tol,
        }),
        verifications,
        artifacts,
        passed,
    };
    if let Some(dir) = out {
        let mut with_self = report.clone();
        with_self.artifacts.push("report.json".into());
        write_json(&dir.join("report.json"), &with_self)?;
        return Ok(with_self);
    }
    Ok(report)
}

fn mass_check(ctx: &Context, tol: f64) -> Verification {
    let profile = ctx.curve().mass_profile();
    let m0 = profile[0];
    match ctx.cfg.boundary {
        Boundary::Conservative => {
            let dev = profile.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max);
            let from_one = profile.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
            check("mass", dev <= tol, tol, json!({ "boundary": "conservative", "max_deviation": dev, "max_deviation_from_one": from_one }))
        }
        Boundary::Absorbing => {
            let rise = profile.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            let lost = m0 - profile.last().copied().unwrap_or(m0);
            check("mass", rise <= tol, tol, json!({ "boundary": "absorbing", "max_step_increase": rise, "mass_lost": lost }))
        }
    }
}

fn residual_check(ctx: &Context, constant: f64) -> Result<Verification> {
    let curve = ctx.curve();
    let bound = ctx.residual_bound(constant);
    let rep = weak_residual(curve, &ctx.c, &ctx.tf, curve.start(), curve.end())?;
    // defect: halve the mass at the middle node
    let mid = curve.len() / 2;
    let halved = DiscreteMeasure::new(*curve.grid(), curve.states()[mid].weights().iter().map(|w| 0.5 * w).collect())?;
    let corrupted = curve.clone().with_state(mid, halved)?;
    let defect = weak_residual(&corrupted, &ctx.c, &ctx.tf, curve.start(), curve.end())?;
    let detected = defect.max_residual > bound;
    let measured = json!({
        "max_residual": rep.max_residual,
        "bound": bound,
        "argmax": rep.argmax,
        "defect_residual": defect.max_residual,
        "defect_detected": detected,
    });
    Ok(check("weak-residual", rep.max_residual <= bound && detected, bound, measured))
}

fn member_residual_check(ctx: &Context, constant: f64) -> Result<Verification> {
    if ctx.is_solver {
        return Err(Error::Scenario("verify.residual.transport_constant applies to generated transport families".into()));
    }
    let h = ctx.grid.cell_width();
    let bound = constant * (ctx.cfg.time_step + h);
    let mut members = Vec::with_capacity(ctx.family.len());
    let mut worst = 0.0f64;
    for (curve, label) in ctx.family.curves.iter().zip(&ctx.family.labels) {
        let rep = weak_residual(curve, &ctx.c, &ctx.tf, curve.start(), curve.end())?;
        worst = worst.max(rep.max_residual);
        members.push(json!({ "label": label, "max_residual": rep.max_residual, "argmax": rep.argmax }));
    }
    let measured = json!({ "max_residual": worst, "bound": bound, "members": members });
    Ok(check("member-residual", worst <= bound, bound, measured))
}

fn picard_check(ctx: &Context, require_monotone: bool) -> Result<Verification> {
    if ctx.c.is_linear() || !ctx.is_solver {
        return Err(Error::Scenario("verify.picard needs nonlinear coefficients with the solver family".into()));
    }
    let curve = ctx.curve();
    let tg = crate::curve::TimeGrid::new(curve.start(), curve.end(), ctx.cfg.time_step)?;
    let (again, trace) = solve_nonlinear_fixed_point(&ctx.c, &ctx.nu, &tg, &ctx.cfg, &ctx.tf)?;
    let converged = trace.distances.last().is_some_and(|&d| d <= ctx.cfg.picard_tol);
    let ok = converged && trace.iterations() <= ctx.cfg.picard_max_iter && (!require_monotone || trace.is_monotone()) && &again == curve;
    let measured = json!({
        "iterations": trace.iterations(),
        "distances": trace.distances,
        "monotone": trace.is_monotone(),
        "max_iterations": ctx.cfg.picard_max_iter,
    });
    Ok(check("picard", ok, ctx.cfg.picard_tol, measured))
}

fn convex_extension_checks(ctx: &Context, x: &super::spec::ConvexExtensionCheckSpec) -> Result<Vec<Verification>> {
    let mut out = Vec::new();
    let nu_mix = points_measure(ctx.grid, &x.points, 1.0)?;
    if ctx.is_solver {
        ctx.require_linear("convex_extension")?;
        let tg = ctx.generator.time_grid().restricted(x.start)?;
        let ext = convex_extension_rows(&ctx.c, &nu_mix, &tg, &ctx.cfg, ctx.exec)?;
        let direct = solve_linear(&ctx.c, &nu_mix, &tg, &ctx.cfg)?;
        let err = ext.states().iter().zip(direct.states()).map(|(a, b)| a.max_abs_diff(b)).try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))?;
        let tol = x.extension_tol.unwrap_or(1e-12);
        let mut measured = json!({ "max_cell_error": err, "atoms": nu_mix.charged_cells().len() });
        let mut ok = err <= tol;
        if let Some(r) = &ctx.sc.verify.residual {
            let rep = weak_residual(&ext, &ctx.c, &ctx.tf, ext.start(), ext.end())?;
            let bound = ctx.residual_bound(r.constant);
            measured["extension_residual"] = json!(rep.max_residual);
            ok &= rep.max_residual <= bound;
        }
        out.push(check("convex-extension", ok, tol, measured));
    }
    let samples = [(x.start, nu_mix)];
    let initials = convex_extension_initials(&samples)?;
    let flow = select_flow(ctx.generator.as_ref(), &initials, &ctx.tf, &ctx.xi, &ctx.sel_cfg)?;
    let rep = check_flow_equals_convex_extension(&flow, &samples, &ctx.tf, x.tol)?;
    out.push(check("flow-equals-convex-extension", rep.passed, x.tol, serde_json::to_value(&rep)?));
    Ok(out)
}

fn assumption_check(ctx: &Context, which: &[String], expected_failures: &[String], span: (f64, f64)) -> Result<Verification> {
    let cfg = ProbeConfig { seed: ctx.sc.seed, ..ProbeConfig::default() };
    let mut reports = Vec::new();
    let mut ok = true;
    for name in which {
        let a = match name.as_str() {
            "A1" => Assumption::A1,
            "A2" => Assumption::A2,
            "B1" => Assumption::B1,
            "B2" => Assumption::B2,
            "N1" => Assumption::N1,
            other => return Err(Error::Scenario(format!("unknown assumption `{other}`"))),
        };
        let rep = validate_assumptions(&ctx.c, a, &ctx.grid, span, &cfg);
        for clause in &rep.clauses {
            ok &= clause.passed != expected_failures.contains(&clause.clause);
        }
        reports.push(rep);
    }
    for f in expected_failures {
        if !reports.iter().any(|r| r.clause(f).is_some()) {
            return Err(Error::Scenario(format!("expected failure `{f}` names no probed clause")));
        }
    }
    Ok(check("assumptions", ok, 0.0, json!({ "reports": reports, "expected_failures": expected_failures })))
}
