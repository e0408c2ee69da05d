use std::path::Path;

use fpkflow_core::scenario::{bundled, bundled_names, run_scenario, run_scenario_file, RunOptions, Scenario};
use fpkflow_core::Error;

fn opts(dir: &Path) -> RunOptions {
    RunOptions { out_dir: Some(dir.to_path_buf()), ..RunOptions::default() }
}

#[test]
fn every_bundled_scenario_passes() {
    for name in bundled_names() {
        let dir = tempfile::tempdir().unwrap();
        let sc = bundled(name).unwrap();
        let report = run_scenario(&sc, Path::new("."), &opts(dir.path())).unwrap();
        let failed: Vec<_> = report.verifications.iter().filter(|v| !v.passed).map(|v| v.name.as_str()).collect();
        assert!(report.passed, "{name}: {failed:?}");
        assert!(dir.path().join("report.json").is_file());
        assert!(dir.path().join("selected-curve.csv").is_file());
    }
}

#[test]
fn reruns_are_identical() {
    let sc = bundled("branching-transport").unwrap();
    let a = run_scenario(&sc, Path::new("."), &RunOptions::default()).unwrap();
    let b = run_scenario(&sc, Path::new("."), &RunOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oversized_time_step_is_rejected() {
    let mut sc = bundled("heat").unwrap();
    sc.time.step = 0.0625;
    match run_scenario(&sc, Path::new("."), &RunOptions::default()) {
        Err(Error::CflViolation { dt, limit }) => assert!(dt > limit),
        other => panic!("expected a CFL violation, got {other:?}"),
    }
}

#[test]
fn hash_ignores_formatting_and_tracks_values() {
    let text = include_str!("../scenarios/heat.toml");
    let a = Scenario::from_toml(text).unwrap();
    let reformatted = text.replace("cells = 256", "cells=256").replace("end = 0.5", "end   =   5e-1");
    let b = Scenario::from_toml(&format!("# comment\n{reformatted}")).unwrap();
    assert_eq!(a.config_hash(), b.config_hash());
    let c = Scenario::from_toml(&text.replace("seed = 11", "seed = 12")).unwrap();
    assert_ne!(a.config_hash(), c.config_hash());
    let d = Scenario::from_toml(&text.replace("tie_tol = 1e-9", "tie_tol = 1e-8")).unwrap();
    assert_ne!(a.config_hash(), d.config_hash());
}

#[test]
fn cli_overrides_enter_the_hash() {
    let sc = bundled("branching-transport").unwrap();
    let base = run_scenario(&sc, Path::new("."), &RunOptions::default()).unwrap();
    let seeded = run_scenario(&sc, Path::new("."), &RunOptions { enumeration_seed: Some(7), ..RunOptions::default() }).unwrap();
    assert_ne!(base.config_hash, seeded.config_hash);
    assert_ne!(base.enumeration_id, seeded.enumeration_id);
}

#[test]
fn malformed_input_is_an_error() {
    let text = include_str!("../scenarios/heat.toml");
    assert!(matches!(Scenario::from_toml(&text.replace("[grid]", "[grid]\nbogus = 1")), Err(Error::Scenario(_))));
    assert!(matches!(Scenario::from_toml("name = 3"), Err(Error::Scenario(_))));
    assert!(Scenario::from_toml(&text.replace("cells = 256", "cells = 0")).is_err());
    assert!(Scenario::from_toml(&text.replace("builtin = \"heat\"", "builtin = \"no-such-field\"")).is_err());
    assert!(run_scenario_file(Path::new("does/not/exist.toml"), &RunOptions::default()).is_err());
}

#[test]
fn scenario_files_resolve_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("init.csv"), "cell,weight\n120,0.5\n136,0.5\n").unwrap();
    let text = include_str!("../scenarios/heat.toml").replace("kind = \"dirac\"\npoint = [0.0]", "kind = \"file\"\npath = \"init.csv\"");
    let path = dir.path().join("from-file.toml");
    std::fs::write(&path, text).unwrap();
    let out = dir.path().join("out");
    let report = run_scenario_file(&path, &opts(&out)).unwrap();
    assert_eq!(report.scenario, "heat");
    assert!(report.verification("mass").unwrap().passed);
}

#[test]
fn transport_members_are_certified_separately() {
    let sc = bundled("branching-transport").unwrap();
    let report = run_scenario(&sc, Path::new("."), &RunOptions::default()).unwrap();
    let v = report.verification("member-residual").unwrap();
    assert!(v.passed);
    assert_eq!(v.measured["members"].as_array().unwrap().len(), report.family["size"].as_u64().unwrap() as usize);

    let mut strict = sc.clone();
    strict.verify.residual.as_mut().unwrap().transport_constant = Some(1.0);
    let report = run_scenario(&strict, Path::new("."), &RunOptions::default()).unwrap();
    assert!(!report.verification("member-residual").unwrap().passed);
    assert!(!report.passed);

    let mut misplaced = bundled("heat").unwrap();
    misplaced.verify.residual.as_mut().unwrap().transport_constant = Some(1.0);
    assert!(run_scenario(&misplaced, Path::new("."), &RunOptions::default()).is_err());
}
