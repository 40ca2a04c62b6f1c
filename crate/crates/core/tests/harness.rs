use std::fs;

use sraf::config::{load_config, load_sweep, parse_config};
use sraf::harness::{
    format_experiment_csv, format_sweep_csv, run_experiment, run_sweep, write_experiment_outputs,
    write_sweep_outputs, AlgorithmSpec, ExperimentConfig, RuleKind, RunOptions, SweepConfig,
    SweepGrid, EXPERIMENT_CSV, MANIFEST, SWEEP_CSV,
};
use sraf::signals::write_signal;
use sraf::Error;

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.structure.m = 32;
    c.structure.n = 2;
    c.structure.l = 16;
    c.structure.attenuation_db = 40.0;
    c.run.n_samples = 6_000;
    c.run.runs = 4;
    c.run.base_seed = 5;
    c.run.flip_at = Some(3_000);
    c.noise.pr = 0.01;
    c.algorithms = vec![
        AlgorithmSpec::new("NSAF", RuleKind::Nsaf, 0.5, 0.0),
        AlgorithmSpec::new("SSAF", RuleKind::Sign, 0.01, 0.0),
        AlgorithmSpec::new("MCC-SAF", RuleKind::Mcc, 0.5, 20.0),
        AlgorithmSpec::new("LC-SAF", RuleKind::Lc, 0.5, 20.0),
    ];
    c
}

#[test]
fn results_are_reproducible_and_thread_independent() {
    let c = small();
    let a = run_experiment(&c, RunOptions::serial()).unwrap();
    let b = run_experiment(&c, RunOptions::serial()).unwrap();
    let p = run_experiment(&c, RunOptions { threads: 3 }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, p);
    assert_eq!(a.blocks(), 3_000);
    assert_eq!(a.traces.len(), 4);

    let mut other = c.clone();
    other.run.base_seed = 6;
    assert_ne!(a, run_experiment(&other, RunOptions::serial()).unwrap());
}

#[test]
fn zero_parameter_robust_rules_reproduce_nsaf_curves() {
    let mut c = small();
    c.algorithms = vec![
        AlgorithmSpec::new("NSAF", RuleKind::Nsaf, 0.65, 0.0),
        AlgorithmSpec::new("MCC0", RuleKind::Mcc, 0.65, 0.0),
        AlgorithmSpec::new("LC0", RuleKind::Lc, 0.65, 0.0),
    ];
    let r = run_experiment(&c, RunOptions::serial()).unwrap();
    assert_eq!(r.traces[0].values_db, r.traces[1].values_db);
    assert_eq!(r.traces[0].values_db, r.traces[2].values_db);
}

#[test]
fn learning_curves_fall_then_jump_at_the_flip() {
    let mut c = small();
    c.noise.pr = 0.0;
    let r = run_experiment(&c, RunOptions::serial()).unwrap();
    let t = r.trace("NSAF").unwrap();
    let flip = 3_000 / 2;
    assert!(t.values_db[flip - 1] < -10.0, "{}", t.values_db[flip - 1]);
    assert!(t.values_db[flip] > 0.0);
    assert!(!t.diverged);
}

#[test]
fn outputs_replay_from_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = small();
    let r = run_experiment(&c, RunOptions::serial()).unwrap();
    write_experiment_outputs(dir.path(), &c, &r).unwrap();
    let csv = fs::read_to_string(dir.path().join(EXPERIMENT_CSV)).unwrap();
    assert!(csv.starts_with("block,samples,NSAF,SSAF,MCC-SAF,LC-SAF\n"));
    assert_eq!(csv.lines().count(), 1 + 3_000);
    assert_eq!(csv, format_experiment_csv(&r));

    let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
    assert!(manifest.starts_with("# format=1\n"));
    let (again, grid) = load_config(&dir.path().join(MANIFEST)).unwrap();
    assert_eq!(again, c);
    assert!(grid.is_none());
}

#[test]
fn sweep_expands_every_cell() {
    let mut base = small();
    base.run.flip_at = None;
    base.run.runs = 2;
    base.algorithms
        .retain(|a| matches!(a.kind, RuleKind::Mcc | RuleKind::Lc));
    let sweep = SweepConfig {
        base,
        grid: SweepGrid {
            params: vec![1.0, 10.0, 80.0],
            pr: vec![0.0, 0.01],
        },
    };
    let r = run_sweep(&sweep, RunOptions::serial()).unwrap();
    assert_eq!(r.rows.len(), 2 * 3 * 2);
    assert!(r.get("MCC-SAF", 10.0, 0.01).is_some());
    assert!(r.get("MCC-SAF", 5.0, 0.01).is_none());
    assert_eq!(
        format_sweep_csv(&r),
        format_sweep_csv(&run_sweep(&sweep, RunOptions { threads: 2 }).unwrap())
    );

    let dir = tempfile::tempdir().unwrap();
    write_sweep_outputs(dir.path(), &sweep, &r).unwrap();
    let csv = fs::read_to_string(dir.path().join(SWEEP_CSV)).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12);
    let replay = load_sweep(&dir.path().join(MANIFEST)).unwrap();
    assert_eq!(replay, sweep);
}

#[test]
fn short_sweeps_and_bad_configs_are_rejected() {
    let mut c = small();
    c.run.n_samples = 63;
    assert!(matches!(
        run_experiment(&c, RunOptions::serial()),
        Err(Error::Config(_))
    ));

    let mut c = small();
    c.algorithms[2].mu = 2.0;
    assert!(matches!(
        run_experiment(&c, RunOptions::serial()),
        Err(Error::Config(_))
    ));

    let mut c = small();
    c.algorithms[1].name = "NSAF".into();
    assert!(run_experiment(&c, RunOptions::serial()).is_err());

    let mut c = small();
    c.structure.l = 10;
    assert!(run_experiment(&c, RunOptions::serial()).is_err());

    let sweep = SweepConfig {
        base: small(),
        grid: SweepGrid {
            params: vec![1.0],
            pr: vec![0.0],
        },
    };
    let mut short = sweep.clone();
    short.base.run.n_samples = 800;
    assert!(run_sweep(&short, RunOptions::serial()).is_err());
    let mut bad_pr = sweep;
    bad_pr.grid.pr = vec![1.5];
    assert!(run_sweep(&bad_pr, RunOptions::serial()).is_err());
}

#[test]
fn data_files_are_resolved_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let input: Vec<f64> = (0..4_000)
        .map(|t| ((t * 7919 % 211) as f64 - 105.0) / 60.0)
        .collect();
    write_signal(&dir.path().join("input.txt"), &input).unwrap();
    write_signal(&dir.path().join("ir.txt"), &[1.0, -0.5, 0.25]).unwrap();
    let text = r#"
[structure]
m = 16
n = 2
l = 16
attenuation_db = 40.0

[run]
n_samples = 4000
runs = 1

[input]
file = "input.txt"

[system]
file = "ir.txt"

[noise]
snr_db = inf

[[algorithm]]
name = "NSAF"
kind = "nsaf"
mu = 0.8
"#;
    let path = dir.path().join("exp.cfg");
    fs::write(&path, text).unwrap();
    let (c, _) = load_config(&path).unwrap();
    assert_eq!(
        c.input.file.as_deref(),
        Some(dir.path().join("input.txt").as_path())
    );
    let r = run_experiment(&c, RunOptions::serial()).unwrap();
    let t = &r.traces[0].values_db;
    assert!(
        t[t.len() - 1] < -60.0,
        "noise-free identification reached {}",
        t[t.len() - 1]
    );

    let (mut short, _) = parse_config(text).unwrap();
    short.input.file = Some(dir.path().join("input.txt"));
    short.system.file = Some(dir.path().join("ir.txt"));
    short.run.n_samples = 5_000;
    assert!(matches!(
        run_experiment(&short, RunOptions::serial()),
        Err(Error::Config(_))
    ));
}
