//! Monte-Carlo system-identification experiments.
//!
//! One experiment draws, for every run `r`, a colored input, measurement
//! noise and Bernoulli-Gaussian impulses from seeds derived from the base
//! seed and `r` (see [`derive_seed`]). The unknown system is drawn once from
//! the base seed and shared by all runs. Every configured algorithm adapts
//! its own weights on the same subband frames, and its per-block NMSD is
//! averaged across runs in the linear domain.
//!
//! Runs may execute on a thread pool; results are always folded in run order
//! so parallel and serial executions give identical averages.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{validate_step_size, AdaptiveState, ScaleRule, EPS_PER_TAP};
use crate::error::{Error, Result};
use crate::filterbank::{
    analyze, design_prototype, modulate, read_coefficients, AnalysisBank, FrameCursor,
};
use crate::metrics::{
    ratio_to_db, steady_state, LinearAccumulator, NmsdTrace, STEADY_STATE_WINDOW,
};
use crate::signals::{
    clean_output, derive_seed, gen_ar1, gen_bg_impulses, gen_measurement_noise, gen_system,
    load_ir, load_signal, power, NoiseSpec, SeedSource, SystemModel,
};

/// NMSD above which a run counts as diverged.
pub const DIVERGENCE_DB: f64 = 100.0;

/// Linear ratio recorded for blocks after the weights went non-finite.
const DIVERGED_RATIO: f64 = 1e40;

/// Environment variable capping the number of concurrent trials.
pub const THREADS_ENV: &str = "SRAF_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureSpec {
    /// Adaptive filter length.
    pub m: usize,
    /// Number of subbands.
    pub n: usize,
    /// Prototype length.
    pub l: usize,
    pub attenuation_db: f64,
    /// Prototype coefficient file overriding the designed prototype.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
}

impl Default for StructureSpec {
    fn default() -> Self {
        Self {
            m: 512,
            n: 4,
            l: 32,
            attenuation_db: 60.0,
            coefficients: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub n_samples: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// Fullband sample index from which the unknown system is negated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_at: Option<usize>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            runs: 50,
            base_seed: 1,
            flip_at: None,
        }
    }
}

/// Input signal: an AR(1) process (default pole 0.9) or a signal file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

pub const DEFAULT_POLE: f64 = 0.9;

/// Unknown system: synthesized with an exponential decay or read from file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSpec {
    pub decay: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            decay: 100.0,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Nsaf,
    Mcc,
    Lc,
    Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Column label in the outputs.
    pub name: String,
    pub kind: RuleKind,
    pub mu: f64,
    /// Regularization; defaults to `1e-6 · M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// β for MCC, γ for LC; ignored otherwise.
    #[serde(default)]
    pub param: f64,
}

impl AlgorithmSpec {
    pub fn new(name: impl Into<String>, kind: RuleKind, mu: f64, param: f64) -> Self {
        Self {
            name: name.into(),
            kind,
            mu,
            eps: None,
            param,
        }
    }

    pub fn rule(&self) -> ScaleRule {
        match self.kind {
            RuleKind::Nsaf => ScaleRule::Nsaf,
            RuleKind::Mcc => ScaleRule::Mcc { beta: self.param },
            RuleKind::Lc => ScaleRule::Lc { gamma: self.param },
            RuleKind::Sign => ScaleRule::Sign,
        }
    }

    fn state(&self, m: usize) -> Result<AdaptiveState> {
        let eps = self.eps.unwrap_or(EPS_PER_TAP * m as f64);
        AdaptiveState::new(m, self.mu, eps, self.rule())
    }
}

/// Full description of one Monte-Carlo experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub structure: StructureSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default, rename = "algorithm")]
    pub algorithms: Vec<AlgorithmSpec>,
}

impl ExperimentConfig {
    pub fn blocks(&self) -> usize {
        self.run.n_samples / self.structure.n.max(1)
    }

    /// Checks every experiment-level constraint before any computation.
    pub fn validate(&self) -> Result<()> {
        let s = &self.structure;
        if s.m == 0 {
            return Err(Error::Config("structure.m must be positive".into()));
        }
        if s.n == 0 {
            return Err(Error::Config("structure.n must be positive".into()));
        }
        if s.coefficients.is_none() && (s.n < 2 || s.l == 0 || !s.l.is_multiple_of(2 * s.n)) {
            return Err(Error::Config(format!(
                "structure.l must be a positive multiple of 2N = {} with N >= 2 (got N={}, L={})",
                2 * s.n,
                s.n,
                s.l
            )));
        }
        if self.run.runs == 0 {
            return Err(Error::Config("run.runs must be at least 1".into()));
        }
        if self.run.n_samples < s.n * s.m {
            return Err(Error::Config(format!(
                "run.n_samples must be at least N*M = {} (got {})",
                s.n * s.m,
                self.run.n_samples
            )));
        }
        if self.input.pole.is_some() && self.input.file.is_some() {
            return Err(Error::Config(
                "input: give either pole or file, not both".into(),
            ));
        }
        if let Some(p) = self.input.pole {
            if p.is_nan() || p.abs() >= 1.0 {
                return Err(Error::Config(format!(
                    "input.pole must satisfy |pole| < 1 (got {p})"
                )));
            }
        }
        if self.system.file.is_none() && (self.system.decay.is_nan() || self.system.decay <= 0.0) {
            return Err(Error::Config("system.decay must be positive".into()));
        }
        self.noise
            .validate()
            .map_err(|e| Error::Config(format!("noise: {e}")))?;
        if self.algorithms.is_empty() {
            return Err(Error::Config(
                "at least one [[algorithm]] is required".into(),
            ));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if a.name.is_empty() || a.name.contains([',', '\n', '"']) {
                return Err(Error::Config(format!(
                    "algorithm name `{}` must be non-empty without commas, quotes or newlines",
                    a.name
                )));
            }
            if self.algorithms[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Config(format!(
                    "duplicate algorithm name `{}`",
                    a.name
                )));
            }
            validate_step_size(a.mu)
                .map_err(|e| Error::Config(format!("algorithm `{}`: {e}", a.name)))?;
            a.rule()
                .validate()
                .map_err(|e| Error::Config(format!("algorithm `{}`: {e}", a.name)))?;
            if let Some(eps) = a.eps {
                if !(eps >= 0.0 && eps.is_finite()) {
                    return Err(Error::Config(format!(
                        "algorithm `{}`: eps must be finite and non-negative",
                        a.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parameter and impulse-probability grid of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// β or γ values substituted into every algorithm.
    pub params: Vec<f64>,
    /// Impulse probabilities.
    pub pr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub grid: SweepGrid,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.params.is_empty() || self.grid.pr.is_empty() {
            return Err(Error::Config("sweep grids must be non-empty".into()));
        }
        if let Some(p) = self
            .grid
            .params
            .iter()
            .find(|p| !(**p >= 0.0 && p.is_finite()))
        {
            return Err(Error::Config(format!(
                "sweep parameter {p} must be non-negative"
            )));
        }
        if let Some(p) = self.grid.pr.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!(
                "sweep probability {p} is outside [0, 1]"
            )));
        }
        self.base.validate()
    }
}

/// Execution options that do not affect results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: 1 }
    }
}

impl RunOptions {
    pub fn serial() -> Self {
        Self { threads: 1 }
    }

    /// All available cores, capped by `SRAF_THREADS` when set.
    pub fn from_env() -> Self {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
            .map_or(available, |cap| cap.min(available));
        Self { threads }
    }
}

/// Averaged learning curves of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub subbands: usize,
    pub traces: Vec<NmsdTrace>,
}

impl ExperimentResult {
    pub fn blocks(&self) -> usize {
        self.traces.first().map_or(0, NmsdTrace::len)
    }

    pub fn trace(&self, label: &str) -> Option<&NmsdTrace> {
        self.traces.iter().find(|t| t.label == label)
    }

    /// `(label, steady-state dB)` over the last `min(500, blocks)` blocks.
    pub fn steady_states(&self) -> Vec<(String, f64)> {
        let window = STEADY_STATE_WINDOW.min(self.blocks()).max(1);
        self.traces
            .iter()
            .map(|t| {
                let v = steady_state(&t.values_db, window).unwrap_or(f64::NAN);
                (t.label.clone(), v)
            })
            .collect()
    }
}

/// Everything shared by the runs of one experiment.
struct Setup {
    bank: AnalysisBank,
    system: SystemModel,
    input_file: Option<Vec<f64>>,
}

fn build_bank(s: &StructureSpec) -> Result<AnalysisBank> {
    let bank = match &s.coefficients {
        Some(path) => {
            let proto = read_coefficients(path)?;
            if proto.subbands() != s.n {
                return Err(Error::Config(format!(
                    "coefficient file is for N={} but structure.n = {}",
                    proto.subbands(),
                    s.n
                )));
            }
            modulate(&proto)
        }
        None => modulate(&design_prototype(s.n, s.l, s.attenuation_db)?),
    };
    Ok(bank)
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let bank = build_bank(&config.structure)?;
        let m = config.structure.m;
        let system = match &config.system.file {
            Some(path) => load_ir(path)?.resized(m)?,
            None => gen_system(
                m,
                config.system.decay,
                derive_seed(config.run.base_seed, SeedSource::System, 0),
            )?,
        }
        .with_flip(config.run.flip_at);
        let input_file = match &config.input.file {
            Some(path) => {
                let x = load_signal(path)?;
                if x.len() < config.run.n_samples {
                    return Err(Error::Config(format!(
                        "input file has {} samples, run.n_samples is {}",
                        x.len(),
                        config.run.n_samples
                    )));
                }
                Some(x[..config.run.n_samples].to_vec())
            }
            None => None,
        };
        Ok(Self {
            bank,
            system,
            input_file,
        })
    }
}

/// Linear deviation ratios of every algorithm for one run.
struct RunOutcome {
    ratios: Vec<Vec<f64>>,
    diverged: Vec<bool>,
}

fn run_once(config: &ExperimentConfig, setup: &Setup, run: usize) -> Result<RunOutcome> {
    let n = config.run.n_samples;
    let m = config.structure.m;
    let base = config.run.base_seed;
    let r = run as u64;

    let u = match &setup.input_file {
        Some(x) => x.clone(),
        None => gen_ar1(
            n,
            config.input.pole.unwrap_or(DEFAULT_POLE),
            derive_seed(base, SeedSource::Input, r),
        )?,
    };
    let clean = clean_output(&u, &setup.system);
    let clean_power = power(&clean);
    let v = gen_measurement_noise(
        &clean,
        config.noise.snr_db,
        derive_seed(base, SeedSource::MeasurementNoise, r),
    )?;
    let theta = gen_bg_impulses(
        n,
        &config.noise,
        clean_power,
        derive_seed(base, SeedSource::Impulses, r),
    )?;
    let d: Vec<f64> = clean
        .iter()
        .zip(v.iter().zip(&theta))
        .map(|(y, (a, b))| y + a + b)
        .collect();

    let u_sub = analyze(&setup.bank, &u);
    let d_sub = analyze(&setup.bank, &d);
    let mut cursor = FrameCursor::new(&u_sub, &d_sub, m)?;
    let blocks = cursor.blocks();
    let subbands = setup.bank.subbands();

    let mut states = config
        .algorithms
        .iter()
        .map(|a| a.state(m))
        .collect::<Result<Vec<_>>>()?;
    let mut ratios = vec![Vec::with_capacity(blocks); states.len()];
    let mut blown = vec![false; states.len()];
    let mut diverged = vec![false; states.len()];
    let taps = setup.system.taps();
    let reference: f64 = taps.iter().map(|t| t * t).sum();

    while let Some(frame) = cursor.advance() {
        let sign = setup.system.sign_at(frame.block() * subbands);
        for (idx, state) in states.iter_mut().enumerate() {
            if !blown[idx] {
                match state.update(frame) {
                    Ok(_) => {}
                    Err(Error::Divergence { .. }) => blown[idx] = true,
                    Err(e) => return Err(e),
                }
            }
            let ratio = if blown[idx] {
                DIVERGED_RATIO
            } else {
                let dev: f64 = taps
                    .iter()
                    .zip(state.weights())
                    .map(|(t, w)| {
                        let diff = sign * t - w;
                        diff * diff
                    })
                    .sum();
                dev / reference
            };
            if blown[idx] || ratio_to_db(ratio) > DIVERGENCE_DB {
                diverged[idx] = true;
            }
            ratios[idx].push(ratio);
        }
    }
    Ok(RunOutcome { ratios, diverged })
}

/// Runs every Monte-Carlo trial of `config` and averages the NMSD curves.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<ExperimentResult> {
    config.validate()?;
    let setup = Setup::new(config)?;
    let blocks = config.blocks();
    let mut accs: Vec<LinearAccumulator> = config
        .algorithms
        .iter()
        .map(|a| LinearAccumulator::new(a.name.clone(), blocks))
        .collect();

    let threads = options.threads.max(1);
    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?,
        )
    } else {
        None
    };

    let runs: Vec<usize> = (0..config.run.runs).collect();
    for chunk in runs.chunks(threads * 2) {
        let outcomes: Vec<Result<RunOutcome>> = match &pool {
            Some(pool) => pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&r| run_once(config, &setup, r))
                    .collect()
            }),
            None => chunk.iter().map(|&r| run_once(config, &setup, r)).collect(),
        };
        for outcome in outcomes {
            let outcome = outcome?;
            for ((acc, ratios), diverged) in
                accs.iter_mut().zip(&outcome.ratios).zip(&outcome.diverged)
            {
                acc.add_linear(ratios, *diverged)?;
            }
        }
    }

    let traces = accs
        .into_iter()
        .map(LinearAccumulator::finish)
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        subbands: setup.bank.subbands(),
        traces,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: String,
    pub param: f64,
    pub pr: f64,
    pub steady_state_db: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn get(&self, algorithm: &str, param: f64, pr: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.param == param && r.pr == pr)
            .map(|r| r.steady_state_db)
    }
}

fn sweep_label(name: &str, param: f64) -> String {
    format!("{name} p={param}")
}

/// Steady-state NMSD for every (algorithm, parameter, P_r) combination.
///
/// Each P_r is one experiment in which every algorithm is instantiated once
/// per grid parameter, so all parameter values see the same signals.
pub fn run_sweep(sweep: &SweepConfig, options: RunOptions) -> Result<SweepResult> {
    sweep.validate()?;
    if sweep.base.blocks() < STEADY_STATE_WINDOW {
        return Err(Error::Config(format!(
            "a sweep needs at least {STEADY_STATE_WINDOW} blocks for the steady-state window (got {})",
            sweep.base.blocks()
        )));
    }
    let mut per_pr = Vec::with_capacity(sweep.grid.pr.len());
    for &pr in &sweep.grid.pr {
        let mut cfg = sweep.base.clone();
        cfg.noise.pr = pr;
        cfg.algorithms = sweep
            .base
            .algorithms
            .iter()
            .flat_map(|a| {
                sweep.grid.params.iter().map(move |&p| AlgorithmSpec {
                    name: sweep_label(&a.name, p),
                    param: p,
                    ..a.clone()
                })
            })
            .collect();
        per_pr.push(run_experiment(&cfg, options)?);
    }

    let mut rows = Vec::new();
    for a in &sweep.base.algorithms {
        for &p in &sweep.grid.params {
            for (&pr, result) in sweep.grid.pr.iter().zip(&per_pr) {
                let trace = result
                    .trace(&sweep_label(&a.name, p))
                    .expect("sweep experiment has every expanded label");
                rows.push(SweepRow {
                    algorithm: a.name.clone(),
                    param: p,
                    pr,
                    steady_state_db: steady_state(&trace.values_db, STEADY_STATE_WINDOW)?,
                    diverged: trace.diverged,
                });
            }
        }
    }
    Ok(SweepResult { rows })
}

/// Learning-curve CSV: `block,samples,<label>...`, one row per block.
pub fn format_experiment_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("block,samples");
    for t in &result.traces {
        s.push(',');
        s.push_str(&t.label);
    }
    s.push('\n');
    for k in 0..result.blocks() {
        let _ = write!(s, "{k},{}", k * result.subbands);
        for t in &result.traces {
            let _ = write!(s, ",{}", t.values_db[k]);
        }
        s.push('\n');
    }
    s
}

pub fn format_sweep_csv(result: &SweepResult) -> String {
    let mut s = String::from("algorithm,param,pr,steady_state_db\n");
    for r in &result.rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.algorithm, r.param, r.pr, r.steady_state_db
        );
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub const EXPERIMENT_CSV: &str = "nmsd.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const MANIFEST: &str = "manifest.txt";

/// Writes `nmsd.csv` and `manifest.txt` into `out_dir`.
pub fn write_experiment_outputs(
    out_dir: &Path,
    config: &ExperimentConfig,
    result: &ExperimentResult,
) -> Result<Vec<PathBuf>> {
    prepare_dir(out_dir)?;
    let csv = out_dir.join(EXPERIMENT_CSV);
    let manifest = out_dir.join(MANIFEST);
    write_file(&csv, &format_experiment_csv(result))?;
    write_file(&manifest, &crate::config::manifest_text(config, None)?)?;
    Ok(vec![csv, manifest])
}

/// Writes `sweep.csv` and `manifest.txt` into `out_dir`.
pub fn write_sweep_outputs(
    out_dir: &Path,
    sweep: &SweepConfig,
    result: &SweepResult,
) -> Result<Vec<PathBuf>> {
    prepare_dir(out_dir)?;
    let csv = out_dir.join(SWEEP_CSV);
    let manifest = out_dir.join(MANIFEST);
    write_file(&csv, &format_sweep_csv(result))?;
    write_file(
        &manifest,
        &crate::config::manifest_text(&sweep.base, Some(&sweep.grid))?,
    )?;
    Ok(vec![csv, manifest])
}
