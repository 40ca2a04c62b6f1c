//! Stochastic inputs for system-identification experiments.
//!
//! Every generator is a pure function of its parameters and a `u64` seed.
//! Uniforms come from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`) and
//! Gaussians from the ziggurat sampler in `rand_distr::StandardNormal`; both
//! are platform independent.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Independent random streams of one Monte-Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    Input,
    MeasurementNoise,
    Impulses,
    System,
}

impl SeedSource {
    pub const fn constant(self) -> u64 {
        match self {
            SeedSource::Input => 0x9E37_79B9_7F4A_7C15,
            SeedSource::MeasurementNoise => 0xBF58_476D_1CE4_E5B9,
            SeedSource::Impulses => 0x94D0_49BB_1331_11EB,
            SeedSource::System => 0xD6E8_FEB8_6659_FD93,
        }
    }
}

/// `base ⊕ source constant ⊕ run`.
pub fn derive_seed(base: u64, source: SeedSource, run: u64) -> u64 {
    base ^ source.constant() ^ run
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Mean square of `x` (zero for an empty slice).
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// AR(1) process `x(t) = pole·x(t−1) + g(t)` driven by unit-variance white
/// Gaussian noise, starting from `x(−1) = 0`.
pub fn gen_ar1(n: usize, pole: f64, seed: u64) -> Result<Vec<f64>> {
    if pole.is_nan() || pole.abs() >= 1.0 {
        return Err(Error::param(format!(
            "AR(1) pole must satisfy |pole| < 1 (got {pole})"
        )));
    }
    if n == 0 {
        return Err(Error::param("sample count must be positive"));
    }
    let mut r = rng(seed);
    let mut prev = 0.0;
    Ok((0..n)
        .map(|_| {
            prev = pole * prev + gaussian(&mut r);
            prev
        })
        .collect())
}

/// Unknown FIR system `w_o`, optionally negated from a given sample onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    taps: Vec<f64>,
    flip_at: Option<usize>,
}

impl SystemModel {
    pub fn new(taps: Vec<f64>, flip_at: Option<usize>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::param("system needs at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("system taps must be finite"));
        }
        if taps.iter().all(|&t| t == 0.0) {
            return Err(Error::param("system response must be non-zero"));
        }
        Ok(Self { taps, flip_at })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn flip_at(&self) -> Option<usize> {
        self.flip_at
    }

    pub fn with_flip(mut self, flip_at: Option<usize>) -> Self {
        self.flip_at = flip_at;
        self
    }

    /// Truncates or zero-pads the response to `m` taps.
    pub fn resized(&self, m: usize) -> Result<Self> {
        let mut taps = self.taps.clone();
        taps.resize(m, 0.0);
        Self::new(taps, self.flip_at)
    }

    /// `+1` before the flip sample, `−1` from it on.
    pub fn sign_at(&self, sample: usize) -> f64 {
        match self.flip_at {
            Some(f) if sample >= f => -1.0,
            _ => 1.0,
        }
    }

    /// The response in effect at `sample`.
    pub fn response_at(&self, sample: usize) -> Vec<f64> {
        let s = self.sign_at(sample);
        self.taps.iter().map(|t| s * t).collect()
    }
}

/// Synthetic room-like response: seeded Gaussian taps under an exponential
/// envelope `exp(−n/decay)`, scaled to unit energy.
pub fn gen_system(m: usize, decay: f64, seed: u64) -> Result<SystemModel> {
    if m == 0 {
        return Err(Error::param("system length M must be positive"));
    }
    if decay.is_nan() || decay <= 0.0 {
        return Err(Error::param(format!(
            "decay time constant must be positive (got {decay})"
        )));
    }
    let mut r = rng(seed);
    let mut taps: Vec<f64> = (0..m)
        .map(|n| gaussian(&mut r) * (-(n as f64) / decay).exp())
        .collect();
    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= norm);
    SystemModel::new(taps, None)
}

/// Measurement-noise level and Bernoulli-Gaussian impulse parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Signal-to-noise ratio of the white measurement noise; `+∞` disables it.
    pub snr_db: f64,
    /// Probability of an impulse at each sample.
    pub pr: f64,
    /// Impulse variance relative to the clean output power.
    pub amp_factor: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            snr_db: 30.0,
            pr: 0.0,
            amp_factor: 100.0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() {
            return Err(Error::param("SNR must be a number"));
        }
        if !(0.0..=1.0).contains(&self.pr) {
            return Err(Error::param(format!(
                "impulse probability must lie in [0, 1] (got {})",
                self.pr
            )));
        }
        if !(self.amp_factor > 0.0 && self.amp_factor.is_finite()) {
            return Err(Error::param(format!(
                "impulse amplification factor must be positive (got {})",
                self.amp_factor
            )));
        }
        Ok(())
    }
}

/// White Gaussian noise at `snr_db` below the empirical power of `clean`.
pub fn gen_measurement_noise(clean: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if clean.is_empty() {
        return Err(Error::DegenerateInput("clean output is empty".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(vec![0.0; clean.len()]);
    }
    if snr_db.is_nan() {
        return Err(Error::param("SNR must be a number"));
    }
    let p = power(clean);
    if p <= 0.0 {
        return Err(Error::DegenerateInput("clean output has zero power".into()));
    }
    let sigma = (p * 10f64.powf(-snr_db / 10.0)).sqrt();
    let mut r = rng(seed);
    Ok((0..clean.len()).map(|_| sigma * gaussian(&mut r)).collect())
}

/// Bernoulli-Gaussian impulses `θ(t) = c(t)·A(t)` with `P{c = 1} = pr` and
/// `A ~ N(0, amp_factor · clean_power)`.
pub fn gen_bg_impulses(
    n: usize,
    spec: &NoiseSpec,
    clean_power: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(clean_power >= 0.0 && clean_power.is_finite()) {
        return Err(Error::param(format!(
            "clean power must be finite and non-negative (got {clean_power})"
        )));
    }
    let sigma = (spec.amp_factor * clean_power).sqrt();
    let mut r = rng(seed);
    Ok((0..n)
        .map(|_| {
            let gate = r.random::<f64>() < spec.pr;
            let a = gaussian(&mut r);
            if gate {
                sigma * a
            } else {
                0.0
            }
        })
        .collect())
}

/// Noise-free system output `Σ_j w_o[j] u(n−j)` with the tracking flip
/// applied and zero pre-history.
pub fn clean_output(u: &[f64], system: &SystemModel) -> Vec<f64> {
    let taps = system.taps();
    (0..u.len())
        .map(|n| {
            let reach = taps.len().min(n + 1);
            let mut acc = 0.0;
            for (j, &w) in taps[..reach].iter().enumerate() {
                acc += w * u[n - j];
            }
            system.sign_at(n) * acc
        })
        .collect()
}

/// Desired signal `d(n) = u(n)ᵀ w_o + v(n) + θ(n)`.
pub fn desired(u: &[f64], system: &SystemModel, v: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    if v.len() != u.len() || theta.len() != u.len() {
        return Err(Error::param(format!(
            "signal lengths differ (u: {}, v: {}, theta: {})",
            u.len(),
            v.len(),
            theta.len()
        )));
    }
    Ok(clean_output(u, system)
        .into_iter()
        .zip(v.iter().zip(theta))
        .map(|(y, (a, b))| y + a + b)
        .collect())
}

/// Reads one finite decimal per line; blank and `#` lines are skipped.
pub fn load_signal(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_signal(&text).map_err(|(line, message)| Error::Input {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Loads an impulse response in the signal format.
pub fn load_ir(path: &Path) -> Result<SystemModel> {
    let taps = load_signal(path)?;
    SystemModel::new(taps, None).map_err(|e| Error::Input {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn write_signal(path: &Path, x: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(x.len() * 20);
    for v in x {
        let _ = writeln!(s, "{v}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn parse_signal(text: &str) -> std::result::Result<Vec<f64>, (usize, String)> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| (idx + 1, format!("not a number: `{line}`")))?;
        if !v.is_finite() {
            return Err((idx + 1, format!("non-finite value `{line}`")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err((1, "file contains no samples".into()));
    }
    Ok(out)
}
