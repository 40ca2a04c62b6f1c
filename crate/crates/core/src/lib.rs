//! Robust subband adaptive filtering.
//!
//! `sraf` identifies an unknown FIR system with normalized subband adaptive
//! filters (NSAF) and two impulse-robust variants that scale each subband's
//! step by a function of its normalized error: the maximum-correntropy rule
//! (MCC-SAF) and the logarithmic-cost rule (LC-SAF). A sign-error SAF (SSAF)
//! serves as baseline. Around the update rules sit a cosine-modulated
//! analysis bank, reproducible signal and noise generators, NMSD metrics and a
//! Monte-Carlo harness that writes learning curves and parameter sweeps.

pub mod adaptive;
pub mod cli;
pub mod config;
pub mod error;
pub mod filterbank;
pub mod harness;
pub mod metrics;
pub mod signals;

pub use adaptive::{scale_factor, validate_step_size, AdaptiveState, ScaleRule};
pub use error::{Error, Result};
pub use filterbank::{
    analyze, design_prototype, frame, modulate, AnalysisBank, PrototypeFilter, SubbandFrame,
};
pub use harness::{run_experiment, run_sweep, ExperimentConfig, RunOptions, SweepConfig};
pub use metrics::{average_traces, nmsd, steady_state, NmsdTrace};
pub use signals::{NoiseSpec, SystemModel};
