//! `sraf` command-line front end.
//!
//! Exit codes: `0` success, `1` runtime failure, `2` bad arguments or config.
//! A diverging algorithm is a result, not a failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, load_sweep};
use crate::error::Error;
use crate::filterbank::{design_prototype, modulate, write_coefficients};
use crate::harness::{
    run_experiment, run_sweep, write_experiment_outputs, write_sweep_outputs, ExperimentConfig,
    RunOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sraf",
    version,
    about = "Robust subband adaptive filter experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a cosine-modulated filter-bank prototype and write its taps.
    DesignFb {
        /// Number of subbands.
        #[arg(long = "n", default_value_t = 4)]
        subbands: usize,
        /// Prototype length (a multiple of 2N).
        #[arg(long = "l", default_value_t = 32)]
        taps: usize,
        /// Target stopband attenuation in dB.
        #[arg(long = "att", default_value_t = 60.0)]
        attenuation_db: f64,
        /// Output coefficient file.
        #[arg(long, default_value = "prototype.txt")]
        out: PathBuf,
    },
    /// Run one Monte-Carlo experiment and write its learning curves.
    Run(RunArgs),
    /// Run a parameter / impulse-probability sweep.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (TOML) or a manifest from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "sraf-out")]
    out: PathBuf,
    /// Override `run.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `run.runs`.
    #[arg(long)]
    runs: Option<usize>,
    /// Override `run.n_samples`.
    #[arg(long)]
    samples: Option<usize>,
}

impl RunArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            config.run.base_seed = s;
        }
        if let Some(r) = self.runs {
            config.run.runs = r;
        }
        if let Some(n) = self.samples {
            config.run.n_samples = n;
        }
    }
}

fn fail(code: i32, err: &Error) -> i32 {
    eprintln!("error: {err}");
    code
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.command {
        Command::DesignFb {
            subbands,
            taps,
            attenuation_db,
            out,
        } => cmd_design_fb(subbands, taps, attenuation_db, &out),
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn cmd_design_fb(subbands: usize, taps: usize, attenuation_db: f64, out: &Path) -> i32 {
    let proto = match design_prototype(subbands, taps, attenuation_db) {
        Ok(p) => p,
        Err(e @ Error::Parameter(_)) => return fail(EXIT_CONFIG, &e),
        Err(e) => return fail(EXIT_RUNTIME, &e),
    };
    if let Err(e) = write_coefficients(out, &proto) {
        return fail(EXIT_RUNTIME, &e);
    }
    let ripple = modulate(&proto).power_complementarity_ripple_db();
    println!(
        "wrote {} (N={subbands}, L={taps}): stopband {:.2} dB, bank ripple {:.3} dB",
        out.display(),
        proto.stopband_attenuation_db(),
        ripple
    );
    EXIT_OK
}

fn cmd_run(args: &RunArgs) -> i32 {
    let mut config = match load_config(&args.config) {
        Ok((c, _)) => c,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    args.apply(&mut config);
    if let Err(e) = config.validate() {
        return fail(EXIT_CONFIG, &e);
    }
    let result = match run_experiment(&config, RunOptions::from_env()) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_RUNTIME, &e),
    };
    if let Err(e) = write_experiment_outputs(&args.out, &config, &result) {
        return fail(EXIT_RUNTIME, &e);
    }
    println!("{:<16} {:>14}  status", "algorithm", "steady NMSD dB");
    for ((label, db), trace) in result.steady_states().into_iter().zip(&result.traces) {
        let status = if trace.diverged { "diverged" } else { "ok" };
        println!("{label:<16} {db:>14.2}  {status}");
    }
    EXIT_OK
}

fn cmd_sweep(args: &RunArgs) -> i32 {
    let mut sweep = match load_sweep(&args.config) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    args.apply(&mut sweep.base);
    if let Err(e) = sweep.validate() {
        return fail(EXIT_CONFIG, &e);
    }
    let result = match run_sweep(&sweep, RunOptions::from_env()) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return fail(EXIT_CONFIG, &e),
        Err(e) => return fail(EXIT_RUNTIME, &e),
    };
    if let Err(e) = write_sweep_outputs(&args.out, &sweep, &result) {
        return fail(EXIT_RUNTIME, &e);
    }
    println!(
        "{:<16} {:>8} {:>8} {:>14}",
        "algorithm", "param", "pr", "steady NMSD dB"
    );
    for r in &result.rows {
        println!(
            "{:<16} {:>8} {:>8} {:>14.2}",
            r.algorithm, r.param, r.pr, r.steady_state_db
        );
    }
    EXIT_OK
}
