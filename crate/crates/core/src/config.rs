//! Experiment configuration files and run manifests.
//!
//! Configs are TOML documents: `key = value` lines grouped under
//! `[structure]`, `[run]`, `[input]`, `[system]`, `[noise]`, repeated
//! `[[algorithm]]` tables and, for sweeps, a `[sweep]` table. Unknown keys are
//! rejected. A manifest is the fully resolved config of a finished run,
//! prefixed by `# format=1`; feeding it back to the CLI reproduces the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, SweepConfig, SweepGrid};
use crate::signals::SeedSource;

pub const FORMAT_LINE: &str = "# format=1";

/// Parses config text into an experiment and an optional sweep grid.
pub fn parse_config(text: &str) -> Result<(ExperimentConfig, Option<SweepGrid>)> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let grid = match table.remove("sweep") {
        Some(v) => Some(
            v.try_into::<SweepGrid>()
                .map_err(|e| Error::Config(format!("[sweep]: {}", e.message())))?,
        ),
        None => None,
    };
    let config = table
        .try_into::<ExperimentConfig>()
        .map_err(|e| Error::Config(e.message().to_string()))?;
    Ok((config, grid))
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

/// Loads a config file; relative data paths are taken from the file's folder.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, Option<SweepGrid>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut config, grid) =
        parse_config(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(base, &mut config.structure.coefficients);
    resolve(base, &mut config.input.file);
    resolve(base, &mut config.system.file);
    Ok((config, grid))
}

/// Loads a config that must describe a sweep.
pub fn load_sweep(path: &Path) -> Result<SweepConfig> {
    match load_config(path)? {
        (base, Some(grid)) => Ok(SweepConfig { base, grid }),
        (_, None) => Err(Error::Config(format!(
            "{}: a sweep config needs a [sweep] table",
            path.display()
        ))),
    }
}

/// Serializes a config (and optional sweep grid) back to TOML.
pub fn to_config_text(config: &ExperimentConfig, grid: Option<&SweepGrid>) -> Result<String> {
    let mut table = toml::Table::try_from(config)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    if let Some(g) = grid {
        let v = toml::Value::try_from(g)
            .map_err(|e| Error::Config(format!("cannot serialize sweep: {e}")))?;
        table.insert("sweep".into(), v);
    }
    toml::to_string(&table).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

/// Manifest text: format line, seed derivation notes, then the config.
pub fn manifest_text(config: &ExperimentConfig, grid: Option<&SweepGrid>) -> Result<String> {
    let base = config.run.base_seed;
    let mut s = String::new();
    let _ = writeln!(s, "{FORMAT_LINE}");
    let _ = writeln!(
        s,
        "# sraf run manifest; re-run with `sraf run|sweep --config <this file>`"
    );
    let _ = writeln!(
        s,
        "# seed(source, run) = base_seed ^ source ^ run, base_seed = {base}"
    );
    for src in [
        SeedSource::Input,
        SeedSource::MeasurementNoise,
        SeedSource::Impulses,
        SeedSource::System,
    ] {
        let _ = writeln!(s, "#   {src:?} = {:#018x}", src.constant());
    }
    s.push('\n');
    s.push_str(&to_config_text(config, grid)?);
    Ok(s)
}
