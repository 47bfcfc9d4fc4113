//! Run manifests and output serialization.

use crate::config::Resolved;
use crate::CliError;
use feel_rrm::sim::SweepResult;
use serde::Serialize;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

/// Provenance record embedded in (or written beside) every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    /// Seconds since the Unix epoch at the time of the run.
    pub timestamp: String,
    /// The fully resolved config as TOML; feeding it back as `--config`
    /// reproduces the run.
    pub resolved_config: String,
}

impl RunManifest {
    pub fn new(command: &str, resolved: &Resolved) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_else(|_| "0".into());
        Self {
            command: command.to_string(),
            config_digest: resolved.digest(),
            seed: resolved.scenario.rng_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            resolved_config: resolved.to_toml(),
        }
    }
}

/// Writes pretty JSON to `out`, or to stdout when no path was given.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Renders sweep rows as CSV. Numbers use Rust's shortest round-trip float
/// formatting: full precision, locale-independent.
pub fn sweep_csv(rows: &[SweepResult]) -> Result<String, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "T",
            "energy_proposed",
            "energy_baseline",
            "scheduled_count",
            "reduction_ratio",
        ])
        .and_then(|()| {
            rows.iter().try_for_each(|r| {
                writer.write_record([
                    r.round_time.to_string(),
                    r.mean_total_energy_proposed.to_string(),
                    r.mean_total_energy_baseline.to_string(),
                    r.mean_scheduled_count.to_string(),
                    r.energy_reduction_ratio.to_string(),
                ])
            })
        })
        .map_err(|e| CliError::Config(format!("csv rendering failed: {e}")))?;
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv rendering failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Config(format!("csv not utf-8: {e}")))
}

/// Writes the CSV to `out` with a manifest sidecar (`<out>.manifest.json`),
/// or prints it when no path was given.
pub fn emit_csv(csv: &str, manifest: &RunManifest, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, csv)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            let sidecar = path.with_extension(match path.extension() {
                Some(ext) => format!("{}.manifest.json", ext.to_string_lossy()),
                None => "manifest.json".to_string(),
            });
            emit_json(manifest, Some(&sidecar))
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
