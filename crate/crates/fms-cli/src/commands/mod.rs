pub mod bench;
pub mod cluster;
pub mod diagnose;
pub mod ingest;
pub mod synth;

use std::path::Path;

use fms_core::FunctionSet;

use crate::config::AppConfig;
use crate::CliError;

/// Influence range from the config, estimated from data when absent. The
/// estimate is written back so the resolved snapshot reproduces the run.
pub(crate) fn resolve_tau(cfg: &mut AppConfig, set: &FunctionSet) -> Result<f64, CliError> {
    match cfg.kernel.tau {
        Some(tau) if tau > 0.0 => Ok(tau),
        Some(tau) => Err(CliError::Config(format!(
            "kernel.tau must be > 0, got {tau}"
        ))),
        None => {
            let tau = fms_core::estimate_tau(
                set,
                cfg.kernel.tau_sample_size,
                cfg.kernel.tau_percentile,
                cfg.seed,
            )?;
            cfg.kernel.tau = Some(tau);
            Ok(tau)
        }
    }
}

pub(crate) fn write_summary(out_dir: &Path, summary: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Data(fms_core::Error::Format(e.to_string())))?;
    std::fs::write(out_dir.join("summary.json"), text + "\n")?;
    Ok(())
}
