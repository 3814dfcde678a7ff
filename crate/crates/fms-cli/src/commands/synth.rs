use std::path::Path;
use std::time::Instant;

use fms_core::{generate, GridSpec, SynthConfig};

use crate::commands::write_summary;
use crate::config::{AppConfig, FormatKind};
use crate::CliError;

pub fn run(cfg: &AppConfig, out_dir: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let grid = GridSpec::new(
        cfg.synth.grid_lo,
        cfg.synth.grid_hi,
        cfg.synth.grid_points,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.synth.clusters == 0 || cfg.synth.per_cluster == 0 {
        return Err(CliError::Config(
            "synth.clusters and synth.per_cluster must be >= 1".into(),
        ));
    }
    let mut synth_cfg = SynthConfig::new(
        grid,
        cfg.synth.clusters,
        cfg.synth.per_cluster,
        cfg.synth.noise_norm,
        cfg.seed,
    );
    synth_cfg.noise_modes = cfg.synth.noise_modes;
    let data = generate(&synth_cfg);

    let format = cfg.io.format.unwrap_or(FormatKind::Csv);
    let data_path = match format {
        FormatKind::Csv => {
            let p = out_dir.join("data.csv");
            fms_core::io::write_function_set_csv(&p, &data.set)?;
            p
        }
        FormatKind::Binary => {
            let p = out_dir.join("data.bin");
            fms_core::io::write_function_set_binary(&p, &data.set)?;
            p
        }
    };
    let ids: Vec<&str> = data.set.ids().collect();
    fms_core::io::write_labels_csv(&out_dir.join("labels.csv"), &ids, &data.labels, None)?;
    fms_core::io::write_function_set_csv(&out_dir.join("means.csv"), &data.means)?;
    cfg.write_resolved(out_dir)?;
    write_summary(
        out_dir,
        &serde_json::json!({
            "command": "synth",
            "data": data_path.display().to_string(),
            "n": data.set.len(),
            "clusters": cfg.synth.clusters,
            "per_cluster": cfg.synth.per_cluster,
            "noise_norm": cfg.synth.noise_norm,
            "min_mean_separation": fms_core::synth::min_mean_separation(&data.means),
            "wall_time_seconds": started.elapsed().as_secs_f64(),
        }),
    )
}
