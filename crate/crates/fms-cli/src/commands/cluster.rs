use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use fms_core::ingest::Provenance;
use fms_core::{assign_clusters, check_separation, run_full, run_stochastic, StochasticConfig};

use crate::commands::{resolve_tau, write_summary};
use crate::config::AppConfig;
use crate::CliError;

pub fn run(
    data_path: &Path,
    cfg: &mut AppConfig,
    out_dir: &Path,
    strict: bool,
) -> Result<(), CliError> {
    let started = Instant::now();
    let set = fms_core::io::read_function_set(data_path)?;
    let tau = resolve_tau(cfg, &set)?;
    let run_cfg = cfg.run_config(tau)?;

    let trace = if cfg.stochastic.enabled {
        run_stochastic(
            &set,
            &StochasticConfig {
                subset_size: cfg.stochastic.subset_size,
                seed: cfg.seed,
                run: run_cfg,
            },
        )
    } else {
        run_full(&set, &run_cfg)
    };

    let result = assign_clusters(&trace.final_state, cfg.merge_radius())?;
    let separation = check_separation(&result, tau);

    fms_core::io::write_trace_csv(&out_dir.join("trace.csv"), &trace)?;
    let ids: Vec<&str> = set.ids().collect();
    let provenance = match &cfg.io.provenance {
        None => None,
        Some(path) => {
            let rows = fms_core::io::read_provenance_csv(path)?;
            let by_id: HashMap<&str, &Provenance> =
                rows.iter().map(|p| (p.cycle_id.as_str(), p)).collect();
            let aligned: Vec<Provenance> = ids
                .iter()
                .map(|id| {
                    by_id.get(id).map(|&p| p.clone()).ok_or_else(|| {
                        CliError::Data(fms_core::Error::Format(format!(
                            "provenance file has no row for id `{id}`"
                        )))
                    })
                })
                .collect::<Result<_, _>>()?;
            Some(aligned)
        }
    };
    fms_core::io::write_labels_csv(
        &out_dir.join("labels.csv"),
        &ids,
        &result.labels,
        provenance.as_deref(),
    )?;
    fms_core::io::write_function_set_csv(&out_dir.join("centers.csv"), &result.centers)?;
    cfg.write_resolved(out_dir)?;
    write_summary(
        out_dir,
        &serde_json::json!({
            "command": "cluster",
            "data": data_path.display().to_string(),
            "n": set.len(),
            "num_points": set.grid().num_points,
            "mode": if cfg.stochastic.enabled { "stochastic" } else { "full" },
            "tau": tau,
            "converged": trace.converged,
            "iters_used": trace.iters_used,
            "clusters": result.sizes.len(),
            "sizes": result.sizes,
            "merge_radius": result.merge_radius,
            "separation_pass": separation.pass,
            "separation_violations": separation.violations.len(),
            "wall_time_seconds": started.elapsed().as_secs_f64(),
        }),
    )?;
    if strict && !trace.converged {
        return Err(CliError::NonConvergence);
    }
    Ok(())
}
