use std::io::Write;
use std::path::Path;
use std::time::Instant;

use fms_core::{
    generate, run_full, run_stochastic, BandwidthSchedule, GridSpec, Mode, RunConfig,
    StochasticConfig, SynthConfig,
};

use crate::commands::write_summary;
use crate::config::AppConfig;
use crate::CliError;

/// Per-iteration wall time of the full and stochastic loops across dataset
/// sizes. A diffuse single blob with an unbounded influence range keeps
/// every pairwise weight active, so the full loop pays its whole quadratic
/// cost.
pub fn run(cfg: &AppConfig, out_dir: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    if cfg.bench.iters == 0 || cfg.bench.sizes.is_empty() {
        return Err(CliError::Config(
            "bench.iters must be >= 1 and bench.sizes nonempty".into(),
        ));
    }
    let grid = GridSpec::unit(cfg.bench.grid_points).map_err(|e| CliError::Config(e.to_string()))?;
    let run_cfg = RunConfig {
        schedule: BandwidthSchedule::constant(1e9, 1.0),
        epsilon: 1e-300,
        max_iters: cfg.bench.iters,
        mode: Mode::Blurring,
    };
    let path = out_dir.join("bench.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(
        file,
        "n,p,subset_size,m,full_sec_per_iter,stochastic_sec_per_iter,ratio"
    )?;
    let mut rows = Vec::new();
    for &n in &cfg.bench.sizes {
        let data = generate(&SynthConfig::new(grid, 1, n, 0.5, cfg.seed));
        let t_full = Instant::now();
        let full_trace = run_full(&data.set, &run_cfg);
        let full_per_iter = t_full.elapsed().as_secs_f64() / full_trace.iters_used as f64;

        let sto_cfg = StochasticConfig {
            subset_size: cfg.bench.subset_size,
            seed: cfg.seed,
            run: run_cfg.clone(),
        };
        let t_sto = Instant::now();
        let sto_trace = run_stochastic(&data.set, &sto_cfg);
        let sto_per_iter = t_sto.elapsed().as_secs_f64() / sto_trace.iters_used as f64;

        let m = sto_trace.rows[0].m.unwrap_or(1);
        let ratio = sto_per_iter / full_per_iter;
        writeln!(
            file,
            "{n},{},{},{m},{full_per_iter},{sto_per_iter},{ratio}",
            cfg.bench.grid_points, cfg.bench.subset_size
        )?;
        rows.push(serde_json::json!({
            "n": n,
            "m": m,
            "full_sec_per_iter": full_per_iter,
            "stochastic_sec_per_iter": sto_per_iter,
            "ratio": ratio,
        }));
    }
    file.flush()?;
    drop(file);
    cfg.write_resolved(out_dir)?;
    write_summary(
        out_dir,
        &serde_json::json!({
            "command": "bench",
            "output": path.display().to_string(),
            "iters_per_size": cfg.bench.iters,
            "rows": rows,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
        }),
    )
}
