use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;
use std::time::Instant;

use flate2::read::GzDecoder;

use crate::commands::write_summary;
use crate::config::{AppConfig, FormatKind};
use crate::CliError;

pub fn run(input: &Path, cfg: &AppConfig, out_dir: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let ingest_cfg = cfg.ingest_config()?;
    let file = File::open(input)
        .map_err(|e| CliError::Data(fms_core::Error::Format(format!(
            "cannot open {}: {e}",
            input.display()
        ))))?;
    let reader: Box<dyn Read> = if input.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    let output = fms_core::ingest::run_pipeline(reader, &ingest_cfg)?;

    let format = cfg.io.format.unwrap_or(FormatKind::Csv);
    let data_path = match format {
        FormatKind::Csv => {
            let p = out_dir.join("data.csv");
            fms_core::io::write_function_set_csv(&p, &output.set)?;
            p
        }
        FormatKind::Binary => {
            let p = out_dir.join("data.bin");
            fms_core::io::write_function_set_binary(&p, &output.set)?;
            p
        }
    };
    fms_core::io::write_provenance_csv(&out_dir.join("provenance.csv"), &output.provenance)?;
    cfg.write_resolved(out_dir)?;
    write_summary(
        out_dir,
        &serde_json::json!({
            "command": "ingest",
            "input": input.display().to_string(),
            "data": data_path.display().to_string(),
            "stages": output.summary,
            "grid": {
                "domain_lo": output.set.grid().domain_lo,
                "domain_hi": output.set.grid().domain_hi,
                "num_points": output.set.grid().num_points,
            },
            "wall_time_seconds": started.elapsed().as_secs_f64(),
        }),
    )
}
