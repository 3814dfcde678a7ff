//! On-disk formats for function sets, run traces and labels.
//!
//! A function set is either a CSV with header `id,t_0,...,t_{p-1}` or a
//! row-major matrix of little-endian 64-bit floats; both carry a sidecar
//! JSON grid descriptor `{domain_lo, domain_hi, num_points}` at
//! `<path>.grid.json`. The binary format stores no ids; readers assign row
//! indices. Floats are written in shortest round-trip form, so identical
//! data produces identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Provenance;
use crate::meanshift::RunTrace;
use crate::space::{FunctionSample, FunctionSet, GridSpec};

#[derive(Debug, Serialize, Deserialize)]
struct GridSidecar {
    domain_lo: f64,
    domain_hi: f64,
    num_points: usize,
}

/// Sidecar path for a function set file: `<path>.grid.json`.
pub fn grid_sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".grid.json");
    PathBuf::from(name)
}

fn write_grid_sidecar(path: &Path, grid: &GridSpec) -> Result<()> {
    let sidecar = GridSidecar {
        domain_lo: grid.domain_lo,
        domain_hi: grid.domain_hi,
        num_points: grid.num_points,
    };
    let mut file = BufWriter::new(File::create(grid_sidecar_path(path))?);
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Format(e.to_string()))?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

fn read_grid_sidecar(path: &Path) -> Result<GridSpec> {
    let sidecar_path = grid_sidecar_path(path);
    let mut text = String::new();
    File::open(&sidecar_path)
        .map_err(|_| {
            Error::Format(format!(
                "missing grid sidecar {}",
                sidecar_path.display()
            ))
        })?
        .read_to_string(&mut text)?;
    let raw: GridSidecar =
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
    GridSpec::new(raw.domain_lo, raw.domain_hi, raw.num_points)
}

pub fn write_function_set_csv(path: &Path, set: &FunctionSet) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write!(file, "id")?;
    for k in 0..set.grid().num_points {
        write!(file, ",t_{k}")?;
    }
    writeln!(file)?;
    for member in set.members() {
        write!(file, "{}", member.id)?;
        for v in &member.values {
            write!(file, ",{v}")?;
        }
        writeln!(file)?;
    }
    file.flush()?;
    write_grid_sidecar(path, set.grid())
}

pub fn read_function_set_csv(path: &Path) -> Result<FunctionSet> {
    let grid = read_grid_sidecar(path)?;
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let header = lines.next().ok_or(Error::NoInput)??;
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain((0..grid.num_points).map(|k| format!("t_{k}")))
        .collect();
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::SchemaMismatch(format!(
            "function set header does not match the {} grid points in the sidecar",
            grid.num_points
        )));
    }
    let mut members = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let values: Vec<f64> = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad value `{f}`: {e}")))
            })
            .collect::<Result<_>>()?;
        members.push(FunctionSample::new(id, values));
    }
    FunctionSet::new(grid, members)
}

pub fn write_function_set_binary(path: &Path, set: &FunctionSet) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    for member in set.members() {
        for v in &member.values {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    file.flush()?;
    write_grid_sidecar(path, set.grid())
}

pub fn read_function_set_binary(path: &Path) -> Result<FunctionSet> {
    let grid = read_grid_sidecar(path)?;
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let row_bytes = grid.num_points * 8;
    if row_bytes == 0 || bytes.len() % row_bytes != 0 {
        return Err(Error::Format(format!(
            "binary length {} is not a multiple of the row size {row_bytes}",
            bytes.len()
        )));
    }
    let members = bytes
        .chunks_exact(row_bytes)
        .enumerate()
        .map(|(i, row)| {
            let values: Vec<f64> = row
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            FunctionSample::new(i.to_string(), values)
        })
        .collect();
    FunctionSet::new(grid, members)
}

/// Load a function set, picking CSV or binary by extension (`.bin` means
/// binary, anything else is CSV).
pub fn read_function_set(path: &Path) -> Result<FunctionSet> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_function_set_binary(path),
        _ => read_function_set_csv(path),
    }
}

/// Trace CSV: `nu,h,avg_density,max_shift,mean_shift` plus a trailing `m`
/// column for stochastic runs.
pub fn write_trace_csv(path: &Path, trace: &RunTrace) -> Result<()> {
    let stochastic = trace.rows.iter().any(|r| r.m.is_some());
    let mut file = BufWriter::new(File::create(path)?);
    if stochastic {
        writeln!(file, "nu,h,avg_density,max_shift,mean_shift,m")?;
    } else {
        writeln!(file, "nu,h,avg_density,max_shift,mean_shift")?;
    }
    for row in &trace.rows {
        write!(
            file,
            "{},{},{},{},{}",
            row.nu, row.h, row.avg_density, row.max_shift, row.mean_shift
        )?;
        if stochastic {
            write!(file, ",{}", row.m.unwrap_or(0))?;
        }
        writeln!(file)?;
    }
    file.flush()?;
    Ok(())
}

/// Labels CSV: `id,cluster`, with provenance columns appended when present.
pub fn write_labels_csv(
    path: &Path,
    ids: &[&str],
    labels: &[usize],
    provenance: Option<&[Provenance]>,
) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: ids.len(),
            right: labels.len(),
        });
    }
    if let Some(p) = provenance {
        if p.len() != ids.len() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: ids.len(),
            });
        }
    }
    let mut file = BufWriter::new(File::create(path)?);
    match provenance {
        None => {
            writeln!(file, "id,cluster")?;
            for (id, label) in ids.iter().zip(labels) {
                writeln!(file, "{id},{label}")?;
            }
        }
        Some(prov) => {
            writeln!(file, "id,cluster,platform,time,lat,lon")?;
            for ((id, label), p) in ids.iter().zip(labels).zip(prov) {
                writeln!(
                    file,
                    "{id},{label},{},{},{},{}",
                    p.platform, p.time, p.lat, p.lon
                )?;
            }
        }
    }
    file.flush()?;
    Ok(())
}

/// Provenance CSV: `cycle_id,platform,time,lat,lon`.
pub fn write_provenance_csv(path: &Path, provenance: &[Provenance]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "cycle_id,platform,time,lat,lon")?;
    for p in provenance {
        writeln!(
            file,
            "{},{},{},{},{}",
            p.cycle_id, p.platform, p.time, p.lat, p.lon
        )?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_provenance_csv(path: &Path) -> Result<Vec<Provenance>> {
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let header = lines.next().ok_or(Error::NoInput)??;
    if header.trim() != "cycle_id,platform,time,lat,lon" {
        return Err(Error::SchemaMismatch(format!(
            "unexpected provenance header `{header}`"
        )));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Format(format!("bad provenance row `{line}`")));
        }
        out.push(Provenance {
            cycle_id: fields[0].to_string(),
            platform: fields[1].to_string(),
            time: fields[2].to_string(),
            lat: fields[3]
                .parse()
                .map_err(|e| Error::Format(format!("bad lat: {e}")))?,
            lon: fields[4]
                .parse()
                .map_err(|e| Error::Format(format!("bad lon: {e}")))?,
        });
    }
    Ok(out)
}
