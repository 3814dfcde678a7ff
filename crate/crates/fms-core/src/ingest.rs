//! Profile preprocessing: raw (pressure, value) measurements are grouped
//! into profiling cycles, thin cycles are dropped, each cycle is regridded
//! with a natural cubic spline onto a common pressure grid (never
//! extrapolating), and only profiles fully observed inside the analysis
//! window are admitted to the output set.

use std::collections::HashMap;
use std::io::Read;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{FunctionSample, FunctionSet, GridSpec};
use crate::spline::NaturalCubicSpline;

pub const DEFAULT_MIN_POINTS: usize = 20;
/// Analysis pressure window in decibar with 2-decibar spacing.
pub const DEFAULT_WINDOW_LO: f64 = 20.0;
pub const DEFAULT_WINDOW_HI: f64 = 300.0;
pub const DEFAULT_GRID_POINTS: usize = 141;

/// Coordinates are rounded to 1e-4 degrees before grouping; "same location"
/// is undefined at float precision otherwise.
const COORD_SCALE: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Temperature,
    Salinity,
}

impl Variable {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "temperature" => Some(Variable::Temperature),
            "salinity" => Some(Variable::Salinity),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variable::Temperature => "temperature",
            Variable::Salinity => "salinity",
        }
    }
}

/// One measurement row: platform metadata plus a (pressure, value) pair.
#[derive(Debug, Clone)]
pub struct RawMeasurement {
    pub platform: String,
    pub time: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub pressure: f64,
    pub value: f64,
    pub variable: Variable,
}

/// All measurements of one float dive: same platform, time and location.
/// Points are sorted by strictly increasing pressure after duplicate
/// pressures are collapsed by averaging.
#[derive(Debug, Clone)]
pub struct ProfileCycle {
    pub cycle_id: String,
    pub platform: String,
    pub time: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub variable: Variable,
    pub points: Vec<(f64, f64)>,
}

/// One cycle regridded onto the analysis grid. A grid point is missing iff
/// it lies outside the observed pressure span.
#[derive(Debug, Clone)]
pub struct GriddedProfile {
    pub cycle_id: String,
    pub platform: String,
    pub time: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

/// Pass-through metadata for the retained profiles, aligned with the output
/// set order.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub cycle_id: String,
    pub platform: String,
    pub time: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub rows_invalid: usize,
    pub cycles_grouped: usize,
    pub cycles_after_min_points: usize,
    pub cycles_spline_failed: usize,
    pub profiles_regridded: usize,
    pub profiles_retained: usize,
}

pub const CSV_HEADER: [&str; 7] = ["platform", "time", "lat", "lon", "pressure", "value", "variable"];

/// Parse the measurement CSV (`platform,time,lat,lon,pressure,value,variable`
/// with RFC 3339 times). Malformed rows are counted and skipped; a wrong
/// header or an empty file is an error.
pub fn parse_measurements<R: Read>(reader: R) -> Result<(Vec<RawMeasurement>, usize, usize)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::NoInput);
    }
    let got: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if got != CSV_HEADER {
        return Err(Error::SchemaMismatch(format!(
            "expected header {:?}, got {:?}",
            CSV_HEADER.join(","),
            got.join(",")
        )));
    }
    let mut rows_read = 0usize;
    let mut rows_invalid = 0usize;
    let mut out = Vec::new();
    for record in csv_reader.records() {
        rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                rows_invalid += 1;
                continue;
            }
        };
        match parse_row(&record) {
            Some(m) => out.push(m),
            None => rows_invalid += 1,
        }
    }
    if rows_read == 0 {
        return Err(Error::NoInput);
    }
    Ok((out, rows_read, rows_invalid))
}

fn parse_row(record: &csv::StringRecord) -> Option<RawMeasurement> {
    if record.len() != 7 {
        return None;
    }
    let platform = record.get(0)?.trim().to_string();
    if platform.is_empty() {
        return None;
    }
    let time = DateTime::parse_from_rfc3339(record.get(1)?.trim())
        .ok()?
        .with_timezone(&Utc);
    let lat: f64 = record.get(2)?.trim().parse().ok()?;
    let lon: f64 = record.get(3)?.trim().parse().ok()?;
    let pressure: f64 = record.get(4)?.trim().parse().ok()?;
    let value: f64 = record.get(5)?.trim().parse().ok()?;
    let variable = Variable::parse(record.get(6)?)?;
    if !lat.is_finite() || !lon.is_finite() || !value.is_finite() {
        return None;
    }
    if !pressure.is_finite() || pressure < 0.0 {
        return None;
    }
    Some(RawMeasurement {
        platform,
        time,
        lat,
        lon,
        pressure,
        value,
        variable,
    })
}

fn coord_key(deg: f64) -> i64 {
    (deg * COORD_SCALE).round() as i64
}

/// Group measurements into profiling cycles by exact key
/// (platform, time, rounded lat/lon, variable). Within a cycle, points are
/// sorted by pressure and duplicate pressures are collapsed by averaging.
/// Output order is canonical: (platform, time, lat, lon, variable).
pub fn group_cycles(measurements: Vec<RawMeasurement>) -> Vec<ProfileCycle> {
    type Key = (String, DateTime<Utc>, i64, i64, Variable);
    let mut groups: HashMap<Key, Vec<(f64, f64)>> = HashMap::new();
    for m in measurements {
        let key = (
            m.platform,
            m.time,
            coord_key(m.lat),
            coord_key(m.lon),
            m.variable,
        );
        groups.entry(key).or_default().push((m.pressure, m.value));
    }
    let mut keys: Vec<Key> = groups.keys().cloned().collect();
    keys.sort();
    let mut cycles = Vec::with_capacity(keys.len());
    let mut id_counts: HashMap<String, usize> = HashMap::new();
    for key in keys {
        let mut points = groups.remove(&key).unwrap();
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let points = collapse_duplicate_pressures(points);
        let (platform, time, lat_key, lon_key, variable) = key;
        let base_id = format!("{}_{}", platform, time.format("%Y%m%dT%H%M%SZ"));
        let count = id_counts.entry(base_id.clone()).or_insert(0);
        *count += 1;
        let cycle_id = if *count == 1 {
            base_id
        } else {
            format!("{}_{}", base_id, count)
        };
        cycles.push(ProfileCycle {
            cycle_id,
            platform,
            time,
            lat: lat_key as f64 / COORD_SCALE,
            lon: lon_key as f64 / COORD_SCALE,
            variable,
            points,
        });
    }
    cycles
}

fn collapse_duplicate_pressures(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let p = sorted[i].0;
        let mut sum = 0.0;
        let mut count = 0usize;
        while i < sorted.len() && sorted[i].0 == p {
            sum += sorted[i].1;
            count += 1;
            i += 1;
        }
        out.push((p, sum / count as f64));
    }
    out
}

/// Keep cycles with at least `min_points` points; order is preserved.
pub fn filter_cycles(cycles: Vec<ProfileCycle>, min_points: usize) -> Vec<ProfileCycle> {
    cycles
        .into_iter()
        .filter(|c| c.points.len() >= min_points)
        .collect()
}

/// Natural cubic spline through the cycle's (pressure, value) knots,
/// evaluated at the grid points. Grid points outside the knot span are
/// masked missing, never extrapolated. Fewer than 4 knots is an error:
/// below that the cubic pieces degenerate.
pub fn spline_regrid(cycle: &ProfileCycle, grid: &GridSpec) -> Result<GriddedProfile> {
    if cycle.points.len() < 4 {
        return Err(Error::TooFewKnots {
            needed: 4,
            got: cycle.points.len(),
        });
    }
    let xs: Vec<f64> = cycle.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = cycle.points.iter().map(|p| p.1).collect();
    let spline = NaturalCubicSpline::fit(&xs, &ys)?;
    let mut values = Vec::with_capacity(grid.num_points);
    let mut missing = Vec::with_capacity(grid.num_points);
    for k in 0..grid.num_points {
        match spline.eval(grid.point(k)) {
            Some(v) => {
                values.push(v);
                missing.push(false);
            }
            None => {
                values.push(f64::NAN);
                missing.push(true);
            }
        }
    }
    Ok(GriddedProfile {
        cycle_id: cycle.cycle_id.clone(),
        platform: cycle.platform.clone(),
        time: cycle.time,
        lat: cycle.lat,
        lon: cycle.lon,
        values,
        missing,
    })
}

/// Restrict profiles to the sub-grid inside `[window.domain_lo,
/// window.domain_hi]` and keep only profiles with no missing values there.
/// Returns the function set plus pass-through provenance in the same order.
pub fn restrict_and_select(
    profiles: &[GriddedProfile],
    grid: &GridSpec,
    window: &GridSpec,
) -> Result<(FunctionSet, Vec<Provenance>)> {
    let eps = grid.step() * 1e-9;
    let keep: Vec<usize> = (0..grid.num_points)
        .filter(|&k| {
            let t = grid.point(k);
            t >= window.domain_lo - eps && t <= window.domain_hi + eps
        })
        .collect();
    if keep.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "window [{}, {}] covers fewer than 2 grid points",
            window.domain_lo, window.domain_hi
        )));
    }
    let sub_grid = GridSpec::new(
        grid.point(keep[0]),
        grid.point(keep[keep.len() - 1]),
        keep.len(),
    )?;
    let mut members = Vec::new();
    let mut provenance = Vec::new();
    for profile in profiles {
        if keep.iter().any(|&k| profile.missing[k]) {
            continue;
        }
        let values: Vec<f64> = keep.iter().map(|&k| profile.values[k]).collect();
        members.push(FunctionSample::new(profile.cycle_id.clone(), values));
        provenance.push(Provenance {
            cycle_id: profile.cycle_id.clone(),
            platform: profile.platform.clone(),
            time: profile.time.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            lat: profile.lat,
            lon: profile.lon,
        });
    }
    if members.is_empty() {
        return Err(Error::NoInput);
    }
    Ok((FunctionSet::new(sub_grid, members)?, provenance))
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub variable: Variable,
    pub min_points: usize,
    /// Analysis grid; doubles as the selection window since regridding
    /// directly onto the window sub-grid is equivalent to regridding wide
    /// and then restricting, for every retained profile.
    pub grid: GridSpec,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            variable: Variable::Temperature,
            min_points: DEFAULT_MIN_POINTS,
            grid: GridSpec::new(DEFAULT_WINDOW_LO, DEFAULT_WINDOW_HI, DEFAULT_GRID_POINTS)
                .expect("default grid is valid"),
        }
    }
}

#[derive(Debug)]
pub struct IngestOutput {
    pub set: FunctionSet,
    pub provenance: Vec<Provenance>,
    pub summary: IngestSummary,
}

/// Full pipeline: parse, group, filter, regrid, select.
pub fn run_pipeline<R: Read>(reader: R, cfg: &IngestConfig) -> Result<IngestOutput> {
    let (measurements, rows_read, rows_invalid) = parse_measurements(reader)?;
    let measurements: Vec<RawMeasurement> = measurements
        .into_iter()
        .filter(|m| m.variable == cfg.variable)
        .collect();
    let cycles = group_cycles(measurements);
    let cycles_grouped = cycles.len();
    let kept = filter_cycles(cycles, cfg.min_points);
    let cycles_after_min_points = kept.len();
    let regrid_results: Vec<Result<GriddedProfile>> = kept
        .par_iter()
        .map(|c| spline_regrid(c, &cfg.grid))
        .collect();
    let mut profiles = Vec::with_capacity(regrid_results.len());
    let mut cycles_spline_failed = 0usize;
    for r in regrid_results {
        match r {
            Ok(p) => profiles.push(p),
            Err(Error::TooFewKnots { .. }) => cycles_spline_failed += 1,
            Err(e) => return Err(e),
        }
    }
    let profiles_regridded = profiles.len();
    let (set, provenance) = restrict_and_select(&profiles, &cfg.grid, &cfg.grid)?;
    let summary = IngestSummary {
        rows_read,
        rows_invalid,
        cycles_grouped,
        cycles_after_min_points,
        cycles_spline_failed,
        profiles_regridded,
        profiles_retained: set.len(),
    };
    Ok(IngestOutput {
        set,
        provenance,
        summary,
    })
}
