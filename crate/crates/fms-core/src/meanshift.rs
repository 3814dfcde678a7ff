//! Full-data functional mean shift: the operator, surrogate densities, and
//! the blurring / non-blurring iteration loops.
//!
//! The blurring loop replaces the whole configuration each iteration; the
//! non-blurring loop moves queries against the fixed original data. Updates
//! are synchronous: every output member is computed from the input state
//! only, so per-member work can run on any number of threads without
//! changing results. Per-member accumulation is fixed left-to-right.

use rayon::prelude::*;
use serde::Serialize;

use crate::kernel::{kernel_eval, BandwidthSchedule, KernelConfig};
use crate::space::{dist_slices, FunctionSample, FunctionSet};
use crate::error::{Error, Result};

/// Whether the iteration updates the dataset itself or only queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Blurring,
    NonBlurring,
}

/// Loop configuration: bandwidth schedule, stopping threshold, budget.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub schedule: BandwidthSchedule,
    /// Stop when the largest per-member shift falls below this (L2 units).
    pub epsilon: f64,
    pub max_iters: usize,
    pub mode: Mode,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        KernelConfig::new(self.schedule.bandwidth_at(0), self.schedule.tau)?;
        Ok(())
    }
}

/// One iteration record.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub nu: usize,
    pub h: f64,
    pub avg_density: f64,
    pub max_shift: f64,
    pub mean_shift: f64,
    /// Number of subsets, present only for stochastic runs.
    pub m: Option<usize>,
}

/// Trace of a run plus the final configuration.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub final_state: FunctionSet,
    pub converged: bool,
    pub iters_used: usize,
}

/// Result of one mean shift application.
#[derive(Debug, Clone)]
pub struct ShiftOutcome {
    pub sample: FunctionSample,
    /// True when every kernel weight was zero (the input is farther than
    /// `tau` from all data); the input is returned unchanged.
    pub isolated: bool,
}

/// Kernel-weighted average of the members selected by `indices`, evaluated
/// at the values `f` and accumulated in shift form
/// `f + sum w_j (f_j - f) / sum w_j`. The shift form keeps exact fixed
/// points exact: a singleton or fully collapsed neighborhood contributes a
/// zero shift. Zero-weight members are skipped, which keeps members beyond
/// `tau` bitwise inert. Returns the input unchanged when nothing is in
/// range.
pub(crate) fn shift_values<I>(
    f: &[f64],
    state: &FunctionSet,
    indices: I,
    cfg: &KernelConfig,
) -> (Vec<f64>, bool)
where
    I: IntoIterator<Item = usize>,
{
    let step = state.grid().step();
    let p = f.len();
    let mut delta = vec![0.0; p];
    let mut den = 0.0;
    for j in indices {
        let fj = &state.member(j).values;
        let w = kernel_eval(dist_slices(f, fj, step), cfg);
        if w == 0.0 {
            continue;
        }
        den += w;
        for (acc, (&v, &base)) in delta.iter_mut().zip(fj.iter().zip(f)) {
            *acc += w * (v - base);
        }
    }
    if den == 0.0 {
        (f.to_vec(), true)
    } else {
        let values = f
            .iter()
            .zip(&delta)
            .map(|(&base, &d)| base + d / den)
            .collect();
        (values, false)
    }
}

/// Mean of kernel weights from `f` to the members selected by `indices`,
/// normalized by the number of selected members.
pub(crate) fn density_over<I>(f: &[f64], state: &FunctionSet, indices: I, cfg: &KernelConfig) -> f64
where
    I: IntoIterator<Item = usize>,
{
    let step = state.grid().step();
    let mut acc = 0.0;
    let mut count = 0usize;
    for j in indices {
        acc += kernel_eval(dist_slices(f, &state.member(j).values, step), cfg);
        count += 1;
    }
    debug_assert!(count > 0);
    acc / count as f64
}

fn check_on_grid(f: &FunctionSample, data: &FunctionSet) -> Result<()> {
    if f.values.len() != data.grid().num_points {
        return Err(Error::GridMismatch {
            expected: data.grid().num_points,
            got: f.values.len(),
        });
    }
    Ok(())
}

/// The mean shift operator: kernel-weighted average of all data members.
///
/// The sum runs over every member including `f` itself when `f` is part of
/// the data, so the denominator never vanishes in blurring runs. A query
/// farther than `tau` from everything comes back unchanged with the
/// `isolated` flag set.
pub fn ms_operator(
    f: &FunctionSample,
    data: &FunctionSet,
    cfg: &KernelConfig,
) -> Result<ShiftOutcome> {
    check_on_grid(f, data)?;
    let (values, isolated) = shift_values(&f.values, data, 0..data.len(), cfg);
    Ok(ShiftOutcome {
        sample: FunctionSample::new(f.id.clone(), values),
        isolated,
    })
}

/// Surrogate density at `f`: mean kernel weight over all data members.
pub fn surrogate_density(f: &FunctionSample, data: &FunctionSet, cfg: &KernelConfig) -> Result<f64> {
    check_on_grid(f, data)?;
    Ok(density_over(&f.values, data, 0..data.len(), cfg))
}

/// Average surrogate density of a configuration against itself, including
/// self terms. This is the quantity that increases monotonically along
/// constant-bandwidth blurring runs.
pub fn average_density(data: &FunctionSet, cfg: &KernelConfig) -> f64 {
    let per_member: Vec<f64> = data
        .members()
        .par_iter()
        .map(|f| density_over(&f.values, data, 0..data.len(), cfg))
        .collect();
    mean(&per_member)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One synchronous blurring update: every output member is the mean shift of
/// the corresponding input member against the whole input state.
pub fn bfms_step(state: &FunctionSet, cfg: &KernelConfig) -> FunctionSet {
    let members: Vec<FunctionSample> = state
        .members()
        .par_iter()
        .map(|f| {
            let (values, _) = shift_values(&f.values, state, 0..state.len(), cfg);
            FunctionSample::new(f.id.clone(), values)
        })
        .collect();
    FunctionSet::from_members_unchecked(*state.grid(), members)
}

/// One non-blurring update: queries move, the data stays fixed.
pub fn nbfms_step(
    queries: &FunctionSet,
    data: &FunctionSet,
    cfg: &KernelConfig,
) -> Result<FunctionSet> {
    if queries.grid() != data.grid() {
        return Err(Error::GridMismatch {
            expected: data.grid().num_points,
            got: queries.grid().num_points,
        });
    }
    let members: Vec<FunctionSample> = queries
        .members()
        .par_iter()
        .map(|f| {
            let (values, _) = shift_values(&f.values, data, 0..data.len(), cfg);
            FunctionSample::new(f.id.clone(), values)
        })
        .collect();
    Ok(FunctionSet::from_members_unchecked(*queries.grid(), members))
}

/// Largest and mean per-member L2 shift between two configurations.
pub(crate) fn shift_stats(before: &FunctionSet, after: &FunctionSet) -> (f64, f64) {
    let step = before.grid().step();
    let shifts: Vec<f64> = before
        .members()
        .par_iter()
        .zip(after.members().par_iter())
        .map(|(a, b)| dist_slices(&a.values, &b.values, step))
        .collect();
    let max = shifts.iter().copied().fold(0.0, f64::max);
    (max, mean(&shifts))
}

/// Iterate the full-data update with the scheduled bandwidth until the
/// largest per-member shift drops below `epsilon` or the budget runs out.
/// Non-convergence is reported in the trace, never raised.
pub fn run_full(init: &FunctionSet, run_cfg: &RunConfig) -> RunTrace {
    run_cfg.validate().expect("invalid run configuration");
    let mut state = init.clone();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut converged = false;
    for nu in 0..run_cfg.max_iters {
        let kcfg = run_cfg.schedule.kernel_at(nu);
        let (avg_density, next) = match run_cfg.mode {
            Mode::Blurring => (average_density(&state, &kcfg), bfms_step(&state, &kcfg)),
            Mode::NonBlurring => {
                let per_query: Vec<f64> = state
                    .members()
                    .par_iter()
                    .map(|f| density_over(&f.values, init, 0..init.len(), &kcfg))
                    .collect();
                let avg = mean(&per_query);
                let next = nbfms_step(&state, init, &kcfg).expect("grids match by construction");
                (avg, next)
            }
        };
        let (max_shift, mean_shift) = shift_stats(&state, &next);
        rows.push(TraceRow {
            nu,
            h: kcfg.h,
            avg_density,
            max_shift,
            mean_shift,
            m: None,
        });
        state = next;
        if max_shift < run_cfg.epsilon {
            converged = true;
            break;
        }
    }
    let iters_used = rows.len();
    RunTrace {
        rows,
        final_state: state,
        converged,
        iters_used,
    }
}
