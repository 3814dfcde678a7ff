//! Truncated Gaussian kernel, the iteration-indexed bandwidth schedule and
//! influence-range estimation from data.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{dist_slices, FunctionSet};

const SQRT_2PI: f64 = 2.5066282746310002;

/// Bandwidth `h` and influence range `tau` of the truncated Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub h: f64,
    pub tau: f64,
}

impl KernelConfig {
    pub fn new(h: f64, tau: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidConfig(format!("bandwidth h must be > 0, got {h}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "influence range tau must be > 0, got {tau}"
            )));
        }
        Ok(Self { h, tau })
    }
}

/// `K_h(t) = exp(-t^2 / 2h^2) / (sqrt(2 pi) h)` for `|t| <= tau`, else 0.
///
/// The support is closed: `t == tau` is inside. The normalization constant is
/// kept even though it cancels inside the mean shift ratio, so surrogate
/// densities have a well-defined magnitude in traces.
pub fn kernel_eval(t: f64, cfg: &KernelConfig) -> f64 {
    debug_assert!(t >= 0.0);
    if t > cfg.tau {
        return 0.0;
    }
    let z = t / cfg.h;
    (-0.5 * z * z).exp() / (SQRT_2PI * cfg.h)
}

/// How the bandwidth evolves with the iteration index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "h0")]
pub enum ScheduleRule {
    /// `h(nu) = tau / (100 sqrt(2)) * (5 + 2 nu)`, growing linearly so early
    /// iterations resolve fine-scale modes and later ones merge them.
    PaperLinear,
    /// Fixed bandwidth, the setting under which the monotonicity and
    /// convergence guarantees hold.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    pub tau: f64,
    pub rule: ScheduleRule,
}

impl BandwidthSchedule {
    pub fn paper_linear(tau: f64) -> Self {
        Self {
            tau,
            rule: ScheduleRule::PaperLinear,
        }
    }

    pub fn constant(tau: f64, h0: f64) -> Self {
        Self {
            tau,
            rule: ScheduleRule::Constant(h0),
        }
    }

    pub fn bandwidth_at(&self, nu: usize) -> f64 {
        schedule_bandwidth(nu, self)
    }

    /// Kernel for iteration `nu` (bandwidth from the rule, fixed `tau`).
    pub fn kernel_at(&self, nu: usize) -> KernelConfig {
        KernelConfig {
            h: self.bandwidth_at(nu),
            tau: self.tau,
        }
    }
}

/// Bandwidth for iteration `nu` under the schedule. Not capped; run loops
/// bound the iteration count instead.
pub fn schedule_bandwidth(nu: usize, sched: &BandwidthSchedule) -> f64 {
    match sched.rule {
        ScheduleRule::PaperLinear => sched.tau / (100.0 * 2f64.sqrt()) * (5.0 + 2.0 * nu as f64),
        ScheduleRule::Constant(h0) => h0,
    }
}

/// Linear-interpolation percentile of a sorted slice, `q` in [0, 100].
///
/// `rank = q/100 * (len-1)` interpolated between neighboring order
/// statistics. This is the convention oracles must match.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = rank - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
}

/// Draw `min(k, n)` distinct indices from `0..n`, deterministic in `seed`.
/// The returned indices are sorted ascending.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Influence range as a percentile of pairwise L2 distances over a seeded
/// subsample drawn without replacement.
pub fn estimate_tau(
    data: &FunctionSet,
    sample_size: usize,
    percentile: f64,
    seed: u64,
) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::InvalidConfig(format!(
            "percentile must be in (0, 100), got {percentile}"
        )));
    }
    if sample_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "tau sample size must be >= 2, got {sample_size}"
        )));
    }
    let idx = sample_indices(data.len(), sample_size, seed);
    let step = data.grid().step();
    let pairs: Vec<(usize, usize)> = (0..idx.len())
        .flat_map(|a| ((a + 1)..idx.len()).map(move |b| (a, b)))
        .collect();
    let mut dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            dist_slices(
                &data.member(idx[a]).values,
                &data.member(idx[b]).values,
                step,
            )
        })
        .collect();
    dists.sort_unstable_by(f64::total_cmp);
    Ok(percentile_linear(&dists, percentile))
}
