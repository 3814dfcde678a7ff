//! Seeded synthetic curve generation: well-separated Gaussian-bump cluster
//! means plus smooth random perturbations with controlled L2 norm.
//!
//! Generator recipe, fixed so runs are reproducible and documentable:
//! cluster `c` of `k` has mean `m_c(t) = (1 + c) * exp(-(u - u_c)^2 / (2 s^2))`
//! with `u` the position rescaled to [0, 1], centers `u_c = (c + 1) / (k + 1)`
//! and width `s = 0.08`. Each member adds a random low-frequency sine series
//! rescaled to a target L2 norm drawn uniformly from
//! `[noise_norm / 4, noise_norm]`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::space::{norm_slice, FunctionSample, FunctionSet, GridSpec};

const BUMP_WIDTH: f64 = 0.08;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub grid: GridSpec,
    pub clusters: usize,
    pub per_cluster: usize,
    /// Upper bound on the L2 norm of each member's perturbation.
    pub noise_norm: f64,
    /// Number of sine modes in the perturbation series.
    pub noise_modes: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(grid: GridSpec, clusters: usize, per_cluster: usize, noise_norm: f64, seed: u64) -> Self {
        Self {
            grid,
            clusters,
            per_cluster,
            noise_norm,
            noise_modes: 6,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub set: FunctionSet,
    /// Ground-truth cluster per member, aligned with `set` order.
    pub labels: Vec<usize>,
    /// The noise-free mean curves, one per cluster.
    pub means: FunctionSet,
}

/// Gaussian bump mean curve for cluster `c` of `k`.
pub fn cluster_mean_values(grid: &GridSpec, c: usize, k: usize) -> Vec<f64> {
    let center = (c + 1) as f64 / (k + 1) as f64;
    let amp = 1.0 + c as f64;
    let span = grid.domain_hi - grid.domain_lo;
    grid.points()
        .iter()
        .map(|&t| {
            let u = (t - grid.domain_lo) / span;
            let z = (u - center) / BUMP_WIDTH;
            amp * (-0.5 * z * z).exp()
        })
        .collect()
}

/// A random smooth function: a low-frequency sine series with normally
/// distributed coefficients decaying as 1/j. Unnormalized.
pub fn random_smooth_values(grid: &GridSpec, modes: usize, rng: &mut impl Rng) -> Vec<f64> {
    let span = grid.domain_hi - grid.domain_lo;
    let coeffs: Vec<(f64, f64)> = (0..modes.max(1))
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (a, phase)
        })
        .collect();
    grid.points()
        .iter()
        .map(|&t| {
            let u = (t - grid.domain_lo) / span;
            coeffs
                .iter()
                .enumerate()
                .map(|(j, &(a, phase))| {
                    let freq = (j + 1) as f64;
                    a / freq * (std::f64::consts::PI * freq * u + phase).sin()
                })
                .sum()
        })
        .collect()
}

/// A random smooth function rescaled to the exact L2 norm `target`.
pub fn random_smooth_with_norm(
    grid: &GridSpec,
    modes: usize,
    target: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut values = random_smooth_values(grid, modes, rng);
    let norm = norm_slice(&values, grid.step());
    if norm == 0.0 || target == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return values;
    }
    let scale = target / norm;
    values.iter_mut().for_each(|v| *v *= scale);
    values
}

/// Generate a labeled synthetic set. Deterministic in the seed.
pub fn generate(cfg: &SynthConfig) -> SynthData {
    assert!(cfg.clusters >= 1 && cfg.per_cluster >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mean_rows: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|c| cluster_mean_values(&cfg.grid, c, cfg.clusters))
        .collect();
    let mut members = Vec::with_capacity(cfg.clusters * cfg.per_cluster);
    let mut labels = Vec::with_capacity(cfg.clusters * cfg.per_cluster);
    for c in 0..cfg.clusters {
        for j in 0..cfg.per_cluster {
            let target = if cfg.noise_norm > 0.0 {
                rng.random_range(cfg.noise_norm / 4.0..=cfg.noise_norm)
            } else {
                0.0
            };
            let noise = random_smooth_with_norm(&cfg.grid, cfg.noise_modes, target, &mut rng);
            let values: Vec<f64> = mean_rows[c]
                .iter()
                .zip(&noise)
                .map(|(m, e)| m + e)
                .collect();
            members.push(FunctionSample::new(format!("c{c}_{j}"), values));
            labels.push(c);
        }
    }
    let set = FunctionSet::new(cfg.grid, members).expect("generated values are finite");
    let means = FunctionSet::new(
        cfg.grid,
        mean_rows
            .into_iter()
            .enumerate()
            .map(|(c, values)| FunctionSample::new(format!("mean{c}"), values))
            .collect(),
    )
    .expect("mean curves are finite");
    SynthData { set, labels, means }
}

/// Smallest pairwise L2 distance among the cluster means.
pub fn min_mean_separation(means: &FunctionSet) -> f64 {
    let step = means.grid().step();
    let mut best = f64::INFINITY;
    for a in 0..means.len() {
        for b in (a + 1)..means.len() {
            let d = crate::space::dist_slices(
                &means.member(a).values,
                &means.member(b).values,
                step,
            );
            best = best.min(d);
        }
    }
    best
}
