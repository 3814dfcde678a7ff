//! Stochastic blurring mean shift: each iteration draws a fresh balanced
//! random partition and every member updates using only its own subset,
//! cutting the per-iteration cost from O(n^2) to O(n~ n).
//!
//! All subsets contribute updates within the same iteration; there is no
//! sequential cycling through mini-batches. The whole run is a pure function
//! of the initial state and the configuration, including the seed, for any
//! number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{percentile_linear, KernelConfig};
use crate::meanshift::{
    density_over, mean, shift_stats, shift_values, RunConfig, RunTrace, ShiftOutcome, TraceRow,
};
use crate::space::{dist_slices, norm_slice, FunctionSample, FunctionSet};

/// Seeded disjoint assignment of member indices into `m` balanced subsets
/// for one iteration.
#[derive(Debug, Clone)]
pub struct PartitionPlan {
    pub nu: usize,
    /// Member index -> subset id in `0..m`.
    pub assignment: Vec<usize>,
    /// Member indices per subset, each sorted ascending so accumulation
    /// order matches the full-data operator when `m == 1`.
    subsets: Vec<Vec<usize>>,
}

impl PartitionPlan {
    pub fn num_subsets(&self) -> usize {
        self.subsets.len()
    }

    pub fn subset(&self, k: usize) -> &[usize] {
        &self.subsets[k]
    }

    /// The subset containing member `i`.
    pub fn subset_of(&self, i: usize) -> &[usize] {
        &self.subsets[self.assignment[i]]
    }

    pub fn subset_sizes(&self) -> Vec<usize> {
        self.subsets.iter().map(Vec::len).collect()
    }
}

/// Uniformly random balanced partition of `0..n` into `m` subsets via a
/// seeded Fisher-Yates shuffle keyed by `(seed, nu)`, then contiguous
/// chunking. Sizes differ by at most one.
pub fn make_partition(n: usize, m: usize, nu: usize, seed: u64) -> Result<PartitionPlan> {
    if m == 0 || m > n {
        return Err(Error::InvalidPartition(format!(
            "need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(nu as u64);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let base = n / m;
    let extra = n % m; // first `extra` subsets get one more element
    let mut subsets = Vec::with_capacity(m);
    let mut start = 0;
    for k in 0..m {
        let size = base + usize::from(k < extra);
        let mut chunk: Vec<usize> = order[start..start + size].to_vec();
        chunk.sort_unstable();
        subsets.push(chunk);
        start += size;
    }
    let mut assignment = vec![0usize; n];
    for (k, chunk) in subsets.iter().enumerate() {
        for &i in chunk {
            assignment[i] = k;
        }
    }
    Ok(PartitionPlan {
        nu,
        assignment,
        subsets,
    })
}

/// Stochastic run configuration. `m` is derived as `round(n / subset_size)`,
/// at least 1; the per-iteration RNG is keyed by `(seed, nu)` so iterations
/// are independent and replayable mid-run.
#[derive(Debug, Clone)]
pub struct StochasticConfig {
    /// Target subset size n~.
    pub subset_size: usize,
    pub seed: u64,
    pub run: RunConfig,
}

pub(crate) fn derive_num_subsets(n: usize, subset_size: usize) -> usize {
    let m = (n as f64 / subset_size.max(1) as f64).round() as usize;
    m.clamp(1, n)
}

/// Mean shift of member `i` restricted to its own subset. The self term is
/// always included, so the denominator is positive.
pub fn subset_ms_operator(
    i: usize,
    state: &FunctionSet,
    plan: &PartitionPlan,
    cfg: &KernelConfig,
) -> ShiftOutcome {
    assert_eq!(plan.assignment.len(), state.len(), "plan does not match state");
    let f = state.member(i);
    let (values, isolated) = shift_values(&f.values, state, plan.subset_of(i).iter().copied(), cfg);
    ShiftOutcome {
        sample: FunctionSample::new(f.id.clone(), values),
        isolated,
    }
}

/// Subset-normalized surrogate density at member `i`.
pub fn subset_density(
    i: usize,
    state: &FunctionSet,
    plan: &PartitionPlan,
    cfg: &KernelConfig,
) -> f64 {
    assert_eq!(plan.assignment.len(), state.len(), "plan does not match state");
    density_over(
        &state.member(i).values,
        state,
        plan.subset_of(i).iter().copied(),
        cfg,
    )
}

/// Iterate the partitioned blurring update. Each iteration draws a fresh
/// partition, updates every member synchronously from the current state,
/// and records the subset approximation of the average density. Stops on
/// the same max-shift rule as the full loop.
pub fn run_stochastic(init: &FunctionSet, cfg: &StochasticConfig) -> RunTrace {
    cfg.run.validate().expect("invalid run configuration");
    let n = init.len();
    let m = derive_num_subsets(n, cfg.subset_size);
    let mut state = init.clone();
    let mut rows: Vec<TraceRow> = Vec::new();
    let mut converged = false;
    for nu in 0..cfg.run.max_iters {
        let kcfg = cfg.run.schedule.kernel_at(nu);
        let plan = make_partition(n, m, nu, cfg.seed).expect("m derived within 1..=n");
        let per_member: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                density_over(
                    &state.member(i).values,
                    &state,
                    plan.subset_of(i).iter().copied(),
                    &kcfg,
                )
            })
            .collect();
        let avg_density = mean(&per_member);
        let members: Vec<FunctionSample> = (0..n)
            .into_par_iter()
            .map(|i| {
                let f = state.member(i);
                let (values, _) =
                    shift_values(&f.values, &state, plan.subset_of(i).iter().copied(), &kcfg);
                FunctionSample::new(f.id.clone(), values)
            })
            .collect();
        let next = FunctionSet::from_members_unchecked(*state.grid(), members);
        let (max_shift, mean_shift) = shift_stats(&state, &next);
        rows.push(TraceRow {
            nu,
            h: kcfg.h,
            avg_density,
            max_shift,
            mean_shift,
            m: Some(m),
        });
        state = next;
        if max_shift < cfg.run.epsilon {
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

/// One row of the one-step approximation experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxRow {
    pub subset_size: usize,
    pub median_error: f64,
    pub iqr: f64,
    pub max_error: f64,
}

/// For each requested subset size, draw `reps` uniform subsets containing
/// `f_index` and measure the L2 gap between the subset operator and the
/// full-data operator at that member. Larger subsets should track the full
/// update more closely; the medians are computed, never assumed.
pub fn one_step_approximation_experiment(
    data: &FunctionSet,
    f_index: usize,
    subset_sizes: &[usize],
    reps: usize,
    cfg: &KernelConfig,
    seed: u64,
) -> Result<Vec<ApproxRow>> {
    let n = data.len();
    if f_index >= n {
        return Err(Error::InvalidExperiment(format!(
            "f_index {f_index} out of range for n={n}"
        )));
    }
    if reps == 0 {
        return Err(Error::InvalidExperiment("reps must be >= 1".into()));
    }
    for &s in subset_sizes {
        if s == 0 || s > n {
            return Err(Error::InvalidExperiment(format!(
                "subset size {s} out of range for n={n}"
            )));
        }
    }
    let step = data.grid().step();
    let max_norm = data
        .members()
        .iter()
        .map(|f| norm_slice(&f.values, step))
        .fold(0.0, f64::max);
    if !max_norm.is_finite() {
        return Err(Error::InvalidExperiment("member norms must be bounded".into()));
    }

    let f = &data.member(f_index).values;
    let (full, _) = shift_values(f, data, 0..n, cfg);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others: Vec<usize> = (0..n).filter(|&j| j != f_index).collect();
    let mut rows = Vec::with_capacity(subset_sizes.len());
    for &size in subset_sizes {
        let mut errors = Vec::with_capacity(reps);
        for _ in 0..reps {
            // partial Fisher-Yates over the other indices, then add f_index
            let mut pool = others.clone();
            let take = size - 1;
            for i in 0..take {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            let mut subset: Vec<usize> = pool[..take].to_vec();
            subset.push(f_index);
            subset.sort_unstable();
            let (approx, _) = shift_values(f, data, subset.iter().copied(), cfg);
            errors.push(dist_slices(&approx, &full, step));
        }
        errors.sort_unstable_by(f64::total_cmp);
        rows.push(ApproxRow {
            subset_size: size,
            median_error: percentile_linear(&errors, 50.0),
            iqr: percentile_linear(&errors, 75.0) - percentile_linear(&errors, 25.0),
            max_error: errors[errors.len() - 1],
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BandwidthSchedule;
    use crate::meanshift::{ms_operator, run_full, Mode};
    use crate::space::GridSpec;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_set(n: usize, p: usize, scale: f64, seed: u64) -> FunctionSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::unit(p).unwrap();
        let members = (0..n)
            .map(|i| {
                let values = (0..p).map(|_| rng.random_range(-scale..scale)).collect();
                FunctionSample::new(format!("m{i}"), values)
            })
            .collect();
        FunctionSet::new(grid, members).unwrap()
    }

    #[test]
    fn partition_sizes_are_balanced() {
        let plan = make_partition(10, 2, 0, 1).unwrap();
        assert_eq!(plan.subset_sizes(), vec![5, 5]);
        let plan = make_partition(10, 3, 0, 1).unwrap();
        assert_eq!(plan.subset_sizes(), vec![4, 3, 3]);
    }

    #[test]
    fn degenerate_partition_holds_everything() {
        let plan = make_partition(7, 1, 3, 9).unwrap();
        assert_eq!(plan.subset(0), &[0, 1, 2, 3, 4, 5, 6]);
        assert!(plan.assignment.iter().all(|&k| k == 0));
    }

    #[test]
    fn partition_is_deterministic_in_its_key() {
        let a = make_partition(100, 7, 5, 42).unwrap();
        let b = make_partition(100, 7, 5, 42).unwrap();
        assert_eq!(a.assignment, b.assignment);
        let c = make_partition(100, 7, 6, 42).unwrap();
        assert_ne!(a.assignment, c.assignment, "fresh partition each iteration");
    }

    #[test]
    fn partition_rejects_more_subsets_than_members() {
        assert!(matches!(
            make_partition(3, 4, 0, 0),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn singleton_subset_leaves_member_unchanged() {
        let set = random_set(4, 8, 1.0, 3);
        let plan = make_partition(4, 4, 0, 11).unwrap();
        let cfg = KernelConfig::new(0.5, 5.0).unwrap();
        for i in 0..4 {
            let out = subset_ms_operator(i, &set, &plan, &cfg);
            assert_eq!(out.sample.values, set.member(i).values);
        }
    }

    #[test]
    fn single_subset_reduces_to_full_operator_bitwise() {
        let set = random_set(12, 10, 1.0, 5);
        let plan = make_partition(12, 1, 0, 11).unwrap();
        let cfg = KernelConfig::new(0.5, 5.0).unwrap();
        for i in 0..12 {
            let sub = subset_ms_operator(i, &set, &plan, &cfg);
            let full = ms_operator(set.member(i), &set, &cfg).unwrap();
            assert_eq!(sub.sample.values, full.sample.values);
        }
    }

    #[test]
    fn subset_operator_equals_full_operator_on_extracted_subset() {
        let set = random_set(6, 8, 1.0, 17);
        let plan = make_partition(6, 2, 0, 23).unwrap();
        let cfg = KernelConfig::new(0.6, 5.0).unwrap();
        for i in 0..6 {
            let got = subset_ms_operator(i, &set, &plan, &cfg);
            // oracle: run the full operator on the sub-FunctionSet
            let members: Vec<FunctionSample> = plan
                .subset_of(i)
                .iter()
                .map(|&j| set.member(j).clone())
                .collect();
            let sub_set = FunctionSet::new(*set.grid(), members).unwrap();
            let expect = ms_operator(set.member(i), &sub_set, &cfg).unwrap();
            assert_eq!(got.sample.values, expect.sample.values);
        }
    }

    #[test]
    fn full_subset_size_reduces_run_to_full_run_bitwise() {
        let set = random_set(40, 12, 1.0, 29);
        let run = RunConfig {
            schedule: BandwidthSchedule::constant(4.0, 0.7),
            epsilon: 1e-8,
            max_iters: 60,
            mode: Mode::Blurring,
        };
        let full = run_full(&set, &run);
        let sto = run_stochastic(
            &set,
            &StochasticConfig {
                subset_size: set.len(),
                seed: 99,
                run: run.clone(),
            },
        );
        assert_eq!(full.converged, sto.converged);
        assert_eq!(full.iters_used, sto.iters_used);
        for (a, b) in full.rows.iter().zip(&sto.rows) {
            assert_eq!(a.avg_density, b.avg_density);
            assert_eq!(a.max_shift, b.max_shift);
            assert_eq!(a.mean_shift, b.mean_shift);
            assert_eq!(b.m, Some(1));
        }
        for (a, b) in full.final_state.members().iter().zip(sto.final_state.members()) {
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn stochastic_run_is_reproducible() {
        let set = random_set(60, 10, 1.0, 31);
        let cfg = StochasticConfig {
            subset_size: 15,
            seed: 1234,
            run: RunConfig {
                schedule: BandwidthSchedule::constant(4.0, 0.6),
                epsilon: 1e-7,
                max_iters: 40,
                mode: Mode::Blurring,
            },
        };
        let a = run_stochastic(&set, &cfg);
        let b = run_stochastic(&set, &cfg);
        assert_eq!(a.iters_used, b.iters_used);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.avg_density, rb.avg_density);
            assert_eq!(ra.max_shift, rb.max_shift);
        }
        for (ma, mb) in a.final_state.members().iter().zip(b.final_state.members()) {
            assert_eq!(ma.values, mb.values);
        }
    }

    #[test]
    fn experiment_full_size_has_exactly_zero_error() {
        let set = random_set(32, 8, 1.0, 41);
        let cfg = KernelConfig::new(0.8, 10.0).unwrap();
        let rows =
            one_step_approximation_experiment(&set, 3, &[8, 32], 10, &cfg, 77).unwrap();
        assert_eq!(rows[1].subset_size, 32);
        assert_eq!(rows[1].median_error, 0.0);
        assert_eq!(rows[1].iqr, 0.0);
        assert_eq!(rows[1].max_error, 0.0);
        assert!(rows[0].median_error >= 0.0);
    }

    #[test]
    fn experiment_on_identical_data_has_zero_error() {
        let grid = GridSpec::unit(8).unwrap();
        let members = (0..10)
            .map(|i| FunctionSample::new(format!("m{i}"), vec![1.5; 8]))
            .collect();
        let set = FunctionSet::new(grid, members).unwrap();
        let cfg = KernelConfig::new(0.5, 5.0).unwrap();
        let rows = one_step_approximation_experiment(&set, 0, &[2, 5], 8, &cfg, 3).unwrap();
        for row in rows {
            assert_eq!(row.median_error, 0.0);
            assert_eq!(row.max_error, 0.0);
        }
    }

    #[test]
    fn experiment_rejects_oversized_subsets() {
        let set = random_set(8, 6, 1.0, 2);
        let cfg = KernelConfig::new(0.5, 5.0).unwrap();
        assert!(matches!(
            one_step_approximation_experiment(&set, 0, &[9], 4, &cfg, 1),
            Err(Error::InvalidExperiment(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn every_index_lands_in_exactly_one_subset(
            n in 1usize..200,
            m_frac in 0.0..1.0f64,
            nu in 0usize..10,
            seed in 0u64..1000,
        ) {
            let m = 1 + (m_frac * (n - 1) as f64).floor() as usize;
            let plan = make_partition(n, m, nu, seed).unwrap();
            let mut seen = vec![0usize; n];
            for k in 0..plan.num_subsets() {
                for &i in plan.subset(k) {
                    seen[i] += 1;
                    prop_assert_eq!(plan.assignment[i], k);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes = plan.subset_sizes();
            let lo = *sizes.iter().min().unwrap();
            let hi = *sizes.iter().max().unwrap();
            prop_assert!(hi - lo <= 1, "sizes differ by more than one: {:?}", sizes);
        }
    }
}
