//! Post-convergence cluster membership: single-linkage grouping of the
//! converged configuration, center extraction, separation verification and
//! the perturbation stability experiment.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ScheduleRule;
use crate::meanshift::{run_full, RunConfig};
use crate::space::{dist_slices, weighted_mean, FunctionSample, FunctionSet};
use crate::synth::random_smooth_with_norm;

/// Final labels, representative centers and cluster sizes.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// Cluster id per original member, numbered by descending cluster size
    /// (ties broken by smallest member index).
    pub labels: Vec<usize>,
    /// One representative function per cluster: the member-wise mean of the
    /// cluster's converged functions.
    pub centers: FunctionSet,
    pub sizes: Vec<usize>,
    pub merge_radius: f64,
}

/// Single-linkage grouping: members share a cluster iff they are connected
/// by a chain of pairwise distances `<= merge_radius`.
pub fn assign_clusters(final_state: &FunctionSet, merge_radius: f64) -> Result<ClusterResult> {
    if !(merge_radius > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "merge_radius must be > 0, got {merge_radius}"
        )));
    }
    let n = final_state.len();
    let step = final_state.grid().step();
    let mut component = vec![usize::MAX; n];
    let mut num_components = 0usize;
    let mut frontier: Vec<usize> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let c = num_components;
        num_components += 1;
        component[start] = c;
        frontier.clear();
        frontier.push(start);
        while let Some(u) = frontier.pop() {
            let fu = &final_state.member(u).values;
            let reached: Vec<usize> = (0..n)
                .into_par_iter()
                .filter(|&v| {
                    component[v] == usize::MAX
                        && dist_slices(fu, &final_state.member(v).values, step) <= merge_radius
                })
                .collect();
            for v in reached {
                if component[v] == usize::MAX {
                    component[v] = c;
                    frontier.push(v);
                }
            }
        }
    }

    // canonical numbering: descending size, ties by smallest member index
    let mut sizes = vec![0usize; num_components];
    let mut first_member = vec![usize::MAX; num_components];
    for (i, &c) in component.iter().enumerate() {
        sizes[c] += 1;
        if first_member[c] == usize::MAX {
            first_member[c] = i;
        }
    }
    let mut order: Vec<usize> = (0..num_components).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(sizes[c]), first_member[c]));
    let mut renumber = vec![0usize; num_components];
    for (new_id, &old_id) in order.iter().enumerate() {
        renumber[old_id] = new_id;
    }
    let labels: Vec<usize> = component.iter().map(|&c| renumber[c]).collect();

    let mut centers = Vec::with_capacity(num_components);
    let mut final_sizes = Vec::with_capacity(num_components);
    for new_id in 0..num_components {
        let members: Vec<FunctionSample> = labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == new_id)
            .map(|(i, _)| final_state.member(i).clone())
            .collect();
        final_sizes.push(members.len());
        let weights = vec![1.0; members.len()];
        let mut center = weighted_mean(&members, &weights).expect("cluster is nonempty");
        center.id = format!("c{new_id}");
        centers.push(center);
    }
    Ok(ClusterResult {
        labels,
        centers: FunctionSet::from_members_unchecked(*final_state.grid(), centers),
        sizes: final_sizes,
        merge_radius,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterPair {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Report of pairwise center distances at or below `tau`. Expected empty for
/// converged constant-bandwidth blurring runs.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub tau: f64,
    pub violations: Vec<CenterPair>,
    pub pass: bool,
}

pub fn check_separation(result: &ClusterResult, tau: f64) -> SeparationReport {
    let step = result.centers.grid().step();
    let k = result.centers.len();
    let mut violations = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let d = dist_slices(
                &result.centers.member(a).values,
                &result.centers.member(b).values,
                step,
            );
            if d <= tau {
                violations.push(CenterPair { a, b, distance: d });
            }
        }
    }
    let pass = violations.is_empty();
    SeparationReport {
        tau,
        violations,
        pass,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub reps: usize,
    pub preserved: usize,
    pub failed_reps: Vec<usize>,
    pub pass: bool,
    pub perturbation_scale: f64,
    pub tau: f64,
}

/// Perturbation stability experiment: replicate each center `sizes[c]`
/// times, add independent smooth perturbations with L2 norms drawn uniformly
/// below `perturbation_scale`, run the constant-bandwidth blurring loop, and
/// compare the induced membership with the unperturbed one.
///
/// Preconditions mirror the regime in which stability is guaranteed:
/// pairwise center distances must exceed `tau + separation_margin` and
/// `perturbation_scale` must stay below `tau / 2`.
pub fn stability_experiment(
    centers: &FunctionSet,
    sizes: &[usize],
    tau: f64,
    separation_margin: f64,
    perturbation_scale: f64,
    reps: usize,
    seed: u64,
    run_cfg: &RunConfig,
) -> Result<StabilityReport> {
    if centers.len() != sizes.len() || sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidExperiment(
            "sizes must match centers and be positive".into(),
        ));
    }
    if !(separation_margin > 0.0) {
        return Err(Error::InvalidExperiment(
            "separation margin must be > 0".into(),
        ));
    }
    if !(perturbation_scale >= 0.0) || perturbation_scale >= tau / 2.0 {
        return Err(Error::InvalidExperiment(format!(
            "perturbation scale must lie in [0, tau/2), got {perturbation_scale} with tau {tau}"
        )));
    }
    if !matches!(run_cfg.schedule.rule, ScheduleRule::Constant(_)) {
        return Err(Error::InvalidExperiment(
            "stability runs require a constant bandwidth".into(),
        ));
    }
    let step = centers.grid().step();
    for a in 0..centers.len() {
        for b in (a + 1)..centers.len() {
            let d = dist_slices(
                &centers.member(a).values,
                &centers.member(b).values,
                step,
            );
            if d <= tau + separation_margin {
                return Err(Error::InvalidExperiment(format!(
                    "centers {a} and {b} are {d} apart, need > tau + margin = {}",
                    tau + separation_margin
                )));
            }
        }
    }

    // ground-truth membership of the replicated configuration
    let truth: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    let merge_radius = run_cfg.epsilon * 10.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut preserved = 0usize;
    let mut failed_reps = Vec::new();
    for rep in 0..reps {
        let mut members = Vec::with_capacity(truth.len());
        for (c, &s) in sizes.iter().enumerate() {
            for j in 0..s {
                let norm = if perturbation_scale > 0.0 {
                    rng.random_range(0.0..perturbation_scale)
                } else {
                    0.0
                };
                let bump = random_smooth_with_norm(centers.grid(), 6, norm, &mut rng);
                let values: Vec<f64> = centers
                    .member(c)
                    .values
                    .iter()
                    .zip(&bump)
                    .map(|(v, e)| v + e)
                    .collect();
                members.push(FunctionSample::new(format!("r{rep}_c{c}_{j}"), values));
            }
        }
        let perturbed = FunctionSet::new(*centers.grid(), members)?;
        let trace = run_full(&perturbed, run_cfg);
        let result = assign_clusters(&trace.final_state, merge_radius)?;
        if same_partition(&result.labels, &truth) {
            preserved += 1;
        } else {
            failed_reps.push(rep);
        }
    }
    let pass = preserved == reps;
    Ok(StabilityReport {
        reps,
        preserved,
        failed_reps,
        pass,
        perturbation_scale,
        tau,
    })
}

/// Relabel by order of first occurrence so partitions compare independently
/// of label names.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let id = match map.iter().find(|&&(k, _)| k == l) {
            Some(&(_, v)) => v,
            None => {
                let v = map.len();
                map.push((l, v));
                v
            }
        };
        out.push(id);
    }
    out
}

/// Whether two label vectors induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && canonical_labels(a) == canonical_labels(b)
}

/// Adjusted Rand index between two labelings of the same members.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().flatten().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.iter().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.iter().map(|&v| choose2(v)).sum();
    let total = choose2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() == 0.0 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BandwidthSchedule;
    use crate::meanshift::Mode;
    use crate::space::GridSpec;
    use rand::Rng;

    fn constant_set(values: &[f64], p: usize) -> FunctionSet {
        let grid = GridSpec::unit(p).unwrap();
        let members = values
            .iter()
            .enumerate()
            .map(|(i, &v)| FunctionSample::new(format!("m{i}"), vec![v; p]))
            .collect();
        FunctionSet::new(grid, members).unwrap()
    }

    #[test]
    fn collapsed_state_is_one_cluster() {
        let set = constant_set(&[2.0, 2.0, 2.0], 7);
        let res = assign_clusters(&set, 0.1).unwrap();
        assert_eq!(res.sizes, vec![3]);
        assert_eq!(res.labels, vec![0, 0, 0]);
        assert_eq!(res.centers.member(0).values, vec![2.0; 7]);
    }

    #[test]
    fn separated_groups_keep_their_sizes() {
        let set = constant_set(&[0.0, 0.0, 5.0, 5.0, 5.0], 7);
        let res = assign_clusters(&set, 1.0).unwrap();
        // larger group gets label 0
        assert_eq!(res.labels, vec![1, 1, 0, 0, 0]);
        assert_eq!(res.sizes, vec![3, 2]);
    }

    #[test]
    fn labels_match_quadratic_union_find_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = 6;
        let n = 40;
        let grid = GridSpec::unit(p).unwrap();
        // scatter members around three loose anchors
        let members: Vec<FunctionSample> = (0..n)
            .map(|i| {
                let anchor = (i % 3) as f64 * 2.0;
                let values = (0..p)
                    .map(|_| anchor + rng.random_range(-0.05..0.05))
                    .collect();
                FunctionSample::new(format!("m{i}"), values)
            })
            .collect();
        let set = FunctionSet::new(grid, members).unwrap();
        let radius = 0.4;
        let res = assign_clusters(&set, radius).unwrap();

        // oracle: union-find over the full pairwise distance matrix
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d =
                    crate::space::l2_dist(set.member(i), set.member(j), set.grid()).unwrap();
                if d <= radius {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
        let oracle: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        assert!(same_partition(&res.labels, &oracle));
    }

    #[test]
    fn assignment_is_permutation_invariant_up_to_partition() {
        let set = constant_set(&[0.0, 0.01, 5.0, 5.01, 9.0], 5);
        let res = assign_clusters(&set, 0.5).unwrap();
        let mut rev: Vec<FunctionSample> = set.members().to_vec();
        rev.reverse();
        let set_rev = FunctionSet::new(*set.grid(), rev).unwrap();
        let res_rev = assign_clusters(&set_rev, 0.5).unwrap();
        let unreversed: Vec<usize> = res_rev.labels.iter().rev().copied().collect();
        assert!(same_partition(&res.labels, &unreversed));
        let mut sizes = res.sizes.clone();
        let mut sizes_rev = res_rev.sizes.clone();
        sizes.sort_unstable();
        sizes_rev.sort_unstable();
        assert_eq!(sizes, sizes_rev);
    }

    #[test]
    fn every_member_is_near_some_same_cluster_member() {
        let set = constant_set(&[0.0, 0.3, 0.6, 5.0], 5);
        let radius = 0.4;
        let res = assign_clusters(&set, radius).unwrap();
        for i in 0..set.len() {
            let close_or_singleton = (0..set.len()).any(|j| {
                j != i
                    && res.labels[j] == res.labels[i]
                    && crate::space::l2_dist(set.member(i), set.member(j), set.grid()).unwrap()
                        <= radius
            }) || res.sizes[res.labels[i]] == 1;
            assert!(close_or_singleton, "member {i} stranded");
        }
    }

    #[test]
    fn separation_report_flags_close_centers() {
        let set = constant_set(&[0.0, 0.0, 0.5, 0.5], 5);
        let res = assign_clusters(&set, 0.1).unwrap();
        let report = check_separation(&res, 1.0);
        assert!(!report.pass);
        assert_eq!(report.violations.len(), 1);
        let report2 = check_separation(&res, 0.2);
        assert!(report2.pass);
    }

    fn stability_run_cfg(tau: f64, h: f64) -> RunConfig {
        RunConfig {
            schedule: BandwidthSchedule::constant(tau, h),
            epsilon: 1e-8,
            max_iters: 300,
            mode: Mode::Blurring,
        }
    }

    #[test]
    fn zero_perturbation_preserves_membership_trivially() {
        let tau = 1.0;
        let centers = constant_set(&[0.0, 3.0 * tau], 9);
        let report = stability_experiment(
            &centers,
            &[3, 2],
            tau,
            tau,
            0.0,
            3,
            5,
            &stability_run_cfg(tau, 0.5),
        )
        .unwrap();
        assert!(report.pass);
        assert_eq!(report.preserved, 3);
    }

    #[test]
    fn close_centers_are_rejected() {
        let tau = 1.0;
        let centers = constant_set(&[0.0, 0.5 * tau], 9);
        let err = stability_experiment(
            &centers,
            &[2, 2],
            tau,
            0.1,
            0.1,
            2,
            5,
            &stability_run_cfg(tau, 0.5),
        );
        assert!(matches!(err, Err(Error::InvalidExperiment(_))));
    }

    #[test]
    fn perturbations_within_half_tau_preserve_membership() {
        let tau = 1.0;
        let centers = constant_set(&[0.0, 3.0 * tau], 17);
        let report = stability_experiment(
            &centers,
            &[4, 3],
            tau,
            tau,
            0.4 * tau,
            5,
            42,
            &stability_run_cfg(tau, 0.5),
        )
        .unwrap();
        assert!(report.pass, "failed reps: {:?}", report.failed_reps);
    }

    #[test]
    fn ari_matches_hand_computed_value() {
        let a = vec![0, 0, 0, 1, 1, 1];
        let b = vec![0, 0, 1, 1, 1, 1];
        // contingency pairs: 4; expected 2.8; max 6.5 -> (4-2.8)/(6.5-2.8)
        let got = adjusted_rand_index(&a, &b);
        assert!((got - 1.2 / 3.7).abs() < 1e-12, "got {got}");
        assert_eq!(adjusted_rand_index(&a, &a), 1.0);
    }
}
