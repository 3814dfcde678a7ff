//! Cross-module behavior: generated data through the run loops, cluster
//! assignment and diagnostics.

use fms_core::*;

fn three_cluster_data(per_cluster: usize, noise: f64, seed: u64) -> SynthData {
    let grid = GridSpec::unit(50).unwrap();
    generate(&SynthConfig::new(grid, 3, per_cluster, noise, seed))
}

#[test]
fn full_run_recovers_synthetic_clusters() {
    let data = three_cluster_data(20, 0.05, 11);
    let sep = fms_core::synth::min_mean_separation(&data.means);
    let tau = sep / 3.2;
    let run = RunConfig {
        schedule: BandwidthSchedule::constant(tau, tau / 2.0),
        epsilon: 1e-8,
        max_iters: 300,
        mode: Mode::Blurring,
    };
    let trace = run_full(&data.set, &run);
    assert!(trace.converged, "did not converge in {} iters", run.max_iters);
    let result = assign_clusters(&trace.final_state, run.epsilon * 10.0).unwrap();
    assert_eq!(result.sizes.len(), 3);
    assert_eq!(adjusted_rand_index(&result.labels, &data.labels), 1.0);
    let separation = check_separation(&result, tau);
    assert!(separation.pass, "violations: {:?}", separation.violations);
}

#[test]
fn stochastic_run_matches_full_run_labels_on_separated_clusters() {
    let grid = GridSpec::unit(50).unwrap();
    let data = generate(&SynthConfig::new(grid, 2, 100, 0.05, 23));
    let sep = fms_core::synth::min_mean_separation(&data.means);
    let tau = sep / 3.2;
    let run = RunConfig {
        schedule: BandwidthSchedule::constant(tau, tau / 2.0),
        epsilon: 1e-8,
        max_iters: 300,
        mode: Mode::Blurring,
    };
    let full = run_full(&data.set, &run);
    let sto = run_stochastic(
        &data.set,
        &StochasticConfig {
            subset_size: 25,
            seed: 7,
            run: run.clone(),
        },
    );
    assert!(full.converged && sto.converged);
    let merge = run.epsilon * 10.0;
    let full_labels = assign_clusters(&full.final_state, merge).unwrap().labels;
    let sto_labels = assign_clusters(&sto.final_state, merge).unwrap().labels;
    assert!(same_partition(&full_labels, &sto_labels));
    assert!(same_partition(&full_labels, &data.labels));
}

#[test]
fn nonblurring_queries_converge_onto_modes_of_fixed_data() {
    let data = three_cluster_data(15, 0.04, 31);
    let sep = fms_core::synth::min_mean_separation(&data.means);
    let tau = sep / 3.2;
    let run = RunConfig {
        schedule: BandwidthSchedule::constant(tau, tau / 2.0),
        epsilon: 1e-7,
        max_iters: 500,
        mode: Mode::NonBlurring,
    };
    let trace = run_full(&data.set, &run);
    assert!(trace.converged);
    // queries from one cluster end up together, near the data's local mode
    let result = assign_clusters(&trace.final_state, 1e-3).unwrap();
    assert_eq!(result.sizes.len(), 3);
    assert_eq!(adjusted_rand_index(&result.labels, &data.labels), 1.0);
}

#[test]
fn stationarity_and_minorizer_hold_along_a_real_trajectory() {
    let data = three_cluster_data(10, 0.05, 41);
    let sep = fms_core::synth::min_mean_separation(&data.means);
    let tau = sep / 3.2;
    let h = tau / 2.0;
    let kcfg = KernelConfig::new(h, tau).unwrap();
    let eps = 1e-8;
    let run = RunConfig {
        schedule: BandwidthSchedule::constant(tau, h),
        epsilon: eps,
        max_iters: 300,
        mode: Mode::Blurring,
    };

    // minorizer chain along the first steps of the trajectory
    let mut state = data.set.clone();
    for _ in 0..10 {
        let next = bfms_step(&state, &kcfg);
        let rho0 = average_density(&state, &kcfg);
        let r_tangent = minorizer_value(&state, &state, &kcfg).unwrap();
        let r_next = minorizer_value(&next, &state, &kcfg).unwrap();
        let rho1 = average_density(&next, &kcfg);
        assert_eq!(rho0, r_tangent);
        assert!(r_next >= r_tangent - 1e-10 * r_tangent.abs().max(1.0));
        assert!(rho1 >= r_next - 1e-10 * rho1.abs().max(1.0));
        state = next;
    }

    let trace = run_full(&data.set, &run);
    assert!(trace.converged);
    let tol = 10.0 * eps / h.powi(3);
    let report = check_stationarity(&trace.final_state, &kcfg, 10, 99, tol);
    assert!(report.pass);
}
