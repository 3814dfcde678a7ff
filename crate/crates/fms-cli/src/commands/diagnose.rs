use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fms_core::diagnostics::truncation_safe;
use fms_core::synth::random_smooth_with_norm;
use fms_core::{
    average_density, bfms_step, check_stationarity, first_derivative_report, kernel_lemma_check,
    minorizer_value, run_full, second_derivative_report, BandwidthSchedule, FunctionSample, Mode,
    RunConfig,
};

use crate::commands::{resolve_tau, write_summary};
use crate::config::AppConfig;
use crate::CliError;

const FIRST_DERIVATIVE_TOL: f64 = 1e-4;
const SECOND_DERIVATIVE_TOL: f64 = 1e-3;
const CHAIN_TOL: f64 = 1e-10;

pub fn run(data_path: &Path, cfg: &mut AppConfig, out_dir: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let set = fms_core::io::read_function_set(data_path)?;
    let tau = resolve_tau(cfg, &set)?;
    let schedule = cfg.schedule(tau)?;
    let kcfg = schedule.kernel_at(0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Stationarity holds at the limit of the constant-bandwidth blurring
    // iteration, so converge from the given state first, then check there.
    let converge_cfg = RunConfig {
        schedule: BandwidthSchedule::constant(kcfg.tau, kcfg.h),
        epsilon: cfg.run.epsilon,
        max_iters: cfg.run.max_iters,
        mode: Mode::Blurring,
    };
    let trace = run_full(&set, &converge_cfg);
    let tol = 10.0 * cfg.run.epsilon / kcfg.h.powi(3);
    let stationarity = check_stationarity(
        &trace.final_state,
        &kcfg,
        cfg.diagnose.directions,
        cfg.seed,
        tol,
    );
    let stationarity_pass = trace.converged && stationarity.pass;

    // analytic derivatives against finite differences at displaced members
    let grid = set.grid();
    let mut derivative_rows = Vec::new();
    let mut derivatives_pass = true;
    for trial in 0..cfg.diagnose.derivative_trials {
        let base = set.member(trial % set.len());
        let offset = random_smooth_with_norm(grid, 5, 0.05 * kcfg.h, &mut rng);
        let f = FunctionSample::new(
            format!("trial{trial}"),
            base.values
                .iter()
                .zip(&offset)
                .map(|(a, b)| a + b)
                .collect(),
        );
        let g1 = FunctionSample::new("g1", random_smooth_with_norm(grid, 5, 1.0, &mut rng));
        let g2 = FunctionSample::new("g2", random_smooth_with_norm(grid, 5, 1.0, &mut rng));
        let fd_step = 1e-5 * (1.0 + fms_core::l2_norm(&f, grid).unwrap_or(0.0));
        if !truncation_safe(&f, &set, &kcfg, 20.0 * fd_step) {
            derivative_rows.push(serde_json::json!({
                "trial": trial,
                "skipped": "members too close to the truncation boundary",
            }));
            continue;
        }
        let first = first_derivative_report(&f, &set, &g1, &kcfg)?;
        let second = second_derivative_report(&f, &set, &g1, &g2, &kcfg)?;
        let ok = first.rel_error <= FIRST_DERIVATIVE_TOL
            && second.rel_error <= SECOND_DERIVATIVE_TOL;
        derivatives_pass &= ok;
        derivative_rows.push(serde_json::json!({
            "trial": trial,
            "first": first,
            "second": second,
            "pass": ok,
        }));
    }

    // minorizer chain along a constant-bandwidth trajectory from this state
    let mut state = set.clone();
    let mut chain_pass = true;
    let mut min_slack = f64::INFINITY;
    for _ in 0..cfg.diagnose.minorizer_steps {
        let next = bfms_step(&state, &kcfg);
        let rho0 = average_density(&state, &kcfg);
        let r_tangent = minorizer_value(&state, &state, &kcfg)?;
        let r_next = minorizer_value(&next, &state, &kcfg)?;
        let rho1 = average_density(&next, &kcfg);
        let scale = rho0.abs().max(1.0);
        chain_pass &= rho0 == r_tangent;
        let slack1 = r_next - r_tangent;
        let slack2 = rho1 - r_next;
        chain_pass &= slack1 >= -CHAIN_TOL * scale && slack2 >= -CHAIN_TOL * scale;
        min_slack = min_slack.min(slack1).min(slack2);
        state = next;
    }

    // kernel convexity inequality over random triples
    let mut lemma_failures = 0usize;
    for _ in 0..cfg.diagnose.lemma_trials {
        let x = rng.random_range(1e-6..30.0);
        let y = rng.random_range(1e-6..30.0);
        let h = rng.random_range(0.05..5.0);
        if !kernel_lemma_check(x, y, h) {
            lemma_failures += 1;
        }
    }
    let lemma_pass = lemma_failures == 0;

    let pass = stationarity.pass && derivatives_pass && chain_pass && lemma_pass;
    let report = serde_json::json!({
        "kernel": { "h": kcfg.h, "tau": kcfg.tau },
        "stationarity": {
            "tol": tol,
            "tol_formula": "10 * epsilon / h^3",
            "report": stationarity,
        },
        "derivatives": {
            "first_tol": FIRST_DERIVATIVE_TOL,
            "second_tol": SECOND_DERIVATIVE_TOL,
            "trials": derivative_rows,
            "pass": derivatives_pass,
        },
        "minorizer_chain": {
            "steps": cfg.diagnose.minorizer_steps,
            "tol": CHAIN_TOL,
            "min_slack": min_slack,
            "pass": chain_pass,
        },
        "kernel_lemma": {
            "trials": cfg.diagnose.lemma_trials,
            "failures": lemma_failures,
            "pass": lemma_pass,
        },
        "pass": pass,
    });
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Data(fms_core::Error::Format(e.to_string())))?;
    std::fs::write(out_dir.join("diagnostics.json"), text + "\n")?;
    cfg.write_resolved(out_dir)?;
    write_summary(
        out_dir,
        &serde_json::json!({
            "command": "diagnose",
            "data": data_path.display().to_string(),
            "n": set.len(),
            "pass": pass,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
        }),
    )
}
