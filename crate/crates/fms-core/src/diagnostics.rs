//! Numerical checks of the analytical machinery behind the blurring loop:
//! directional (Gateaux) derivatives of the surrogate density, the quadratic
//! minorizer driving the monotonicity argument, and stationarity / mode
//! verification at converged states.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::meanshift::average_density;
use crate::space::{dist_slices, inner_slices, norm_slice, FunctionSample, FunctionSet};

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard Gaussian density, the base kernel shape.
fn gauss(t: f64) -> f64 {
    (-0.5 * t * t).exp() / SQRT_2PI
}

/// `<a - b, g>` under the trapezoid rule, without materializing `a - b`.
fn inner_diff(a: &[f64], b: &[f64], g: &[f64], step: f64) -> f64 {
    let p = a.len();
    let mut acc = 0.0;
    for k in 0..p {
        let term = (a[k] - b[k]) * g[k];
        acc += if k == 0 || k == p - 1 { 0.5 * term } else { term };
    }
    acc * step
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

/// First directional derivative of the surrogate density at `f` along `g`:
/// `-(1/(n h^3)) sum_i G(r_i/h) <f - f_i, g>` over members with `r_i <= tau`,
/// where `G` is the standard Gaussian and `r_i = ||f - f_i||`. Linear in `g`.
pub fn gateaux_first(
    f: &FunctionSample,
    data: &FunctionSet,
    g: &FunctionSample,
    cfg: &KernelConfig,
) -> Result<f64> {
    check_on_grid(f, data)?;
    check_on_grid(g, data)?;
    let step = data.grid().step();
    let n = data.len();
    let mut acc = 0.0;
    for member in data.members() {
        let r = dist_slices(&f.values, &member.values, step);
        if r > cfg.tau {
            continue;
        }
        acc += gauss(r / cfg.h) * inner_diff(&f.values, &member.values, &g.values, step);
    }
    Ok(-acc / (n as f64 * cfg.h.powi(3)))
}

/// Second directional derivative (Gateaux Hessian) along `[g1, g2]`:
/// `-(1/(n h^4)) sum_i G'(r_i/h) <f-f_i,g1><f-f_i,g2> / r_i
///  - (1/(n h^3)) sum_i G(r_i/h) <g2,g1>`
/// with `G'(t) = -t G(t)`, summed over members with `r_i <= tau`.
///
/// The formula divides by `r_i`, so a member coincident with `f` is an
/// error; callers perturb or exclude.
pub fn gateaux_second(
    f: &FunctionSample,
    data: &FunctionSet,
    g1: &FunctionSample,
    g2: &FunctionSample,
    cfg: &KernelConfig,
) -> Result<f64> {
    check_on_grid(f, data)?;
    check_on_grid(g1, data)?;
    check_on_grid(g2, data)?;
    let step = data.grid().step();
    let n = data.len() as f64;
    let mut curvature = 0.0;
    let mut weight_sum = 0.0;
    for (index, member) in data.members().iter().enumerate() {
        let r = dist_slices(&f.values, &member.values, step);
        if r > cfg.tau {
            continue;
        }
        if r == 0.0 {
            return Err(Error::CoincidentPoint { index });
        }
        let z = r / cfg.h;
        let g_prime = -z * gauss(z);
        let i1 = inner_diff(&f.values, &member.values, &g1.values, step);
        let i2 = inner_diff(&f.values, &member.values, &g2.values, step);
        curvature += g_prime * i1 * i2 / r;
        weight_sum += gauss(z);
    }
    let cross = inner_slices(&g2.values, &g1.values, step);
    Ok(-curvature / (n * cfg.h.powi(4)) - weight_sum * cross / (n * cfg.h.powi(3)))
}

/// Analytic-versus-finite-difference comparison for one derivative value.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeReport {
    pub analytic: f64,
    pub finite_diff: f64,
    pub rel_error: f64,
    pub step_used: f64,
    /// Central differences at `step_used`, `step_used/2`, `step_used/4`.
    pub sweep: [f64; 3],
}

fn rel_error(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(1e-12)
}

fn displaced(f: &FunctionSample, g: &FunctionSample, eps: f64) -> FunctionSample {
    FunctionSample::new(
        f.id.clone(),
        f.values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| a + eps * b)
            .collect(),
    )
}

/// Check `gateaux_first` against central differences of the surrogate
/// density, with a three-point step sweep.
pub fn first_derivative_report(
    f: &FunctionSample,
    data: &FunctionSet,
    g: &FunctionSample,
    cfg: &KernelConfig,
) -> Result<DerivativeReport> {
    let analytic = gateaux_first(f, data, g, cfg)?;
    let step_used = 1e-5 * (1.0 + norm_slice(&f.values, data.grid().step()));
    let fd = |eps: f64| -> Result<f64> {
        let plus = crate::meanshift::surrogate_density(&displaced(f, g, eps), data, cfg)?;
        let minus = crate::meanshift::surrogate_density(&displaced(f, g, -eps), data, cfg)?;
        Ok((plus - minus) / (2.0 * eps))
    };
    let sweep = [fd(step_used)?, fd(step_used / 2.0)?, fd(step_used / 4.0)?];
    let finite_diff = sweep[0];
    Ok(DerivativeReport {
        analytic,
        finite_diff,
        rel_error: rel_error(analytic, finite_diff),
        step_used,
        sweep,
    })
}

/// Check `gateaux_second` against central differences of `gateaux_first`
/// along `g2`.
pub fn second_derivative_report(
    f: &FunctionSample,
    data: &FunctionSet,
    g1: &FunctionSample,
    g2: &FunctionSample,
    cfg: &KernelConfig,
) -> Result<DerivativeReport> {
    let analytic = gateaux_second(f, data, g1, g2, cfg)?;
    let step_used = 1e-5 * (1.0 + norm_slice(&f.values, data.grid().step()));
    let fd = |eps: f64| -> Result<f64> {
        let plus = gateaux_first(&displaced(f, g2, eps), data, g1, cfg)?;
        let minus = gateaux_first(&displaced(f, g2, -eps), data, g1, cfg)?;
        Ok((plus - minus) / (2.0 * eps))
    };
    let sweep = [fd(step_used)?, fd(step_used / 2.0)?, fd(step_used / 4.0)?];
    let finite_diff = sweep[0];
    Ok(DerivativeReport {
        analytic,
        finite_diff,
        rel_error: rel_error(analytic, finite_diff),
        step_used,
        sweep,
    })
}

/// True when no member distance from `f` falls inside `(tau - margin, tau]`.
/// Finite-difference probes displace `f` slightly, so comparisons are only
/// meaningful when no member sits within a probe step of the truncation
/// boundary.
pub fn truncation_safe(
    f: &FunctionSample,
    data: &FunctionSet,
    cfg: &KernelConfig,
    margin: f64,
) -> bool {
    let step = data.grid().step();
    data.members().iter().all(|m| {
        let r = dist_slices(&f.values, &m.values, step);
        r <= cfg.tau - margin || r > cfg.tau
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberStationarity {
    pub member: usize,
    pub max_abs_first: f64,
    pub first_ok: bool,
    /// True when every within-tau neighbor sits closer than one bandwidth,
    /// the regime in which the limit is a mode and curvature is checked.
    pub mode_condition_applies: bool,
    /// True when the evaluation point had to be nudged off a coincident
    /// member before the curvature could be computed.
    pub perturbed: bool,
    pub max_second: Option<f64>,
    pub second_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub tol: f64,
    pub directions: usize,
    pub members: Vec<MemberStationarity>,
    pub pass: bool,
}

fn unit_direction(p: usize, step: f64, rng: &mut impl Rng) -> FunctionSample {
    loop {
        let values: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = norm_slice(&values, step);
        if norm > 1e-12 {
            return FunctionSample::new(
                String::new(),
                values.into_iter().map(|v| v / norm).collect(),
            );
        }
    }
}

/// Evaluate first-derivative stationarity (|derivative| <= tol in random
/// unit directions) at every member, and negative curvature where the mode
/// condition applies. Coincident members (always including the member
/// itself) are handled by nudging the evaluation point by `1e-6 * h` along
/// a dedicated direction.
pub fn check_stationarity(
    state: &FunctionSet,
    cfg: &KernelConfig,
    directions: usize,
    seed: u64,
    tol: f64,
) -> StationarityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = state.grid().num_points;
    let step = state.grid().step();
    let dirs: Vec<FunctionSample> = (0..directions)
        .map(|_| unit_direction(p, step, &mut rng))
        .collect();
    let nudge = unit_direction(p, step, &mut rng);

    let members: Vec<MemberStationarity> = (0..state.len())
        .into_par_iter()
        .map(|i| {
            let f = state.member(i);
            let mut max_abs_first = 0.0f64;
            for g in &dirs {
                let d = gateaux_first(f, state, g, cfg).expect("grids match");
                max_abs_first = max_abs_first.max(d.abs());
            }
            let first_ok = max_abs_first <= tol;

            let mode_condition_applies = (0..state.len()).all(|j| {
                if j == i {
                    return true;
                }
                let r = dist_slices(&f.values, &state.member(j).values, step);
                r > cfg.tau || r < cfg.h
            });

            let (mut perturbed, mut max_second, mut second_ok) = (false, None, None);
            if mode_condition_applies {
                let mut eval_point = f.clone();
                let mut worst: Option<f64> = None;
                for g in &dirs {
                    let value = match gateaux_second(&eval_point, state, g, g, cfg) {
                        Ok(v) => Some(v),
                        Err(Error::CoincidentPoint { .. }) => {
                            if !perturbed {
                                perturbed = true;
                                eval_point = displaced(f, &nudge, 1e-6 * cfg.h);
                            }
                            gateaux_second(&eval_point, state, g, g, cfg).ok()
                        }
                        Err(_) => None,
                    };
                    match (value, worst) {
                        (Some(v), Some(w)) => worst = Some(w.max(v)),
                        (Some(v), None) => worst = Some(v),
                        (None, _) => {}
                    }
                }
                max_second = worst;
                second_ok = worst.map(|w| w < 0.0);
            }
            MemberStationarity {
                member: i,
                max_abs_first,
                first_ok,
                mode_condition_applies,
                perturbed,
                max_second,
                second_ok,
            }
        })
        .collect();

    let pass = members
        .iter()
        .all(|m| m.first_ok && m.second_ok != Some(false));
    StationarityReport {
        tol,
        directions,
        members,
        pass,
    }
}

/// Quadratic minorizer of the average surrogate density, tangent at the
/// current configuration:
/// `R(F | F0) = rho(F0) + (1/(2 n^2 h^2)) sum_{i,j} K_h(||f0_i - f0_j||)
///              (||f0_i - f0_j||^2 - ||f_i - f_j||^2)`.
pub fn minorizer_value(
    candidate: &FunctionSet,
    current: &FunctionSet,
    cfg: &KernelConfig,
) -> Result<f64> {
    if candidate.grid() != current.grid() {
        return Err(Error::GridMismatch {
            expected: current.grid().num_points,
            got: candidate.grid().num_points,
        });
    }
    if candidate.len() != current.len() {
        return Err(Error::LengthMismatch {
            left: candidate.len(),
            right: current.len(),
        });
    }
    let n = current.len();
    let step = current.grid().step();
    let rho = average_density(current, cfg);
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                let d0 = dist_slices(
                    &current.member(i).values,
                    &current.member(j).values,
                    step,
                );
                let w = crate::kernel::kernel_eval(d0, cfg);
                if w == 0.0 {
                    continue;
                }
                let d1 = dist_slices(
                    &candidate.member(i).values,
                    &candidate.member(j).values,
                    step,
                );
                acc += w * (d0 * d0 - d1 * d1);
            }
            acc
        })
        .collect();
    let total: f64 = per_row.iter().sum();
    Ok(rho + total / (2.0 * (n * n) as f64 * cfg.h * cfg.h))
}

/// Convexity inequality of `pi_h(t) = exp(-t / h^2)`:
/// `pi_h(x) - pi_h(y) >= pi_h(y) (y - x) / h^2`, within `1e-14` slack.
pub fn kernel_lemma_check(x: f64, y: f64, h: f64) -> bool {
    let pi = |t: f64| (-t / (h * h)).exp();
    let lhs = pi(x) - pi(y);
    let rhs = pi(y) * (y - x) / (h * h);
    lhs - rhs >= -1e-14
}
