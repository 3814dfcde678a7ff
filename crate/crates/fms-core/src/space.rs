//! Discretized L2([a,b]) arithmetic: uniform grids, curve samples, inner
//! products, norms, distances and weighted averages.
//!
//! All integrals are approximated with the trapezoidal rule on the shared
//! uniform grid. Every operation in this module is pure; values are immutable
//! once constructed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform grid on `[domain_lo, domain_hi]` with `num_points` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain_lo: f64,
    pub domain_hi: f64,
    pub num_points: usize,
}

impl GridSpec {
    pub fn new(domain_lo: f64, domain_hi: f64, num_points: usize) -> Result<Self> {
        if !domain_lo.is_finite() || !domain_hi.is_finite() {
            return Err(Error::InvalidGrid("domain bounds must be finite".into()));
        }
        if domain_lo >= domain_hi {
            return Err(Error::InvalidGrid(format!(
                "domain_lo {domain_lo} must be < domain_hi {domain_hi}"
            )));
        }
        if num_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 grid points, got {num_points}"
            )));
        }
        Ok(Self {
            domain_lo,
            domain_hi,
            num_points,
        })
    }

    /// Unit interval grid, the default domain for synthetic data.
    pub fn unit(num_points: usize) -> Result<Self> {
        Self::new(0.0, 1.0, num_points)
    }

    pub fn step(&self) -> f64 {
        (self.domain_hi - self.domain_lo) / (self.num_points - 1) as f64
    }

    /// The k-th grid point. The last point is the exact upper bound.
    pub fn point(&self, k: usize) -> f64 {
        if k == self.num_points - 1 {
            self.domain_hi
        } else {
            self.domain_lo + k as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.num_points).map(|k| self.point(k)).collect()
    }
}

/// One curve's values on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSample {
    pub id: String,
    pub values: Vec<f64>,
}

impl FunctionSample {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            values,
        }
    }
}

/// An ordered collection of curves sharing one grid.
///
/// Admission validates that every member has exactly `num_points` finite
/// values; index `i` identifies the trajectory of member `i` across
/// iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSet {
    grid: GridSpec,
    members: Vec<FunctionSample>,
}

impl FunctionSet {
    pub fn new(grid: GridSpec, members: Vec<FunctionSample>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        for m in &members {
            if m.values.len() != grid.num_points {
                return Err(Error::GridMismatch {
                    expected: grid.num_points,
                    got: m.values.len(),
                });
            }
            for (k, v) in m.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue {
                        id: m.id.clone(),
                        index: k,
                    });
                }
            }
        }
        Ok(Self { grid, members })
    }

    /// Internal constructor for values produced by operations that preserve
    /// the admission invariants (convex combinations of admitted members).
    pub(crate) fn from_members_unchecked(grid: GridSpec, members: Vec<FunctionSample>) -> Self {
        debug_assert!(!members.is_empty());
        debug_assert!(members.iter().all(|m| m.values.len() == grid.num_points));
        Self { grid, members }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn members(&self) -> &[FunctionSample] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &FunctionSample {
        &self.members[i]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|m| m.id.as_str())
    }
}

fn check_lengths(f: &FunctionSample, g: &FunctionSample, grid: &GridSpec) -> Result<()> {
    if f.values.len() != grid.num_points {
        return Err(Error::GridMismatch {
            expected: grid.num_points,
            got: f.values.len(),
        });
    }
    if g.values.len() != grid.num_points {
        return Err(Error::GridMismatch {
            expected: grid.num_points,
            got: g.values.len(),
        });
    }
    Ok(())
}

/// Trapezoidal inner product of two value slices with grid spacing `step`.
///
/// Accumulation is fixed left-to-right so results never depend on scheduling.
pub(crate) fn inner_slices(a: &[f64], b: &[f64], step: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let p = a.len();
    let mut acc = 0.0;
    for k in 0..p {
        let term = a[k] * b[k];
        acc += if k == 0 || k == p - 1 { 0.5 * term } else { term };
    }
    acc * step
}

/// Trapezoidal L2 distance between two value slices.
pub(crate) fn dist_slices(a: &[f64], b: &[f64], step: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let p = a.len();
    let mut acc = 0.0;
    for k in 0..p {
        let d = a[k] - b[k];
        let term = d * d;
        acc += if k == 0 || k == p - 1 { 0.5 * term } else { term };
    }
    (acc * step).sqrt()
}

pub(crate) fn norm_slice(a: &[f64], step: f64) -> f64 {
    inner_slices(a, a, step).sqrt()
}

/// Trapezoidal approximation of the L2 inner product over the grid domain.
pub fn l2_inner(f: &FunctionSample, g: &FunctionSample, grid: &GridSpec) -> Result<f64> {
    check_lengths(f, g, grid)?;
    Ok(inner_slices(&f.values, &g.values, grid.step()))
}

/// L2 distance `sqrt(<f-g, f-g>)` under the same quadrature rule.
pub fn l2_dist(f: &FunctionSample, g: &FunctionSample, grid: &GridSpec) -> Result<f64> {
    check_lengths(f, g, grid)?;
    Ok(dist_slices(&f.values, &g.values, grid.step()))
}

/// L2 norm of a single sample.
pub fn l2_norm(f: &FunctionSample, grid: &GridSpec) -> Result<f64> {
    l2_inner(f, f, grid).map(f64::sqrt)
}

/// Pointwise weighted average `sum w_i f_i / sum w_i`.
///
/// The result lies in the pointwise convex hull of the inputs. Callers decide
/// the fallback when every weight is zero.
pub fn weighted_mean(points: &[FunctionSample], weights: &[f64]) -> Result<FunctionSample> {
    if points.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: points.len(),
            right: weights.len(),
        });
    }
    if points.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let p = points[0].values.len();
    for q in &points[1..] {
        if q.values.len() != p {
            return Err(Error::GridMismatch {
                expected: p,
                got: q.values.len(),
            });
        }
    }
    for (i, &w) in weights.iter().enumerate() {
        if w < 0.0 || !w.is_finite() {
            return Err(Error::NegativeWeight { index: i });
        }
    }
    let mut num = vec![0.0; p];
    let mut den = 0.0;
    for (f, &w) in points.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        den += w;
        for (acc, &v) in num.iter_mut().zip(&f.values) {
            *acc += w * v;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroMass);
    }
    for v in &mut num {
        *v /= den;
    }
    Ok(FunctionSample::new(String::new(), num))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(values: Vec<f64>) -> FunctionSample {
        FunctionSample::new("s", values)
    }

    fn linear_grid_values(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid.points().iter().map(|&t| f(t)).collect()
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(GridSpec::new(1.0, 1.0, 10).is_err());
        assert!(GridSpec::new(2.0, 1.0, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1).is_err());
        assert!(GridSpec::new(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn grid_points_hit_both_ends() {
        let g = GridSpec::new(20.0, 300.0, 141).unwrap();
        assert_eq!(g.point(0), 20.0);
        assert_eq!(g.point(140), 300.0);
        assert!((g.step() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inner_of_constants_is_exact() {
        // Trapezoid is exact for a constant.
        let grid = GridSpec::unit(101).unwrap();
        let one = sample(vec![1.0; 101]);
        assert_eq!(l2_inner(&one, &one, &grid).unwrap(), 1.0);
    }

    #[test]
    fn inner_with_zero_is_zero() {
        let grid = GridSpec::unit(33).unwrap();
        let zero = sample(vec![0.0; 33]);
        let g = sample(linear_grid_values(&grid, |t| t.sin() + 2.0));
        assert_eq!(l2_inner(&zero, &g, &grid).unwrap(), 0.0);
    }

    #[test]
    fn inner_of_identity_matches_closed_form() {
        // integral of t^2 over [0,1] = 1/3
        let grid = GridSpec::unit(1001).unwrap();
        let t = sample(linear_grid_values(&grid, |t| t));
        let got = l2_inner(&t, &t, &grid).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-5, "got {got}");
    }

    #[test]
    fn dist_of_identity_to_zero_matches_closed_form() {
        let grid = GridSpec::unit(1001).unwrap();
        let t = sample(linear_grid_values(&grid, |t| t));
        let zero = sample(vec![0.0; 1001]);
        let got = l2_dist(&t, &zero, &grid).unwrap();
        assert!((got - 1.0 / 3f64.sqrt()).abs() < 1e-5, "got {got}");
    }

    #[test]
    fn dist_to_self_is_zero() {
        let grid = GridSpec::unit(50).unwrap();
        let f = sample(linear_grid_values(&grid, |t| (3.0 * t).cos()));
        assert_eq!(l2_dist(&f, &f, &grid).unwrap(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let grid = GridSpec::unit(10).unwrap();
        let f = sample(vec![0.0; 10]);
        let g = sample(vec![0.0; 9]);
        assert!(matches!(
            l2_dist(&f, &g, &grid),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn weighted_mean_identity_and_midpoint() {
        let a = sample(vec![0.0, 0.0]);
        let b = sample(vec![4.0, 4.0]);
        let only = weighted_mean(std::slice::from_ref(&a), &[1.0]).unwrap();
        assert_eq!(only.values, a.values);
        let mid = weighted_mean(&[a.clone(), b.clone()], &[1.0, 1.0]).unwrap();
        assert_eq!(mid.values, vec![2.0, 2.0]);
        // weights (1, 3) on constants 0 and 4 -> constant 3
        let m = weighted_mean(&[a, b], &[1.0, 3.0]).unwrap();
        assert_eq!(m.values, vec![3.0, 3.0]);
    }

    #[test]
    fn weighted_mean_zero_mass_errors() {
        let a = sample(vec![1.0]);
        assert!(matches!(
            weighted_mean(std::slice::from_ref(&a), &[0.0]),
            Err(Error::ZeroMass)
        ));
        assert!(matches!(
            weighted_mean(std::slice::from_ref(&a), &[-1.0]),
            Err(Error::NegativeWeight { index: 0 })
        ));
    }

    #[test]
    fn function_set_rejects_nan_members() {
        let grid = GridSpec::unit(3).unwrap();
        let bad = FunctionSample::new("bad", vec![0.0, f64::NAN, 0.0]);
        assert!(matches!(
            FunctionSet::new(grid, vec![bad]),
            Err(Error::NonFiniteValue { .. })
        ));
    }

    proptest! {
        #[test]
        fn dist_is_symmetric(vals in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..64)) {
            let p = vals.len();
            let grid = GridSpec::unit(p.max(2)).unwrap();
            let f = sample(vals.iter().map(|v| v.0).collect());
            let g = sample(vals.iter().map(|v| v.1).collect());
            let d1 = l2_dist(&f, &g, &grid).unwrap();
            let d2 = l2_dist(&g, &f, &grid).unwrap();
            prop_assert_eq!(d1, d2);
        }

        #[test]
        fn dist_squared_matches_inner_of_difference(
            vals in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..64)
        ) {
            let p = vals.len();
            let grid = GridSpec::unit(p.max(2)).unwrap();
            let f = sample(vals.iter().map(|v| v.0).collect());
            let g = sample(vals.iter().map(|v| v.1).collect());
            let diff = sample(
                f.values.iter().zip(&g.values).map(|(a, b)| a - b).collect(),
            );
            let d = l2_dist(&f, &g, &grid).unwrap();
            let q = l2_inner(&diff, &diff, &grid).unwrap();
            prop_assert!((d * d - q).abs() <= 1e-12 * q.max(1.0));
        }

        #[test]
        fn dist_scales_homogeneously(
            vals in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..32),
            c in -20.0..20.0f64,
        ) {
            let p = vals.len();
            let grid = GridSpec::unit(p.max(2)).unwrap();
            let f = sample(vals.iter().map(|v| v.0).collect());
            let g = sample(vals.iter().map(|v| v.1).collect());
            let cf = sample(f.values.iter().map(|v| c * v).collect());
            let cg = sample(g.values.iter().map(|v| c * v).collect());
            let lhs = l2_dist(&cf, &cg, &grid).unwrap();
            let rhs = c.abs() * l2_dist(&f, &g, &grid).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn weighted_mean_invariant_under_weight_rescaling(
            rows in proptest::collection::vec(
                (proptest::collection::vec(-5.0..5.0f64, 4), 0.001..10.0f64), 1..8),
            c in 0.01..100.0f64,
        ) {
            let points: Vec<FunctionSample> =
                rows.iter().map(|(v, _)| sample(v.clone())).collect();
            let weights: Vec<f64> = rows.iter().map(|(_, w)| *w).collect();
            let scaled: Vec<f64> = weights.iter().map(|w| c * w).collect();
            let a = weighted_mean(&points, &weights).unwrap();
            let b = weighted_mean(&points, &scaled).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn weighted_mean_stays_in_pointwise_hull(
            rows in proptest::collection::vec(
                (proptest::collection::vec(-5.0..5.0f64, 3), 0.0..10.0f64), 1..8),
        ) {
            let points: Vec<FunctionSample> =
                rows.iter().map(|(v, _)| sample(v.clone())).collect();
            let mut weights: Vec<f64> = rows.iter().map(|(_, w)| *w).collect();
            weights[0] += 1e-3; // keep total mass positive
            let m = weighted_mean(&points, &weights).unwrap();
            for k in 0..3 {
                let lo = points.iter().map(|q| q.values[k]).fold(f64::INFINITY, f64::min);
                let hi = points.iter().map(|q| q.values[k]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(m.values[k] >= lo - 1e-12 && m.values[k] <= hi + 1e-12);
            }
        }
    }
}
