//! Natural cubic spline interpolation on strictly increasing knots.

use crate::error::{Error, Result};

/// Natural cubic spline: second derivative zero at both end knots.
/// Evaluation outside the knot span returns `None`; extrapolation is never
/// performed.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        let n = xs.len();
        if n < 2 {
            return Err(Error::TooFewKnots { needed: 2, got: n });
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidConfig(
                    "knot abscissas must be strictly increasing".into(),
                ));
            }
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior tridiagonal system
            let rows = n - 2;
            let h = |i: usize| xs[i + 1] - xs[i];
            let mut diag = vec![0.0; rows];
            let mut upper = vec![0.0; rows];
            let mut rhs = vec![0.0; rows];
            for i in 0..rows {
                let k = i + 1; // knot index
                diag[i] = (h(k - 1) + h(k)) / 3.0;
                upper[i] = h(k) / 6.0;
                rhs[i] = (ys[k + 1] - ys[k]) / h(k) - (ys[k] - ys[k - 1]) / h(k - 1);
            }
            // forward sweep (lower diagonal equals the previous row's upper)
            for i in 1..rows {
                let lower = upper[i - 1];
                let factor = lower / diag[i - 1];
                diag[i] -= factor * upper[i - 1];
                rhs[i] -= factor * rhs[i - 1];
            }
            m[rows] = rhs[rows - 1] / diag[rows - 1];
            for i in (0..rows - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    pub fn min_x(&self) -> f64 {
        self.xs[0]
    }

    pub fn max_x(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Spline value at `x`, or `None` outside the knot span.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if x < self.min_x() || x > self.max_x() {
            return None;
        }
        // locate the interval [xs[i], xs[i+1]] containing x
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(self.xs.len() - 2),
            Err(k) => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = self.xs[i + 1] - x;
        let b = x - self.xs[i];
        let value = self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.ys[i] / h - self.m[i] * h / 6.0) * a
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0) * b;
        Some(value)
    }
}
