//! Periodic cubic splines and the cyclic tridiagonal solver behind them.

use crate::error::{Error, Result};
use crate::scalar::{lit, wrap, Scalar};

/// Solves the cyclic tridiagonal system
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` with indices mod n,
/// by Sherman-Morrison on top of the Thomas algorithm.
pub fn solve_cyclic_tridiagonal<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
) -> Result<Vec<T>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::InvalidParameter("cyclic tridiagonal: length mismatch".into()));
    }
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![rhs[0] / (diag[0] + lower[0] + upper[0])]),
        2 => {
            // both off-diagonal couplings hit the same neighbour
            let (a, b) = (diag[0], lower[0] + upper[0]);
            let (c, d) = (lower[1] + upper[1], diag[1]);
            let det = a * d - b * c;
            return Ok(vec![(rhs[0] * d - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det]);
        }
        _ => {}
    }
    let gamma = -diag[0];
    let alpha = upper[n - 1]; // corner (n-1, 0)
    let beta = lower[0]; // corner (0, n-1)

    let mut b = diag.to_vec();
    b[0] = diag[0] - gamma;
    b[n - 1] = diag[n - 1] - alpha * beta / gamma;

    let x = thomas(lower, &b, upper, rhs);
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(lower, &b, upper, &u);

    let fact = (x[0] + beta * x[n - 1] / gamma) / (T::one() + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect())
}

fn thomas<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] = x[i] - c[i] * next;
    }
    x
}

/// Interpolating cubic spline on a periodic domain `[x_0, x_0 + period)`.
///
/// Second derivatives are continuous everywhere, including across the seam.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline<T> {
    knots: Vec<T>,
    values: Vec<T>,
    second: Vec<T>,
    period: T,
}

impl<T: Scalar> PeriodicSpline<T> {
    pub fn new(knots: Vec<T>, values: Vec<T>, period: T) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::InvalidParameter(
                "periodic spline needs at least 3 knots with matching values".into(),
            ));
        }
        if !(period > T::zero()) {
            return Err(Error::InvalidParameter("spline period must be positive".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || !(knots[n - 1] - knots[0] < period) {
            return Err(Error::InvalidParameter(
                "spline knots must be strictly increasing within one period".into(),
            ));
        }
        let h: Vec<T> = (0..n)
            .map(|i| if i + 1 < n { knots[i + 1] - knots[i] } else { knots[0] + period - knots[n - 1] })
            .collect();
        let six = lit::<T>(6.0);
        let two = lit::<T>(2.0);
        let mut lower = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let mut rhs = vec![T::zero(); n];
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            lower[i] = h[im];
            diag[i] = two * (h[im] + h[i]);
            upper[i] = h[i];
            rhs[i] = six * ((values[ip] - values[i]) / h[i] - (values[i] - values[im]) / h[im]);
        }
        let second = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs)?;
        Ok(Self { knots, values, second, period })
    }

    /// Spline through equispaced samples `values[i]` at `x_0 + i * period / n`.
    pub fn uniform(x0: T, period: T, values: Vec<T>) -> Result<Self> {
        let n = values.len();
        let h = period / T::from_usize_lossy(n.max(1));
        let knots = (0..n).map(|i| x0 + h * T::from_usize_lossy(i)).collect();
        Self::new(knots, values, period)
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Value (`order = 0`) or derivative (`order` 1 or 2) at `x`.
    pub fn eval(&self, x: T, order: u8) -> T {
        let (v, d1, d2) = self.eval_all(x);
        match order {
            0 => v,
            1 => d1,
            _ => d2,
        }
    }

    /// Value, first and second derivative at `x`.
    pub fn eval_all(&self, x: T) -> (T, T, T) {
        let n = self.knots.len();
        let x0 = self.knots[0];
        let s = x0 + wrap(x - x0, self.period);
        // last knot not exceeding s
        let i = match self.knots.binary_search_by(|k| k.partial_cmp(&s).expect("finite knots")) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let ip = (i + 1) % n;
        let xr = if ip == 0 { x0 + self.period } else { self.knots[ip] };
        let h = xr - self.knots[i];
        let a = (xr - s) / h;
        let b = (s - self.knots[i]) / h;
        let (yl, yr) = (self.values[i], self.values[ip]);
        let (ml, mr) = (self.second[i], self.second[ip]);
        let six = lit::<T>(6.0);
        let three = lit::<T>(3.0);
        let v = a * yl + b * yr + ((a * a * a - a) * ml + (b * b * b - b) * mr) * h * h / six;
        let d1 = (yr - yl) / h - (three * a * a - T::one()) / six * h * ml
            + (three * b * b - T::one()) / six * h * mr;
        let d2 = a * ml + b * mr;
        (v, d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cyclic_solver_matches_dense_product() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + 0.2 * i as f64).collect();
        let want: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                lower[i] * want[(i + n - 1) % n] + diag[i] * want[i] + upper[i] * want[(i + 1) % n]
            })
            .collect();
        let got = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn spline_reproduces_smooth_periodic_function() {
        let n = 256;
        let period = 2.0 * PI;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * period / n as f64).sin()).collect();
        let sp = PeriodicSpline::uniform(0.0, period, vals).unwrap();
        for j in 0..50 {
            let x = -3.0 + 0.37 * j as f64;
            let (v, d1, d2) = sp.eval_all(x);
            assert!((v - x.sin()).abs() < 1e-7);
            assert!((d1 - x.cos()).abs() < 1e-5);
            assert!((d2 + x.sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn spline_rejects_unsorted_knots() {
        let r = PeriodicSpline::new(vec![0.0, 0.5, 0.2], vec![1.0, 2.0, 3.0], 1.0);
        assert!(r.is_err());
    }
}
