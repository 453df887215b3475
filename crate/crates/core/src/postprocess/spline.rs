//! Not-a-knot cubic splines on a fixed abscissa and their tensor product.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{precondition, Result};
use crate::linalg::Matrix;

/// Linear map from ordinates to spline second derivatives on fixed knots.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    x: Vec<f64>,
    to_curvature: Matrix,
}

impl SplineBasis {
    pub fn new(x: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(precondition("a spline needs at least two knots"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(precondition("spline knots must be strictly increasing"));
        }
        // Rows of A M = B y.
        let mut a = Matrix::zeros(n, n);
        let mut b = Matrix::zeros(n, n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        if n == 2 {
            a[(0, 0)] = 1.0;
            a[(1, 1)] = 1.0;
        } else {
            for i in 1..n - 1 {
                a[(i, i - 1)] = h[i - 1];
                a[(i, i)] = 2.0 * (h[i - 1] + h[i]);
                a[(i, i + 1)] = h[i];
                b[(i, i + 1)] = 6.0 / h[i];
                b[(i, i)] = -6.0 / h[i] - 6.0 / h[i - 1];
                b[(i, i - 1)] = 6.0 / h[i - 1];
            }
            if n == 3 {
                // Single parabola: constant curvature.
                a[(0, 0)] = 1.0;
                a[(0, 1)] = -1.0;
                a[(2, 1)] = -1.0;
                a[(2, 2)] = 1.0;
            } else {
                a[(0, 0)] = h[1];
                a[(0, 1)] = -(h[0] + h[1]);
                a[(0, 2)] = h[0];
                let m = n - 1;
                a[(m, m - 2)] = h[m - 1];
                a[(m, m - 1)] = -(h[m - 2] + h[m - 1]);
                a[(m, m)] = h[m - 2];
            }
        }
        let ainv = a.inverse()?;
        let mut to_curvature = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += ainv[(i, k)] * b[(k, j)];
                }
                to_curvature[(i, j)] = s;
            }
        }
        Ok(Self {
            x: x.to_vec(),
            to_curvature,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn curvatures(&self, y: &[f64]) -> Vec<f64> {
        self.to_curvature.mul_vec(y)
    }

    fn interval(&self, xq: f64) -> usize {
        let n = self.x.len();
        match self.x.iter().position(|&k| k > xq) {
            Some(0) => 0,
            Some(i) => (i - 1).min(n - 2),
            None => n - 2,
        }
    }

    /// Spline value at `xq` given ordinates and their curvatures; the end
    /// polynomials extrapolate.
    pub fn eval(&self, y: &[f64], m: &[f64], xq: f64) -> f64 {
        let i = self.interval(xq);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = (x1 - xq) / h;
        let b = (xq - x0) / h;
        a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
    }
}

/// Interpolating 1D spline.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    basis: SplineBasis,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn not_a_knot(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(precondition("spline abscissa and ordinate lengths differ"));
        }
        let basis = SplineBasis::new(x)?;
        let m = basis.curvatures(y);
        Ok(Self {
            basis,
            y: y.to_vec(),
            m,
        })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        self.basis.eval(&self.y, &self.m, xq)
    }
}

/// Tensor-product not-a-knot spline over a rectilinear grid, values stored
/// with the second axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BicubicSpline {
    bx: SplineBasis,
    by: SplineBasis,
    values: Vec<f64>,
    /// Curvatures along the second axis for every first-axis knot.
    col_m: Vec<f64>,
}

impl BicubicSpline {
    pub fn new(x: &[f64], y: &[f64], values: &[f64]) -> Result<Self> {
        if values.len() != x.len() * y.len() {
            return Err(precondition("grid values do not match the axes"));
        }
        let bx = SplineBasis::new(x)?;
        let by = SplineBasis::new(y)?;
        let ny = y.len();
        let mut col_m = vec![0.0; values.len()];
        for i in 0..x.len() {
            let m = by.curvatures(&values[i * ny..(i + 1) * ny]);
            col_m[i * ny..(i + 1) * ny].copy_from_slice(&m);
        }
        Ok(Self {
            bx,
            by,
            values: values.to_vec(),
            col_m,
        })
    }

    pub fn eval(&self, xq: f64, yq: f64) -> f64 {
        let ny = self.by.knots().len();
        let row: Vec<f64> = (0..self.bx.knots().len())
            .map(|i| {
                let s = i * ny..(i + 1) * ny;
                self.by.eval(&self.values[s.clone()], &self.col_m[s], yq)
            })
            .collect();
        let m = self.bx.curvatures(&row);
        self.bx.eval(&row, &m, xq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let x = [0.0, 0.3, 1.0, 1.2, 2.0, 2.5];
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.3 * t * t * t;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::not_a_knot(&x, &y).unwrap();
        for i in 0..50 {
            let t = -0.2 + 0.06 * i as f64;
            assert!((s.eval(t) - f(t)).abs() < 1e-11, "{t}");
        }
    }

    #[test]
    fn small_knot_counts() {
        let s = CubicSpline::not_a_knot(&[0.0, 1.0], &[1.0, 3.0]).unwrap();
        assert!((s.eval(0.25) - 1.5).abs() < 1e-15);
        let s = CubicSpline::not_a_knot(&[0.0, 1.0, 3.0], &[0.0, 1.0, 9.0]).unwrap();
        assert!((s.eval(2.0) - 4.0).abs() < 1e-12);
        assert!(CubicSpline::not_a_knot(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn bicubic_reproduces_bicubic_polynomials() {
        let x = [0.0, 0.5, 1.1, 1.5, 2.0];
        let y = [-1.0, 0.0, 0.4, 1.0, 1.7, 2.0];
        let f = |a: f64, b: f64| a * a * a * b - 2.0 * a * b * b + b * b * b + 3.0;
        let mut v = Vec::new();
        for &a in &x {
            for &b in &y {
                v.push(f(a, b));
            }
        }
        let s = BicubicSpline::new(&x, &y, &v).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let (a, b) = (0.2 * i as f64, -1.0 + 0.3 * j as f64);
                assert!((s.eval(a, b) - f(a, b)).abs() < 1e-10);
            }
        }
    }
}
