//! Small dense linear algebra: LU with partial pivoting and 2x2 eigenvalues.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Solves `self * x = b` by LU factorisation with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Lu::new(self.clone())?.solve(b)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let lu = Lu::new(self.clone())?;
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = alloc::vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = lu.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorisation `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(mut a: Matrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(crate::error::precondition("LU of a non-square matrix"));
        }
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(pmax > scale * 1e-14) {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        let akj = a[(k, j)];
                        a[(i, j)] -= factor * akj;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(crate::error::precondition("right-hand side length mismatch"));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }
}

/// Eigenvalues of a real 2x2 matrix `[[a, b], [c, d]]`.
pub fn eig2(m: [[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // Avoid cancellation in the smaller root.
        let big = if half >= 0.0 { half + r } else { half - r };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (l1, l2) = if big.abs() >= small.abs() {
            (big, small)
        } else {
            (small, big)
        };
        [Complex64::new(l1, 0.0), Complex64::new(l2, 0.0)]
    } else {
        let im = (-disc).sqrt();
        [Complex64::new(half, im), Complex64::new(half, -im)]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}
