//! Harmonic force surfaces, constant-force slicing and branch comparison.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{precondition, Result};

pub mod compare;
pub mod slice;
pub mod spline;

pub use compare::{branch_compare, matched_frequency_deviation, CompareReport};
pub use slice::{slice_constant_force, SlicePoint, SliceResult};
pub use spline::{BicubicSpline, CubicSpline, SplineBasis};

/// Realised force and response amplitudes over a (frequency, target
/// amplitude) grid. Entries are stored frequency-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub omega_axis: Vec<f64>,
    pub a_star_axis: Vec<f64>,
    pub force: Vec<f64>,
    pub response: Vec<f64>,
    /// `true` marks a cell whose measurement did not converge.
    pub flags: Vec<bool>,
}

impl SurfaceGrid {
    pub fn new(omega_axis: Vec<f64>, a_star_axis: Vec<f64>) -> Result<Self> {
        let inc = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
        if !inc(&omega_axis) || !inc(&a_star_axis) {
            return Err(precondition("grid axes must be non-empty and strictly increasing"));
        }
        let n = omega_axis.len() * a_star_axis.len();
        Ok(Self {
            omega_axis,
            a_star_axis,
            force: vec![f64::NAN; n],
            response: vec![f64::NAN; n],
            flags: vec![true; n],
        })
    }

    pub fn index(&self, i_omega: usize, i_a: usize) -> usize {
        i_omega * self.a_star_axis.len() + i_a
    }

    pub fn set(&mut self, i_omega: usize, i_a: usize, force: f64, response: f64, flagged: bool) {
        let k = self.index(i_omega, i_a);
        self.force[k] = force;
        self.response[k] = response;
        self.flags[k] = flagged;
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    /// Copy of `values` with flagged cells replaced by spline interpolation
    /// of the unflagged cells, first along the target amplitude and then
    /// along the frequency. Cells that cannot be filled stay NaN.
    pub fn filled(&self, values: &[f64]) -> Vec<f64> {
        let (nw, na) = (self.omega_axis.len(), self.a_star_axis.len());
        let mut out: Vec<f64> = values
            .iter()
            .zip(&self.flags)
            .map(|(v, f)| if *f { f64::NAN } else { *v })
            .collect();
        let mut known: Vec<bool> = self.flags.iter().map(|f| !f).collect();
        for i in 0..nw {
            let idx: Vec<usize> = (0..na).map(|j| self.index(i, j)).collect();
            fill_line(&self.a_star_axis, &idx, &mut out, &known);
        }
        for k in 0..out.len() {
            known[k] = out[k].is_finite();
        }
        for j in 0..na {
            let idx: Vec<usize> = (0..nw).map(|i| self.index(i, j)).collect();
            fill_line(&self.omega_axis, &idx, &mut out, &known);
        }
        out
    }
}

fn fill_line(axis: &[f64], idx: &[usize], out: &mut [f64], known: &[bool]) {
    let xs: Vec<f64> = idx.iter().zip(axis).filter(|(k, _)| known[**k]).map(|(_, x)| *x).collect();
    let ys: Vec<f64> = idx.iter().filter(|k| known[**k]).map(|k| out[*k]).collect();
    if xs.len() < 2 || xs.len() == idx.len() {
        return;
    }
    if let Ok(s) = CubicSpline::not_a_knot(&xs, &ys) {
        for (k, x) in idx.iter().zip(axis) {
            if !known[*k] {
                out[*k] = s.eval(*x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_must_increase() {
        assert!(SurfaceGrid::new(vec![1.0, 1.0], vec![0.1]).is_err());
        assert!(SurfaceGrid::new(vec![], vec![0.1]).is_err());
        let g = SurfaceGrid::new(vec![1.0, 2.0], vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(g.index(1, 2), 5);
        assert_eq!(g.flagged_count(), 6);
    }

    #[test]
    fn filling_ignores_flagged_values() {
        let mut g = SurfaceGrid::new(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let (w, a) = (g.omega_axis[i], g.a_star_axis[j]);
                g.set(i, j, w + 2.0 * a, a, false);
            }
        }
        g.set(1, 2, 1e9, 0.0, true);
        let f = g.filled(&g.force);
        assert!((f[g.index(1, 2)] - 6.0).abs() < 1e-12);
    }
}
