use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{precondition, Result};
use crate::fourier::{basis_at_phase, HarmonicVector};
use crate::linalg::Matrix;
use crate::plant::DuffingParams;

/// Harmonic balance discretisation of a forced Duffing-family oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct HbmProblem {
    pub plant: DuffingParams,
    pub h: usize,
    pub forcing_amp: f64,
    /// Forcing per unit amplitude, `sin(ωt)` unless changed.
    pub forcing_shape: HarmonicVector,
}

impl HbmProblem {
    pub fn new(plant: DuffingParams, h: usize, forcing_amp: f64) -> Result<Self> {
        if h == 0 {
            return Err(precondition("harmonic count must be at least 1"));
        }
        plant.validate()?;
        Ok(Self {
            plant,
            h,
            forcing_amp,
            forcing_shape: HarmonicVector::fundamental(h, 1.0, 0.0),
        })
    }

    /// Forcing `f sin(jωt)` instead of the fundamental.
    pub fn with_forcing_harmonic(mut self, j: usize) -> Result<Self> {
        if j == 0 || j > self.h {
            return Err(precondition("forcing harmonic out of range"));
        }
        let mut shape = HarmonicVector::zeros(self.h);
        shape.set_sin(j, 1.0);
        self.forcing_shape = shape;
        Ok(self)
    }

    pub fn with_forcing_shape(mut self, shape: HarmonicVector) -> Result<Self> {
        if shape.h() != self.h {
            return Err(precondition("forcing shape must have h harmonics"));
        }
        self.forcing_shape = shape;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        2 * self.h + 1
    }

    /// Time samples per period used by the alternating frequency/time scheme.
    pub fn n_time(&self) -> usize {
        4 * self.h + 4
    }

    /// Force unit `k √(k/k3)` in which residual tolerances are expressed.
    pub fn force_unit(&self) -> f64 {
        self.plant.k * self.plant.displacement_unit()
    }

    pub fn aft(&self) -> Aft {
        Aft::new(self.h, self.n_time())
    }
}

/// Synthesis and projection matrices between coefficients and time samples.
#[derive(Debug, Clone)]
pub struct Aft {
    h: usize,
    n: usize,
    /// `n x (2h+1)`, row `i` is the basis at phase `2π i / n`.
    synth: Vec<f64>,
}

impl Aft {
    pub fn new(h: usize, n: usize) -> Self {
        let dim = 2 * h + 1;
        let mut synth = vec![0.0; n * dim];
        for i in 0..n {
            let phase = 2.0 * PI * i as f64 / n as f64;
            basis_at_phase(h, phase, &mut synth[i * dim..(i + 1) * dim]);
        }
        Self { h, n, synth }
    }

    fn row(&self, i: usize) -> &[f64] {
        let dim = 2 * self.h + 1;
        &self.synth[i * dim..(i + 1) * dim]
    }

    pub fn to_time(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(b, c)| b * c).sum())
            .collect()
    }

    /// Projection weight of coefficient `j`.
    fn weight(&self, j: usize) -> f64 {
        if j == 0 {
            1.0 / self.n as f64
        } else {
            2.0 / self.n as f64
        }
    }

    pub fn to_freq(&self, samples: &[f64]) -> Vec<f64> {
        let dim = 2 * self.h + 1;
        let mut out = vec![0.0; dim];
        for (i, s) in samples.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.row(i)) {
                *o += s * b;
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o *= self.weight(j);
        }
        out
    }
}

/// Residual of the harmonic balance equations with its partial derivatives.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub residual: Vec<f64>,
    pub d_coeffs: Matrix,
    pub d_omega: Vec<f64>,
    pub d_forcing: Vec<f64>,
}

fn nonlinear_force(p: &DuffingParams, q: f64) -> f64 {
    q * q * (p.k2 + p.k3 * q)
}

fn nonlinear_stiffness(p: &DuffingParams, q: f64) -> f64 {
    q * (2.0 * p.k2 + 3.0 * p.k3 * q)
}

/// Adds the linear dynamic stiffness `L(ω) x` to `out`.
fn add_linear(p: &DuffingParams, h: usize, omega: f64, x: &[f64], out: &mut [f64]) {
    out[0] += p.k * x[0];
    for k in 1..=h {
        let kw = k as f64 * omega;
        let diag = p.k - p.m * kw * kw;
        let (s, c) = (x[k], x[h + k]);
        out[k] += diag * s - p.c * kw * c;
        out[h + k] += diag * c + p.c * kw * s;
    }
}

/// Galerkin residual `L(ω)x + P g(Ex) − f·shape`.
pub fn hbm_residual(coeffs: &HarmonicVector, omega: f64, problem: &HbmProblem) -> Result<HarmonicVector> {
    let aft = problem.aft();
    let r = residual_with(&aft, coeffs.as_slice(), omega, problem.forcing_amp, problem)?;
    HarmonicVector::from_coeffs(problem.h, r)
}

pub(crate) fn residual_with(
    aft: &Aft,
    x: &[f64],
    omega: f64,
    forcing: f64,
    problem: &HbmProblem,
) -> Result<Vec<f64>> {
    if x.len() != problem.dim() {
        return Err(precondition("coefficient vector length must be 2h+1"));
    }
    let p = &problem.plant;
    let q = aft.to_time(x);
    let g: Vec<f64> = q.iter().map(|&qi| nonlinear_force(p, qi)).collect();
    let mut r = aft.to_freq(&g);
    add_linear(p, problem.h, omega, x, &mut r);
    for (ri, si) in r.iter_mut().zip(problem.forcing_shape.as_slice()) {
        *ri -= forcing * si;
    }
    Ok(r)
}

/// Residual and analytic Jacobians by the AFT chain rule.
pub fn linearize(
    aft: &Aft,
    x: &[f64],
    omega: f64,
    forcing: f64,
    problem: &HbmProblem,
) -> Result<Linearization> {
    let residual = residual_with(aft, x, omega, forcing, problem)?;
    let p = &problem.plant;
    let h = problem.h;
    let dim = problem.dim();
    let q = aft.to_time(x);
    let mut jac = Matrix::zeros(dim, dim);
    // P diag(g'(Ex)) E
    for (i, &qi) in q.iter().enumerate() {
        let gp = nonlinear_stiffness(p, qi);
        if gp == 0.0 {
            continue;
        }
        let b = aft.row(i);
        for r in 0..dim {
            let wr = aft.weight(r) * gp * b[r];
            if wr == 0.0 {
                continue;
            }
            let row = jac.row_mut(r);
            for (jc, bc) in row.iter_mut().zip(b) {
                *jc += wr * bc;
            }
        }
    }
    jac[(0, 0)] += p.k;
    let mut d_omega = vec![0.0; dim];
    for k in 1..=h {
        let kf = k as f64;
        let kw = kf * omega;
        let diag = p.k - p.m * kw * kw;
        jac[(k, k)] += diag;
        jac[(k, h + k)] -= p.c * kw;
        jac[(h + k, h + k)] += diag;
        jac[(h + k, k)] += p.c * kw;
        let (s, c) = (x[k], x[h + k]);
        d_omega[k] = -2.0 * p.m * kf * kf * omega * s - p.c * kf * c;
        d_omega[h + k] = -2.0 * p.m * kf * kf * omega * c + p.c * kf * s;
    }
    let d_forcing = problem.forcing_shape.as_slice().iter().map(|s| -s).collect();
    Ok(Linearization {
        residual,
        d_coeffs: jac,
        d_omega,
        d_forcing,
    })
}
