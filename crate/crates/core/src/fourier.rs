//! Truncated Fourier series in the basis `[1, sin(kφ).., cos(kφ)..]`, the
//! Widrow-Hoff LMS harmonic estimator and offline demodulation.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{precondition, Result};

/// Coefficients `[w0, s1..sh, c1..ch]` of a truncated Fourier series.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicVector {
    h: usize,
    coeffs: Vec<f64>,
}

impl HarmonicVector {
    pub fn zeros(h: usize) -> Self {
        Self {
            h,
            coeffs: vec![0.0; 2 * h + 1],
        }
    }

    pub fn from_coeffs(h: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != 2 * h + 1 {
            return Err(precondition("harmonic vector length must be 2h+1"));
        }
        Ok(Self { h, coeffs })
    }

    /// Pure fundamental `s sin φ + c cos φ`.
    pub fn fundamental(h: usize, s: f64, c: f64) -> Self {
        let mut w = Self::zeros(h.max(1));
        w.coeffs[1] = s;
        w.coeffs[w.h + 1] = c;
        w
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn constant(&self) -> f64 {
        self.coeffs[0]
    }

    /// Sine coefficient of harmonic `k` (1-based).
    pub fn sin(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    pub fn cos(&self, k: usize) -> f64 {
        self.coeffs[self.h + k]
    }

    pub fn set_sin(&mut self, k: usize, v: f64) {
        self.coeffs[k] = v;
    }

    pub fn set_cos(&mut self, k: usize, v: f64) {
        let h = self.h;
        self.coeffs[h + k] = v;
    }

    /// Copy truncated or zero-padded to `h` harmonics.
    pub fn resized(&self, h: usize) -> Self {
        let mut out = Self::zeros(h);
        out.coeffs[0] = self.coeffs[0];
        for k in 1..=h.min(self.h) {
            out.coeffs[k] = self.sin(k);
            out.coeffs[h + k] = self.cos(k);
        }
        out
    }

    /// Series value at phase `φ = ωt`.
    pub fn eval(&self, phase: f64) -> f64 {
        let mut x = self.coeffs[0];
        for k in 1..=self.h {
            let (s, c) = (k as f64 * phase).sin_cos();
            x += self.coeffs[k] * s + self.coeffs[self.h + k] * c;
        }
        x
    }

    /// Derivative with respect to phase; multiply by `ω` for the time rate.
    pub fn eval_dphase(&self, phase: f64) -> f64 {
        let mut x = 0.0;
        for k in 1..=self.h {
            let kf = k as f64;
            let (s, c) = (kf * phase).sin_cos();
            x += kf * (self.coeffs[k] * c - self.coeffs[self.h + k] * s);
        }
        x
    }

    /// Root mean square of the synthesized signal.
    pub fn rms(&self) -> f64 {
        let osc: f64 = self.coeffs[1..].iter().map(|v| v * v).sum();
        (self.coeffs[0] * self.coeffs[0] + 0.5 * osc).sqrt()
    }

    /// Copy with the constant and fundamental entries zeroed.
    pub fn non_fundamental(&self) -> Self {
        let mut out = self.clone();
        if self.h >= 1 {
            out.coeffs[1] = 0.0;
            out.coeffs[self.h + 1] = 0.0;
        }
        out
    }

    pub fn amp_phase(&self, k: usize) -> Result<(f64, f64)> {
        amp_phase(self, k)
    }
}

/// Fills `out` with the basis at phase `φ`.
pub fn basis_at_phase(h: usize, phase: f64, out: &mut [f64]) {
    out[0] = 1.0;
    for k in 1..=h {
        let (s, c) = (k as f64 * phase).sin_cos();
        out[k] = s;
        out[h + k] = c;
    }
}

pub fn basis_eval(h: usize, omega: f64, t: f64) -> HarmonicVector {
    let mut w = HarmonicVector::zeros(h);
    basis_at_phase(h, omega * t, &mut w.coeffs);
    w
}

/// Amplitude and phase of harmonic `k`, with `sin(kωt)` at phase 0.
pub fn amp_phase(wv: &HarmonicVector, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k > wv.h {
        return Err(precondition("harmonic index out of range"));
    }
    let (s, c) = (wv.sin(k), wv.cos(k));
    Ok(((s * s + c * c).sqrt(), wrap_pi(c.atan2(s))))
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Lag of a response relative to the forcing, wrapped into `(−3π/2, π/2]`
/// so that lags past quadrature stay continuous through resonance.
pub fn phase_lag(theta_response: f64, theta_force: f64) -> f64 {
    let d = wrap_pi(theta_response - theta_force);
    if d > 0.5 * PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// LMS gain `ω μ̄`.
pub fn optimal_gain(omega: f64, mu_bar: f64) -> f64 {
    omega * mu_bar
}

/// Gain for an `h`-harmonic filter: the single-tone optimum halved once the
/// filter tracks more than the fundamental.
pub fn default_gain(omega: f64, h: usize, mu_bar: f64) -> f64 {
    if h > 1 {
        0.5 * optimal_gain(omega, mu_bar)
    } else {
        optimal_gain(omega, mu_bar)
    }
}

/// Gain of the constant weight relative to the harmonic ones. With a common
/// gain the integrator mode of the constant term settles an order of
/// magnitude slower than the critically damped fundamental pair.
pub const DC_GAIN_RATIO: f64 = 0.1;

/// Widrow-Hoff adaptive harmonic estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsFilter {
    pub weights: HarmonicVector,
    pub mu: f64,
    pub omega: f64,
    pub t: f64,
    pub dc_ratio: f64,
    basis: Vec<f64>,
}

impl LmsFilter {
    pub fn new(h: usize, mu: f64, omega: f64) -> Self {
        Self {
            weights: HarmonicVector::zeros(h),
            mu,
            omega,
            t: 0.0,
            dc_ratio: DC_GAIN_RATIO,
            basis: vec![0.0; 2 * h + 1],
        }
    }

    pub fn with_weights(mut self, w: HarmonicVector) -> Self {
        self.basis = vec![0.0; w.len()];
        self.weights = w;
        self
    }

    pub fn h(&self) -> usize {
        self.weights.h
    }

    /// One update at the filter's own clock `ωt`, then advances `t` by `dt`.
    pub fn update(&mut self, sample: f64, dt: f64) -> f64 {
        let phase = self.omega * self.t;
        let e = self.update_at_phase(sample, phase, dt);
        self.t += dt;
        e
    }

    /// One update against an externally supplied phase; returns the
    /// prediction error before the update.
    pub fn update_at_phase(&mut self, sample: f64, phase: f64, dt: f64) -> f64 {
        let h = self.weights.h;
        basis_at_phase(h, phase, &mut self.basis);
        let pred: f64 = self
            .basis
            .iter()
            .zip(&self.weights.coeffs)
            .map(|(b, w)| b * w)
            .sum();
        let e = sample - pred;
        let g = self.mu * dt * e;
        self.weights.coeffs[0] += self.dc_ratio * g;
        for (w, b) in self.weights.coeffs[1..].iter_mut().zip(&self.basis[1..]) {
            *w += g * b;
        }
        e
    }
}

/// Least-squares projection of a uniformly sampled record onto the basis,
/// using the last `n_periods` periods. Sample `i` sits at time `t0 + i dt`.
pub fn dft_over_periods(
    samples: &[f64],
    t0: f64,
    dt: f64,
    omega: f64,
    n_periods: usize,
    h: usize,
) -> Result<HarmonicVector> {
    if !(dt > 0.0 && omega > 0.0) || n_periods == 0 {
        return Err(precondition("dt, omega and n_periods must be positive"));
    }
    let exact = n_periods as f64 * 2.0 * PI / (omega * dt);
    let n = exact.round();
    if (exact - n).abs() > 1e-6 * exact || n as usize > samples.len() || (n as usize) <= 2 * h {
        return Err(precondition(
            "record must hold an integer number of periods with more than 2h samples",
        ));
    }
    let n = n as usize;
    let start = samples.len() - n;
    let mut w = HarmonicVector::zeros(h);
    let mut b = vec![0.0; 2 * h + 1];
    for (i, x) in samples[start..].iter().enumerate() {
        basis_at_phase(h, omega * (t0 + (start + i) as f64 * dt), &mut b);
        for (wj, bj) in w.coeffs.iter_mut().zip(&b) {
            *wj += x * bj;
        }
    }
    let nf = n as f64;
    w.coeffs[0] /= nf;
    for v in &mut w.coeffs[1..] {
        *v *= 2.0 / nf;
    }
    Ok(w)
}

/// Running synchronous demodulator over a record with arbitrary phase
/// history. Exact for whole periods of uniform phase increments.
#[derive(Debug, Clone)]
pub struct Demodulator {
    h: usize,
    acc: Vec<f64>,
    n: usize,
    basis: Vec<f64>,
}

impl Demodulator {
    pub fn new(h: usize) -> Self {
        Self {
            h,
            acc: vec![0.0; 2 * h + 1],
            n: 0,
            basis: vec![0.0; 2 * h + 1],
        }
    }

    pub fn push(&mut self, phase: f64, x: f64) {
        basis_at_phase(self.h, phase, &mut self.basis);
        for (a, b) in self.acc.iter_mut().zip(&self.basis) {
            *a += x * b;
        }
        self.n += 1;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(&self) -> HarmonicVector {
        let mut w = HarmonicVector::zeros(self.h);
        if self.n == 0 {
            return w;
        }
        let nf = self.n as f64;
        w.coeffs[0] = self.acc[0] / nf;
        for (wj, a) in w.coeffs[1..].iter_mut().zip(&self.acc[1..]) {
            *wj = 2.0 * a / nf;
        }
        w
    }
}

/// Peak `|x|` over the final period of a record.
pub fn total_amplitude(samples: &[f64], samples_per_period: usize) -> Result<f64> {
    if samples_per_period == 0 || samples.len() < samples_per_period {
        return Err(precondition("record shorter than one period"));
    }
    Ok(samples[samples.len() - samples_per_period..]
        .iter()
        .fold(0.0, |m: f64, x| m.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn basis_examples() {
        let b = basis_eval(1, 1.0, PI / 2.0);
        assert!(close(b.as_slice()[1], 1.0, 1e-15) && close(b.as_slice()[2], 0.0, 1e-15));
        assert_eq!(basis_eval(2, 3.0, 0.0).as_slice(), &[1.0, 0.0, 0.0, 1.0, 1.0]);
        let b = basis_eval(3, 1.0, PI);
        let want = [1.0, 0.0, 0.0, 0.0, -1.0, 1.0, -1.0];
        for (x, y) in b.as_slice().iter().zip(want) {
            assert!(close(*x, y, 1e-14));
        }
    }

    #[test]
    fn amp_phase_examples() {
        let w = HarmonicVector::fundamental(1, 1.0, 0.0);
        assert_eq!(amp_phase(&w, 1).unwrap(), (1.0, 0.0));
        let w = HarmonicVector::fundamental(1, 0.0, 1.0);
        let (a, p) = amp_phase(&w, 1).unwrap();
        assert!(close(a, 1.0, 1e-15) && close(p, PI / 2.0, 1e-15));
        assert!(amp_phase(&w, 2).is_err());
        assert!(amp_phase(&w, 0).is_err());
    }

    #[test]
    fn gains() {
        assert!(close(optimal_gain(131.5, 2.0), 263.0, 1e-12));
        assert_eq!(optimal_gain(1.0, 2.0), 2.0);
        assert_eq!(optimal_gain(5.0, 0.0), 0.0);
        assert_eq!(default_gain(4.0, 3, 2.0), 4.0);
    }

    #[test]
    fn dft_examples() {
        let omega = 2.0;
        let n = 400;
        let dt = 2.0 * PI / omega / n as f64;
        let xs: Vec<f64> = (0..3 * n).map(|i| 3.0 * (omega * i as f64 * dt).sin()).collect();
        let w = dft_over_periods(&xs, 0.0, dt, omega, 3, 2).unwrap();
        assert!(close(w.sin(1), 3.0, 1e-12));
        assert!(w.as_slice().iter().enumerate().all(|(i, v)| i == 1 || v.abs() < 1e-12));
        let xs: Vec<f64> = (0..n)
            .map(|i| 1.0 + 2.0 * (2.0 * omega * i as f64 * dt).cos())
            .collect();
        let w = dft_over_periods(&xs, 0.0, dt, omega, 1, 3).unwrap();
        assert!(close(w.constant(), 1.0, 1e-12) && close(w.cos(2), 2.0, 1e-12));
        assert!(dft_over_periods(&xs[..n - 7], 0.0, dt * 1.001, omega, 1, 3).is_err());
    }

    #[test]
    fn lms_zero_error_keeps_weights() {
        let w = HarmonicVector::from_coeffs(2, vec![0.1, 0.5, -0.2, 0.3, 0.05]).unwrap();
        let mut f = LmsFilter::new(2, 4.0, 2.0).with_weights(w.clone());
        for i in 0..100 {
            let t = i as f64 * 0.01;
            let x = w.eval(2.0 * t);
            f.update(x, 0.01);
        }
        for (a, b) in f.weights.as_slice().iter().zip(w.as_slice()) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn lms_converges_on_tone() {
        let omega = 3.0;
        let amp = 1.7;
        let n = 1000;
        let dt = 2.0 * PI / omega / n as f64;
        let mut f = LmsFilter::new(1, optimal_gain(omega, 2.0), omega);
        for i in 0..5 * n {
            f.update(amp * (omega * i as f64 * dt).sin(), dt);
        }
        assert!((f.weights.sin(1) - amp).abs() < 0.01 * amp, "{:?}", f.weights);
    }

    #[test]
    fn lms_decays_on_zero_input() {
        let omega = 1.0;
        let n = 200;
        let dt = 2.0 * PI / n as f64;
        let w = HarmonicVector::from_coeffs(2, vec![1.0, -1.0, 0.5, 2.0, 0.3]).unwrap();
        let mut f = LmsFilter::new(2, default_gain(omega, 2, 2.0), omega).with_weights(w);
        let mut prev = f64::INFINITY;
        for _ in 0..8 {
            let mut acc = 0.0;
            for _ in 0..n {
                f.update(0.0, dt);
                acc += crate::linalg::norm2(f.weights.as_slice());
            }
            assert!(acc < prev);
            prev = acc;
        }
    }

    #[test]
    fn total_amplitude_examples() {
        let n = 1000;
        let ph = |i: usize| 2.0 * PI * i as f64 / n as f64;
        let xs: Vec<f64> = (0..2 * n).map(|i| ph(i).sin()).collect();
        assert!(close(total_amplitude(&xs, n).unwrap(), 1.0, 1e-5));
        let xs: Vec<f64> = (0..n).map(|i| 1.0 + ph(i).sin()).collect();
        assert!(close(total_amplitude(&xs, n).unwrap(), 2.0, 1e-5));
        assert!(total_amplitude(&xs[..10], n).is_err());
    }

    #[test]
    fn phase_lag_wraps_below_quadrature() {
        assert!(close(phase_lag(-PI / 2.0, 0.0), -PI / 2.0, 1e-15));
        assert!(close(phase_lag(PI, 0.0), -PI, 1e-15));
        assert!(close(phase_lag(0.1 - PI, 0.2), -PI - 0.1, 1e-14));
    }
}
