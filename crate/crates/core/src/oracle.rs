//! Brute-force references: long time integration with period-multiple
//! detection, and the closed-form linear frequency response.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{precondition, Result};
use crate::fourier::{Demodulator, HarmonicVector};
use crate::plant::{DuffingParams, Plant, PlantState};

/// Amplitude and phase lag of `m q'' + c q' + k q = f sin(ωt)`.
pub fn linear_frf(m: f64, c: f64, k: f64, f: f64, omega: f64) -> (f64, f64) {
    let re = k - m * omega * omega;
    let im = c * omega;
    (f / (re * re + im * im).sqrt(), -im.atan2(re))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleOptions {
    /// Harmonics of the forcing frequency to resolve.
    pub h: usize,
    pub steps_per_period: usize,
    /// Largest period multiple tested for subharmonic responses.
    pub max_multiple: usize,
    /// Poincaré similarity required to accept a period multiple.
    pub threshold: f64,
}

impl Default for SettleOptions {
    fn default() -> Self {
        Self {
            h: 5,
            steps_per_period: 1000,
            max_multiple: 5,
            threshold: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyResponse {
    /// Response period in forcing periods; `None` if no multiple up to the
    /// configured maximum repeats.
    pub period_multiple: Option<usize>,
    /// Coefficients at the response base frequency `ω / l`, `h·l` harmonics.
    pub coeffs: HarmonicVector,
    pub base_omega: f64,
    pub total_amp: f64,
    /// Poincaré samples `(q, v/ω)` at forcing phase zero.
    pub poincare: Vec<(f64, f64)>,
    pub end_state: PlantState,
}

impl SteadyResponse {
    /// Amplitude of the component at the forcing frequency.
    pub fn fundamental_amplitude(&self) -> f64 {
        let l = self.period_multiple.unwrap_or(1);
        self.coeffs.amp_phase(l).map(|(a, _)| a).unwrap_or(0.0)
    }

    /// Coefficients at the forcing frequency, dropping sub-harmonic content.
    pub fn forcing_harmonics(&self, h: usize) -> HarmonicVector {
        let l = self.period_multiple.unwrap_or(1);
        let mut out = HarmonicVector::zeros(h);
        out.as_mut_slice()[0] = self.coeffs.constant();
        for k in 1..=h {
            if k * l <= self.coeffs.h() {
                out.set_sin(k, self.coeffs.sin(k * l));
                out.set_cos(k, self.coeffs.cos(k * l));
            }
        }
        out
    }
}

/// Normalised similarity `2Σab / Σ(a²+b²)` of two Poincaré records.
fn similarity(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += 2.0 * (x.0 * y.0 + x.1 * y.1);
        den += x.0 * x.0 + x.1 * x.1 + y.0 * y.0 + y.1 * y.1;
    }
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Smallest `l` whose shifted Poincaré sequence matches itself.
pub fn detect_period_multiple(samples: &[(f64, f64)], max_multiple: usize, threshold: f64) -> Option<usize> {
    (1..=max_multiple).find(|&l| {
        samples.len() > l && similarity(&samples[..samples.len() - l], &samples[l..]) > threshold
    })
}

/// Integrates the forced plant from `ic` through `n_transient` periods and
/// analyses the next `n_measure`.
pub fn settle_and_measure(
    params: &DuffingParams,
    forcing: f64,
    omega: f64,
    ic: (f64, f64),
    n_transient: usize,
    n_measure: usize,
    opts: &SettleOptions,
) -> Result<SteadyResponse> {
    if n_transient == 0 || n_measure == 0 || !(omega > 0.0) || opts.steps_per_period == 0 {
        return Err(precondition("need at least one transient and one measured period"));
    }
    let mut plant = Plant::noiseless(*params)?;
    plant.set_state(PlantState {
        q: ic.0,
        v: ic.1,
        t: 0.0,
    });
    let n = opts.steps_per_period;
    let dt = 2.0 * PI / omega / n as f64;
    let drive = |t: f64| forcing * (omega * t).sin();
    let mut step_no: u64 = 0;
    let mut advance = |plant: &mut Plant| -> Result<()> {
        // Time from the step counter keeps the forcing phase drift-free.
        let t0 = step_no as f64 * dt;
        let mut s = plant.state();
        s.t = t0;
        plant.set_state(s);
        plant.step_with(drive, dt)?;
        step_no += 1;
        Ok(())
    };
    for _ in 0..n_transient * n {
        advance(&mut plant)?;
    }
    let mut record = Vec::with_capacity(n_measure * n);
    let mut poincare = Vec::with_capacity(n_measure + 1);
    for _ in 0..n_measure {
        let s = plant.state();
        poincare.push((s.q, s.v / omega));
        for _ in 0..n {
            record.push(plant.state().q);
            advance(&mut plant)?;
        }
    }
    let s = plant.state();
    poincare.push((s.q, s.v / omega));
    let multiple = detect_period_multiple(&poincare, opts.max_multiple.min(n_measure), opts.threshold);
    let l = multiple.unwrap_or(1);
    let base = omega / l as f64;
    let whole = (n_measure / l) * l;
    let start = (n_measure - whole) * n;
    let mut demod = Demodulator::new(opts.h * l);
    let t_start = (n_transient * n) as f64 * dt;
    for (i, q) in record.iter().enumerate().skip(start) {
        demod.push(base * (t_start + i as f64 * dt), *q);
    }
    let tail = &record[record.len() - n * l..];
    let total_amp = tail.iter().fold(0.0, |m: f64, q| m.max(q.abs()));
    Ok(SteadyResponse {
        period_multiple: multiple,
        coeffs: demod.finish(),
        base_omega: base,
        total_amp,
        poincare,
        end_state: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frf_examples() {
        let (a, p) = linear_frf(1.0, 0.1, 2.0, 1.0, 1e-9);
        assert!((a - 0.5).abs() < 1e-12 && p.abs() < 1e-9);
        let (_, p) = linear_frf(2.0, 0.3, 8.0, 1.0, 2.0);
        assert!((p + PI / 2.0).abs() < 1e-15);
        let (a, _) = linear_frf(1.0, 0.1, 1.0, 1.0, 1.0);
        assert!((a - 10.0).abs() < 1e-12);
    }

    #[test]
    fn settles_on_linear_frf() {
        let p = DuffingParams::linear(1.0, 0.2, 1.0);
        let r = settle_and_measure(&p, 0.5, 0.9, (0.0, 0.0), 60, 5, &SettleOptions::default()).unwrap();
        assert_eq!(r.period_multiple, Some(1));
        let (a, ph) = linear_frf(1.0, 0.2, 1.0, 0.5, 0.9);
        let (ga, gph) = r.coeffs.amp_phase(1).unwrap();
        assert!((ga - a).abs() < 2e-3 * a, "{ga} vs {a}");
        assert!((gph - ph).abs() < 2e-3);
    }

    #[test]
    fn unforced_damped_decays_to_zero() {
        let p = DuffingParams::dimensionless(0.1, 0.0);
        let r = settle_and_measure(&p, 0.0, 1.0, (0.0, 0.0), 2, 3, &SettleOptions::default()).unwrap();
        assert!(r.coeffs.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn period_detection() {
        let s: Vec<(f64, f64)> = (0..12).map(|i| if i % 3 == 0 { (1.0, 0.0) } else { (0.2, 0.5) }).collect();
        assert_eq!(detect_period_multiple(&s, 5, 0.999), Some(3));
        let s: Vec<(f64, f64)> = (0..12).map(|_| (0.3, -0.1)).collect();
        assert_eq!(detect_period_multiple(&s, 5, 0.999), Some(1));
    }
}
