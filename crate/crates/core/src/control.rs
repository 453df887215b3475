//! Feedback laws and the non-invasiveness bookkeeping shared by the
//! control-based methods.

#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use crate::error::{precondition, Result};
use crate::fourier::{Demodulator, HarmonicVector};
use crate::plant::{Plant, PlantState};

/// Velocity feedback towards a fixed reference.
pub fn differential_control(x_star_vel: f64, sensed_vel: f64, kd: f64) -> f64 {
    kd * (x_star_vel - sensed_vel)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// Internal state of a PID law. `tau` is the derivative smoothing time
/// constant and `clamp` bounds `|ki ∫e|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub bias: f64,
    pub integral: f64,
    pub prev_error: Option<f64>,
    pub derivative: f64,
    pub tau: f64,
    pub clamp: f64,
    pub windup: bool,
}

impl PidState {
    pub fn new(bias: f64) -> Self {
        Self {
            bias,
            integral: 0.0,
            prev_error: None,
            derivative: 0.0,
            tau: 0.0,
            clamp: f64::INFINITY,
            windup: false,
        }
    }

    /// Derivative pole at ten times the loop bandwidth (rad/s).
    pub fn with_bandwidth(mut self, bandwidth: f64) -> Self {
        self.tau = if bandwidth > 0.0 { 1.0 / (10.0 * bandwidth) } else { 0.0 };
        self
    }

    /// Integral clamp at ten times the expected output range.
    pub fn with_output_range(mut self, range: f64) -> Self {
        self.clamp = 10.0 * range.abs();
        self
    }
}

pub fn pid_step(state: &PidState, error: f64, dt: f64, gains: &PidGains) -> Result<(f64, PidState)> {
    if !(dt > 0.0) {
        return Err(precondition("pid step needs dt > 0"));
    }
    let mut next = *state;
    next.integral += error * dt;
    let mut i_term = gains.ki * next.integral;
    if i_term.abs() > state.clamp {
        i_term = state.clamp.copysign(i_term);
        next.integral = i_term / gains.ki;
        next.windup = true;
    }
    let raw = match state.prev_error {
        Some(prev) => (error - prev) / dt,
        None => 0.0,
    };
    next.derivative = if state.tau > 0.0 {
        let a = dt / (state.tau + dt);
        state.derivative + a * (raw - state.derivative)
    } else {
        raw
    };
    next.prev_error = Some(error);
    let out = state.bias + gains.kp * error + i_term + gains.kd * next.derivative;
    Ok((out, next))
}

/// Control target `a* sin ωt + b* cos ωt + basis·w_nf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignal {
    pub omega: f64,
    pub a_star: f64,
    pub b_star: f64,
    nonfundamental: HarmonicVector,
}

impl ReferenceSignal {
    pub fn new(omega: f64, a_star: f64, b_star: f64, nonfundamental: &HarmonicVector) -> Self {
        Self {
            omega,
            a_star,
            b_star,
            nonfundamental: nonfundamental.non_fundamental(),
        }
    }

    pub fn tonal(omega: f64, a_star: f64, h: usize) -> Self {
        Self::new(omega, a_star, 0.0, &HarmonicVector::zeros(h))
    }

    pub fn nonfundamental(&self) -> &HarmonicVector {
        &self.nonfundamental
    }

    /// Copies the non-fundamental part of `w`, resized to the reference.
    pub fn set_nonfundamental(&mut self, w: &HarmonicVector) {
        let h = self.nonfundamental.h();
        let dst = self.nonfundamental.as_mut_slice();
        for (k, d) in dst.iter_mut().enumerate() {
            *d = if k == 1 || k == h + 1 { 0.0 } else { w.as_slice().get(map_index(k, h, w.h())).copied().unwrap_or(0.0) };
        }
    }

    /// Full coefficient vector of the reference.
    pub fn coeffs(&self) -> HarmonicVector {
        let mut w = self.nonfundamental.clone();
        w.set_sin(1, self.a_star);
        w.set_cos(1, self.b_star);
        w
    }

    pub fn at_phase(&self, phase: f64) -> f64 {
        self.a_star * phase.sin() + self.b_star * phase.cos() + self.nonfundamental.eval(phase)
    }

    /// Time derivative at `phase` for the current frequency.
    pub fn rate_at_phase(&self, phase: f64) -> f64 {
        self.omega
            * (self.a_star * phase.cos() - self.b_star * phase.sin()
                + self.nonfundamental.eval_dphase(phase))
    }
}

/// Index of the same basis function in a vector with `h_src` harmonics.
fn map_index(k: usize, h: usize, h_src: usize) -> usize {
    if k == 0 {
        0
    } else if k <= h {
        if k <= h_src { k } else { usize::MAX }
    } else if k - h <= h_src {
        h_src + k - h
    } else {
        usize::MAX
    }
}

pub fn synth_reference(reference: &ReferenceSignal, t: f64) -> f64 {
    reference.at_phase(reference.omega * t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvasivenessReport {
    pub residual_norm: f64,
    pub relative: f64,
}

/// Mismatch between reference and measured non-fundamental coefficients.
pub fn invasiveness(reference: &ReferenceSignal, measured: &HarmonicVector) -> InvasivenessReport {
    let r = reference.nonfundamental();
    let m = measured.resized(r.h()).non_fundamental();
    let residual_norm = r
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let fund = (reference.a_star * reference.a_star + reference.b_star * reference.b_star).sqrt();
    let relative = if residual_norm == 0.0 {
        0.0
    } else if fund > 0.0 {
        residual_norm / fund
    } else {
        f64::INFINITY
    };
    InvasivenessReport {
        residual_norm,
        relative,
    }
}

/// State of a converged closed loop handed to the open-loop probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopPoint {
    pub state: PlantState,
    pub phase: f64,
    pub omega: f64,
    /// Realised drive over one period, in the excitation phase.
    pub forcing: HarmonicVector,
    /// Fundamental response amplitude under control.
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    pub hold_periods: usize,
    pub band: f64,
    pub steps_per_period: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            hold_periods: 50,
            band: 0.05,
            steps_per_period: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeVerdict {
    OpenLoopStable,
    OpenLoopUnstable,
}

/// Replays the realised forcing with the feedback switched off on a copy of
/// the plant and watches the fundamental amplitude.
pub fn control_off_stability_probe(
    plant: &Plant,
    point: &ClosedLoopPoint,
    settings: &ProbeSettings,
) -> Result<ProbeVerdict> {
    if settings.hold_periods == 0 || settings.steps_per_period == 0 || !(point.omega > 0.0) {
        return Err(precondition("probe needs a positive hold and frequency"));
    }
    let mut plant = plant.clone();
    plant.set_state(point.state);
    let n = settings.steps_per_period;
    let dphase = 2.0 * PI / n as f64;
    let dt = dphase / point.omega;
    let lo = (1.0 - settings.band) * point.amplitude;
    let hi = (1.0 + settings.band) * point.amplitude;
    let mut phase = point.phase;
    for _ in 0..settings.hold_periods {
        let mut demod = Demodulator::new(1);
        for _ in 0..n {
            demod.push(phase, plant.state().q);
            let p0 = phase;
            let t_start = plant.state().t;
            let forcing = &point.forcing;
            let step = plant.step_with(|t| forcing.eval(p0 + point.omega * (t - t_start)), dt);
            if step.is_err() {
                return Ok(ProbeVerdict::OpenLoopUnstable);
            }
            phase += dphase;
        }
        let a = demod.finish().amp_phase(1)?.0;
        if !(a >= lo && a <= hi) {
            return Ok(ProbeVerdict::OpenLoopUnstable);
        }
    }
    Ok(ProbeVerdict::OpenLoopStable)
}
