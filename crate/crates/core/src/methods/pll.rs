#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;

use super::{Branch, BranchPoint, MethodId, Rig};
use crate::control::{pid_step, PidGains, PidState};
use crate::error::{precondition, Result};
use crate::fourier::{default_gain, wrap_pi, Demodulator, HarmonicVector, LmsFilter};
use crate::plant::Plant;

#[derive(Debug, Clone, PartialEq)]
pub enum PllSchedule {
    /// Target phases at a fixed drive amplitude (frequency response).
    Phase { f_amp: f64, thetas: Vec<f64> },
    /// Drive amplitudes at a fixed target phase (backbone at `-π/2`).
    Forcing { theta: f64, amps: Vec<f64> },
}

impl PllSchedule {
    fn points(&self) -> Vec<(f64, f64)> {
        match self {
            PllSchedule::Phase { f_amp, thetas } => thetas.iter().map(|t| (*f_amp, *t)).collect(),
            PllSchedule::Forcing { theta, amps } => amps.iter().map(|f| (*f, *theta)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PllSettings {
    pub schedule: PllSchedule,
    pub gains: PidGains,
    /// Response harmonic whose phase is locked.
    pub lock_harmonic: usize,
    pub omega_init: f64,
    /// Derivative smoothing reference, rad/s.
    pub loop_bandwidth: f64,
    pub settle_periods: usize,
    pub max_settle_periods: usize,
    pub measure_periods: usize,
    /// Lock tolerance on the phase error, rad.
    pub tol: f64,
    pub h: usize,
    pub mu_bar: f64,
    pub steps_per_period: usize,
}

impl Default for PllSettings {
    fn default() -> Self {
        Self {
            schedule: PllSchedule::Forcing {
                theta: -core::f64::consts::FRAC_PI_2,
                amps: Vec::new(),
            },
            gains: PidGains {
                kp: 0.05,
                ki: 0.01,
                kd: 0.0,
            },
            lock_harmonic: 1,
            omega_init: 1.0,
            loop_bandwidth: 0.05,
            settle_periods: 100,
            max_settle_periods: 1000,
            measure_periods: 5,
            tol: 1e-3,
            h: 5,
            mu_bar: 1.0,
            steps_per_period: 1000,
        }
    }
}

/// Phase-locked loop: a PID on the phase error of one response harmonic
/// sets the excitation frequency; the drive itself stays a pure tone.
pub fn pll(plant: Plant, s: &PllSettings) -> Result<Branch> {
    if s.gains.ki == 0.0 {
        return Err(precondition("phase-locked loop needs a non-zero integral gain"));
    }
    let k = s.lock_harmonic;
    if k == 0 || k > s.h {
        return Err(precondition("lock harmonic must lie in 1..=h"));
    }
    if s.measure_periods == 0 || s.max_settle_periods < s.settle_periods {
        return Err(precondition("need measured periods and max_settle >= settle"));
    }
    let schedule = s.schedule.points();
    if schedule.is_empty() {
        return Err(precondition("empty PLL schedule"));
    }
    let mut rig = Rig::new(plant, s.omega_init, s.steps_per_period)?;
    let mut lms = LmsFilter::new(s.h, default_gain(s.omega_init, s.h, s.mu_bar), s.omega_init);
    let mut pid = PidState::new(s.omega_init)
        .with_bandwidth(s.loop_bandwidth)
        .with_output_range(s.omega_init);
    let omega_floor = 1e-3 * s.omega_init;
    let mut branch = Branch::new(MethodId::Pll);
    let n = s.steps_per_period;
    for (f, theta_star) in schedule {
        let mut periods = 0;
        let mut locked = None;
        while periods < s.max_settle_periods {
            let measuring = periods + s.measure_periods >= s.settle_periods;
            let mut resp = Demodulator::new(s.h);
            let mut peak: f64 = 0.0;
            let (mut wmin, mut wmax) = (f64::INFINITY, 0.0f64);
            for _ in 0..s.measure_periods * n {
                let phase = rig.phase();
                let q = rig.sensed().q;
                let dt = rig.dt();
                lms.mu = default_gain(rig.omega(), s.h, s.mu_bar);
                lms.update_at_phase(q, phase, dt);
                let (sk, ck) = (lms.weights.sin(k), lms.weights.cos(k));
                let e = wrap_pi(ck.atan2(sk) - theta_star);
                resp.push(phase, q);
                peak = peak.max(q.abs());
                wmin = wmin.min(rig.omega());
                wmax = wmax.max(rig.omega());
                rig.step_synth(|p| f * p.sin())?;
                let (out, next) = pid_step(&pid, e, dt, &s.gains)?;
                pid = next;
                rig.set_omega(out.max(omega_floor))?;
            }
            periods += s.measure_periods;
            if !measuring {
                continue;
            }
            let w = resp.finish();
            let (sk, ck) = (w.sin(k), w.cos(k));
            let e = wrap_pi(ck.atan2(sk) - theta_star);
            let spread = (wmax - wmin) / wmax;
            if e.abs() <= s.tol && spread <= s.tol {
                locked = Some((w, peak, 0.5 * (wmin + wmax)));
                break;
            }
            if periods >= s.max_settle_periods {
                locked = None;
                branch.diagnostics.push(format!(
                    "no lock at f={f}, theta*={theta_star}: phase error {e:.2e}, frequency spread {spread:.2e}"
                ));
                let mut bp = BranchPoint::new(rig.omega(), w, HarmonicVector::fundamental(s.h, f, 0.0), peak);
                bp.converged = false;
                bp.wall_time = rig.elapsed();
                branch.points.push(bp);
            }
        }
        if let Some((w, peak, omega)) = locked {
            let mut bp = BranchPoint::new(omega, w, HarmonicVector::fundamental(s.h, f, 0.0), peak);
            bp.wall_time = rig.elapsed();
            branch.points.push(bp);
        }
    }
    if pid.windup {
        branch.diagnostics.push("integral clamp reached during the run".into());
    }
    Ok(branch)
}

/// Phase of harmonic `k` of a point relative to `sin(kφ)`.
pub fn harmonic_phase(point: &BranchPoint, k: usize) -> f64 {
    let (s, c) = (point.response.sin(k), point.response.cos(k));
    c.atan2(s)
}
