#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{precondition, Result};
use crate::fourier::{Demodulator, HarmonicVector};
use crate::plant::{Plant, PlantState, Sensed};

/// A plant sampled at a fixed number of samples per excitation period,
/// together with the excitation phase accumulator.
///
/// Each step samples the sensors at the current phase, applies a drive and
/// advances the phase by `2π / samples_per_period`, so the sample period
/// follows the instantaneous frequency.
#[derive(Debug, Clone)]
pub struct Rig {
    plant: Plant,
    omega: f64,
    phase: f64,
    spp: usize,
    last: Sensed,
    elapsed: f64,
}

/// Samples recorded over whole periods.
#[derive(Debug, Clone, Default)]
pub struct Record {
    pub phase: Vec<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

impl Record {
    pub fn push(&mut self, phase: f64, s: Sensed, u: f64) {
        self.phase.push(phase);
        self.q.push(s.q);
        self.v.push(s.v);
        self.u.push(u);
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    fn demod(&self, h: usize, x: &[f64]) -> HarmonicVector {
        let mut d = Demodulator::new(h);
        for (p, v) in self.phase.iter().zip(x) {
            d.push(*p, *v);
        }
        d.finish()
    }

    pub fn response(&self, h: usize) -> HarmonicVector {
        self.demod(h, &self.q)
    }

    pub fn velocity(&self, h: usize) -> HarmonicVector {
        self.demod(h, &self.v)
    }

    pub fn drive(&self, h: usize) -> HarmonicVector {
        self.demod(h, &self.u)
    }

    /// Peak `|q|` over the record.
    pub fn peak(&self) -> f64 {
        self.q.iter().fold(0.0, |m: f64, q| m.max(q.abs()))
    }
}

impl Rig {
    pub fn new(plant: Plant, omega: f64, samples_per_period: usize) -> Result<Self> {
        if !(omega > 0.0) || samples_per_period < 8 {
            return Err(precondition("rig needs omega > 0 and at least 8 samples per period"));
        }
        let s = plant.state();
        Ok(Self {
            plant,
            omega,
            phase: 0.0,
            spp: samples_per_period,
            last: Sensed { q: s.q, v: s.v },
            elapsed: 0.0,
        })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn set_omega(&mut self, omega: f64) -> Result<()> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(precondition("excitation frequency must be positive"));
        }
        self.omega = omega;
        Ok(())
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn samples_per_period(&self) -> usize {
        self.spp
    }

    pub fn dphase(&self) -> f64 {
        2.0 * PI / self.spp as f64
    }

    pub fn dt(&self) -> f64 {
        self.dphase() / self.omega
    }

    /// Latest sensor reading, taken at the current phase.
    pub fn sensed(&self) -> Sensed {
        self.last
    }

    pub fn state(&self) -> PlantState {
        self.plant.state()
    }

    /// Simulated time since the rig was built.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// Puts the plant back at rest, keeping the phase and clock.
    pub fn reset_state(&mut self) {
        let t = self.plant.state().t;
        self.plant.set_state(PlantState { q: 0.0, v: 0.0, t });
        self.last = Sensed::default();
    }

    fn finish_step(&mut self, sensed: Sensed, dt: f64) {
        self.last = sensed;
        self.phase += self.dphase();
        if self.phase > 2.0 * PI * 1e6 {
            self.phase %= 2.0 * PI;
        }
        self.elapsed += dt;
    }

    /// One sample with the drive held constant (digital controller output).
    pub fn step_held(&mut self, drive: f64) -> Result<Sensed> {
        let dt = self.dt();
        let s = self.plant.step(drive, dt)?;
        self.finish_step(s, dt);
        Ok(s)
    }

    /// One sample with a drive synthesized continuously from the phase.
    pub fn step_synth<F: Fn(f64) -> f64>(&mut self, drive: F) -> Result<Sensed> {
        let dt = self.dt();
        let p0 = self.phase;
        let t0 = self.plant.state().t;
        let w = self.omega;
        let s = self.plant.step_with(|t| drive(p0 + w * (t - t0)), dt)?;
        self.finish_step(s, dt);
        Ok(s)
    }

    /// Holds a synthesized periodic drive for `periods` periods, recording
    /// the last `record` of them.
    pub fn hold_synth<F: Fn(f64) -> f64>(&mut self, drive: F, periods: usize, record: usize) -> Result<Record> {
        let mut rec = Record::default();
        let skip = periods.saturating_sub(record) * self.spp;
        for i in 0..periods * self.spp {
            if i >= skip {
                rec.push(self.phase, self.last, drive(self.phase));
            }
            self.step_synth(&drive)?;
        }
        Ok(rec)
    }

    /// Tonal drive `f sin(φ)`.
    pub fn hold_tonal(&mut self, f: f64, periods: usize, record: usize) -> Result<Record> {
        self.hold_synth(|p| f * p.sin(), periods, record)
    }

    /// Runs a sampled feedback law `u = law(phase, sensed)` for `periods`
    /// periods, recording the last `record` of them.
    pub fn hold_feedback<F: FnMut(f64, Sensed) -> f64>(
        &mut self,
        mut law: F,
        periods: usize,
        record: usize,
    ) -> Result<Record> {
        let mut rec = Record::default();
        let skip = periods.saturating_sub(record) * self.spp;
        for i in 0..periods * self.spp {
            let u = law(self.phase, self.last);
            if i >= skip {
                rec.push(self.phase, self.last, u);
            }
            self.step_held(u)?;
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linear_frf;
    use crate::plant::DuffingParams;

    #[test]
    fn tonal_hold_matches_frf() {
        let plant = Plant::noiseless(DuffingParams::linear(1.0, 0.2, 1.0)).unwrap();
        let mut rig = Rig::new(plant, 1.3, 1000).unwrap();
        let rec = rig.hold_tonal(0.5, 80, 4).unwrap();
        assert_eq!(rec.len(), 4000);
        let (a, lag) = linear_frf(1.0, 0.2, 1.0, 0.5, 1.3);
        let (ga, gp) = rec.response(3).amp_phase(1).unwrap();
        assert!((ga - a).abs() < 1e-4 * a);
        assert!((gp - lag).abs() < 1e-4);
        let (fa, fp) = rec.drive(3).amp_phase(1).unwrap();
        assert!((fa - 0.5).abs() < 1e-10 && fp.abs() < 1e-10);
        let t = 80.0 * 2.0 * PI / 1.3;
        assert!((rig.elapsed() - t).abs() < 1e-9);
    }

    #[test]
    fn phase_step_follows_frequency() {
        let plant = Plant::noiseless(DuffingParams::linear(1.0, 0.2, 1.0)).unwrap();
        let mut rig = Rig::new(plant, 2.0, 100).unwrap();
        let dt = rig.dt();
        rig.step_held(0.0).unwrap();
        rig.set_omega(4.0).unwrap();
        assert!((rig.dt() - dt / 2.0).abs() < 1e-15);
        assert!((rig.phase() - 2.0 * PI / 100.0).abs() < 1e-15);
        assert!(rig.set_omega(0.0).is_err());
    }
}
