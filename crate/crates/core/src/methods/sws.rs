#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;

use super::{Branch, BranchPoint, MethodId, Rig};
use crate::error::{precondition, Result};
use crate::fourier::Demodulator;
use crate::plant::Plant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSpacing {
    Logarithmic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub f_amp: f64,
    pub omega_start: f64,
    pub omega_end: f64,
    /// Change per excitation cycle: relative for logarithmic sweeps,
    /// absolute (rad/s) for linear ones.
    pub rate: f64,
    pub spacing: SweepSpacing,
    /// Cycles at the start frequency before the sweep begins.
    pub settle_periods: usize,
    pub steps_per_period: usize,
    pub h: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            f_amp: 1.0,
            omega_start: 0.5,
            omega_end: 2.0,
            rate: 2e-4,
            spacing: SweepSpacing::Logarithmic,
            settle_periods: 100,
            steps_per_period: 1000,
            h: 5,
        }
    }
}

/// Frequency ramp at constant drive amplitude, demodulated cycle by cycle.
/// The direction follows the order of the start and end frequencies.
pub fn swept_sine(plant: Plant, s: &SweepSettings) -> Result<Branch> {
    if !(s.omega_start > 0.0 && s.omega_end > 0.0) || s.omega_start == s.omega_end {
        return Err(precondition("sweep needs two distinct positive frequencies"));
    }
    if !(s.rate > 0.0) || !s.rate.is_finite() {
        return Err(precondition("sweep rate must be positive and finite"));
    }
    let up = s.omega_end > s.omega_start;
    let dir = if up { 1.0 } else { -1.0 };
    let n = s.steps_per_period;
    let per_sample_ratio = (1.0 + s.rate).powf(dir / n as f64);
    let mut rig = Rig::new(plant, s.omega_start, n)?;
    let f = s.f_amp;
    rig.hold_tonal(f, s.settle_periods, 0)?;
    let mut branch = Branch::new(MethodId::Sws);
    let past_end = |w: f64| if up { w >= s.omega_end } else { w <= s.omega_end };
    while !past_end(rig.omega()) {
        let mut resp = Demodulator::new(s.h);
        let mut drive = Demodulator::new(s.h);
        let mut peak: f64 = 0.0;
        let mut w_sum = 0.0;
        for _ in 0..n {
            let p = rig.phase();
            let q = rig.sensed().q;
            resp.push(p, q);
            drive.push(p, f * p.sin());
            peak = peak.max(q.abs());
            w_sum += rig.omega();
            rig.step_synth(|ph| f * ph.sin())?;
            let next = match s.spacing {
                SweepSpacing::Logarithmic => rig.omega() * per_sample_ratio,
                SweepSpacing::Linear => rig.omega() + dir * s.rate / n as f64,
            };
            rig.set_omega(next)?;
        }
        let mut bp = BranchPoint::new(w_sum / n as f64, resp.finish(), drive.finish(), peak);
        bp.wall_time = rig.elapsed();
        branch.points.push(bp);
    }
    if let Some(j) = largest_jump(&branch) {
        branch.diagnostics.push(format!(
            "largest cycle-to-cycle amplitude change x{:.3} between omega {:.5} and {:.5}",
            j.ratio, j.omega_before, j.omega_after
        ));
    }
    Ok(branch)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub index: usize,
    pub omega_before: f64,
    pub omega_after: f64,
    /// Ratio of fundamental amplitudes after/before.
    pub ratio: f64,
}

/// Largest discontinuity in the direction a sweep jumps: a drop for
/// increasing frequency, a rise for decreasing frequency.
pub fn largest_jump(branch: &Branch) -> Option<Jump> {
    let pts = &branch.points;
    if pts.len() < 2 {
        return None;
    }
    let up = pts[pts.len() - 1].omega > pts[0].omega;
    let mut best: Option<Jump> = None;
    for i in 1..pts.len() {
        let (a0, a1) = (pts[i - 1].a1(), pts[i].a1());
        if !(a0 > 0.0 && a1 > 0.0) {
            continue;
        }
        let ratio = a1 / a0;
        let better = match best {
            None => true,
            Some(b) => {
                if up {
                    ratio < b.ratio
                } else {
                    ratio > b.ratio
                }
            }
        };
        if better {
            best = Some(Jump {
                index: i,
                omega_before: pts[i - 1].omega,
                omega_after: pts[i].omega,
                ratio,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linear_frf;
    use crate::plant::DuffingParams;

    #[test]
    fn slow_sweep_on_linear_plant_follows_frf() {
        let p = DuffingParams::linear(1.0, 0.2, 1.0);
        let s = SweepSettings {
            f_amp: 0.5,
            omega_start: 0.5,
            omega_end: 1.5,
            rate: 5e-4,
            steps_per_period: 200,
            ..Default::default()
        };
        let b = swept_sine(Plant::noiseless(p).unwrap(), &s).unwrap();
        assert!(b.points.len() > 100);
        for pt in b.points.iter().step_by(50) {
            let (a, _) = linear_frf(1.0, 0.2, 1.0, 0.5, pt.omega);
            assert!((pt.a1() - a).abs() < 0.01 * a, "{} {} {}", pt.omega, pt.a1(), a);
        }
        assert!(b.points.windows(2).all(|w| w[1].omega > w[0].omega));
    }

    #[test]
    fn rejects_degenerate_range() {
        let p = Plant::noiseless(DuffingParams::linear(1.0, 0.2, 1.0)).unwrap();
        let s = SweepSettings {
            omega_end: 0.5,
            ..Default::default()
        };
        assert!(swept_sine(p, &s).is_err());
    }

    #[test]
    fn jump_direction() {
        let mut b = Branch::new(MethodId::Sws);
        for (w, a) in [(1.0, 1.0), (1.1, 2.0), (1.2, 0.5), (1.3, 0.4)] {
            let r = crate::fourier::HarmonicVector::fundamental(1, a, 0.0);
            let f = crate::fourier::HarmonicVector::fundamental(1, 1.0, 0.0);
            b.points.push(BranchPoint::new(w, r, f, a));
        }
        let j = largest_jump(&b).unwrap();
        assert_eq!(j.index, 2);
        assert!((j.ratio - 0.25).abs() < 1e-12);
    }
}
