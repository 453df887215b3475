use alloc::format;
use alloc::vec::Vec;

use super::{Branch, BranchPoint, MethodId, Rig};
use crate::error::{precondition, Error, Result};
use crate::fourier::HarmonicVector;
use crate::plant::Plant;

/// Which excitation parameter the grid steps through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteppedAxis {
    /// Frequency grid at a fixed drive amplitude.
    Frequency { f_amp: f64 },
    /// Drive amplitude grid at a fixed frequency (S-curve).
    Amplitude { omega: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteppedSettings {
    pub axis: SteppedAxis,
    pub grid: Vec<f64>,
    pub settle_periods: usize,
    pub measure_periods: usize,
    pub steps_per_period: usize,
    pub h: usize,
}

impl Default for SteppedSettings {
    fn default() -> Self {
        Self {
            axis: SteppedAxis::Frequency { f_amp: 1.0 },
            grid: Vec::new(),
            settle_periods: 50,
            measure_periods: 5,
            steps_per_period: 1000,
            h: 5,
        }
    }
}

/// Holds each grid point for the settling time, then demodulates the last
/// periods. The plant state carries over from one point to the next.
pub fn stepped_sine(plant: Plant, s: &SteppedSettings) -> Result<Branch> {
    if s.grid.is_empty() {
        return Err(precondition("stepped sine needs a non-empty grid"));
    }
    if s.measure_periods == 0 {
        return Err(precondition("at least one measured period is required"));
    }
    let omega0 = match s.axis {
        SteppedAxis::Frequency { .. } => s.grid[0],
        SteppedAxis::Amplitude { omega } => omega,
    };
    let mut rig = Rig::new(plant, omega0, s.steps_per_period)?;
    let mut branch = Branch::new(MethodId::Sts);
    for &g in &s.grid {
        let (omega, f) = match s.axis {
            SteppedAxis::Frequency { f_amp } => (g, f_amp),
            SteppedAxis::Amplitude { omega } => (omega, g),
        };
        rig.set_omega(omega)?;
        let periods = s.settle_periods + s.measure_periods;
        match rig.hold_tonal(f, periods, s.measure_periods) {
            Ok(rec) => {
                let mut bp = BranchPoint::new(omega, rec.response(s.h), rec.drive(s.h), rec.peak());
                bp.wall_time = rig.elapsed();
                branch.points.push(bp);
            }
            Err(Error::Divergence { t, .. }) => {
                branch
                    .diagnostics
                    .push(format!("plant diverged at grid value {g} (t={t}); state reset"));
                let mut bp = BranchPoint::new(
                    omega,
                    HarmonicVector::zeros(s.h),
                    HarmonicVector::fundamental(s.h, f, 0.0),
                    f64::NAN,
                );
                bp.converged = false;
                bp.wall_time = rig.elapsed();
                branch.points.push(bp);
                rig.reset_state();
            }
            Err(e) => return Err(e),
        }
    }
    Ok(branch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linear_frf;
    use crate::plant::DuffingParams;
    use alloc::vec;

    #[test]
    fn frequency_grid_samples_frf() {
        let p = DuffingParams::linear(1.0, 0.3, 1.0);
        let s = SteppedSettings {
            axis: SteppedAxis::Frequency { f_amp: 0.2 },
            grid: vec![0.5, 0.9, 1.0, 1.4],
            settle_periods: 60,
            steps_per_period: 400,
            ..Default::default()
        };
        let b = stepped_sine(Plant::noiseless(p).unwrap(), &s).unwrap();
        for pt in &b.points {
            let (a, lag) = linear_frf(1.0, 0.3, 1.0, 0.2, pt.omega);
            assert!((pt.a1() - a).abs() < 1e-3 * a);
            assert!((pt.phase_lag - lag).abs() < 1e-3);
        }
    }

    #[test]
    fn empty_grid_is_an_error() {
        let p = Plant::noiseless(DuffingParams::linear(1.0, 0.3, 1.0)).unwrap();
        assert!(stepped_sine(p, &SteppedSettings::default()).is_err());
    }

    #[test]
    fn divergence_flags_point_and_continues() {
        // Negative cubic stiffness escapes for a large drive.
        let p = DuffingParams {
            m: 1.0,
            c: 0.1,
            k: 1.0,
            k2: 0.0,
            k3: -1.0,
        };
        let plant = Plant::noiseless(p).unwrap().with_bound(50.0);
        let s = SteppedSettings {
            axis: SteppedAxis::Amplitude { omega: 0.5 },
            grid: vec![0.01, 5.0, 0.01],
            settle_periods: 20,
            steps_per_period: 200,
            ..Default::default()
        };
        let b = stepped_sine(plant, &s).unwrap();
        assert_eq!(b.points.len(), 3);
        assert!(b.points[0].converged && !b.points[1].converged && b.points[2].converged);
        assert_eq!(b.diagnostics.len(), 1);
    }
}
