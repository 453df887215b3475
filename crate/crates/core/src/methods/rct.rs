use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use super::Rig;
use crate::error::{precondition, Result};
use crate::plant::Plant;
use crate::postprocess::SurfaceGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct RctSettings {
    pub omega_axis: Vec<f64>,
    pub a_star_axis: Vec<f64>,
    /// Relative amplitude tolerance that ends the corrections at a point.
    pub tol: f64,
    pub max_corrections: usize,
    /// Largest factor by which one correction may raise or lower the drive.
    pub max_drive_ratio: f64,
    /// Exponent on `a*/|x|₁` in the drive update. 1 inverts the last
    /// measured gain exactly; smaller values creep up on folds.
    pub relaxation: f64,
    /// Periods over which the drive amplitude is ramped to a new value.
    pub ramp_periods: usize,
    pub hold_periods: usize,
    pub measure_periods: usize,
    /// Relative error above which a point is flagged as rejected.
    pub reject_threshold: f64,
    /// Drive per unit target amplitude used at the very first point.
    pub initial_gain: f64,
    pub steps_per_period: usize,
    pub h: usize,
}

impl Default for RctSettings {
    fn default() -> Self {
        Self {
            omega_axis: Vec::new(),
            a_star_axis: Vec::new(),
            tol: 0.01,
            max_corrections: 10,
            max_drive_ratio: 2.0,
            relaxation: 1.0,
            ramp_periods: 10,
            hold_periods: 50,
            measure_periods: 5,
            reject_threshold: 0.2,
            initial_gain: 1.0,
            steps_per_period: 1000,
            h: 5,
        }
    }
}

/// Outcome of the amplitude iteration at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RctPoint {
    pub drive: f64,
    pub force: f64,
    pub response: f64,
    pub rel_error: f64,
    pub corrections: usize,
}

/// Adjusts a tonal drive until the response fundamental matches the target,
/// using the measured gain `|x|₁ / |u|₁` of the previous hold.
pub fn rct_point(rig: &mut Rig, a_star: f64, drive: f64, s: &RctSettings) -> Result<RctPoint> {
    rct_point_from(rig, a_star, drive, drive, s)
}

/// As [`rct_point`], ramping from the drive `prev` currently applied.
pub fn rct_point_from(rig: &mut Rig, a_star: f64, prev: f64, drive: f64, s: &RctSettings) -> Result<RctPoint> {
    let (mut u0, mut u) = (prev, drive);
    let mut corrections = 0;
    loop {
        let p0 = rig.phase();
        let span = 2.0 * PI * s.ramp_periods as f64;
        let ramp = |p: f64| {
            let t = if span > 0.0 && p >= p0 { ((p - p0) / span).min(1.0) } else { 1.0 };
            (u0 + t * (u - u0)) * p.sin()
        };
        let rec = rig.hold_synth(ramp, s.ramp_periods + s.hold_periods + s.measure_periods, s.measure_periods)?;
        let a = rec.response(s.h).amp_phase(1)?.0;
        let f = rec.drive(s.h).amp_phase(1)?.0;
        let err = (a - a_star).abs() / a_star;
        if err < s.tol || corrections >= s.max_corrections || !(a > 0.0) {
            return Ok(RctPoint {
                drive: u,
                force: f,
                response: a,
                rel_error: err,
                corrections,
            });
        }
        let r = s.max_drive_ratio;
        u0 = u;
        u = (f * (a_star / a).powf(s.relaxation)).clamp(u.abs() / r, u.abs() * r);
        corrections += 1;
    }
}

/// Response-controlled stepped sine over a (frequency, target amplitude)
/// grid, frequency stepping upwards for each target. Flags mark points whose
/// final relative error exceeds the rejection threshold.
pub fn rct(plant: Plant, s: &RctSettings) -> Result<SurfaceGrid> {
    let mut grid = SurfaceGrid::new(s.omega_axis.clone(), s.a_star_axis.clone())?;
    if s.a_star_axis[0] <= 0.0 || s.omega_axis[0] <= 0.0 {
        return Err(precondition("grid axes must be positive"));
    }
    if s.measure_periods == 0 || !(s.tol > 0.0) || !(s.max_drive_ratio > 1.0) || !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
        return Err(precondition("need measured periods, a positive tolerance, a drive ratio above 1 and relaxation in (0, 1]"));
    }
    let mut rig = Rig::new(plant, s.omega_axis[0], s.steps_per_period)?;
    let mut row_start: Option<(f64, f64)> = None;
    let mut applied = 0.0;
    for (j, &a_star) in s.a_star_axis.iter().enumerate() {
        let mut drive = match row_start {
            Some((u, a)) => u * a_star / a,
            None => s.initial_gain * a_star,
        };
        for (i, &omega) in s.omega_axis.iter().enumerate() {
            rig.set_omega(omega)?;
            let p = rct_point_from(&mut rig, a_star, applied, drive, s)?;
            applied = p.drive;
            grid.set(i, j, p.force, p.response, !(p.rel_error <= s.reject_threshold));
            if i == 0 {
                row_start = Some((p.drive, a_star));
            }
            drive = p.drive;
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::DuffingParams;
    use alloc::vec;

    #[test]
    fn linear_plant_converges_in_two_corrections() {
        let p = Plant::noiseless(DuffingParams::linear(1.0, 0.2, 1.0)).unwrap();
        let s = RctSettings {
            hold_periods: 60,
            steps_per_period: 200,
            ..Default::default()
        };
        let mut rig = Rig::new(p, 0.9, 200).unwrap();
        let r = rct_point(&mut rig, 0.7, 0.1, &s).unwrap();
        assert!(r.corrections <= 2 && r.rel_error < 0.01, "{r:?}");
    }

    #[test]
    fn infinite_tolerance_takes_one_hold() {
        let p = Plant::noiseless(DuffingParams::linear(1.0, 0.2, 1.0)).unwrap();
        let s = RctSettings {
            omega_axis: vec![0.8, 1.0],
            a_star_axis: vec![0.5, 1.0],
            tol: f64::INFINITY,
            reject_threshold: f64::INFINITY,
            hold_periods: 2,
            steps_per_period: 100,
            ..Default::default()
        };
        let g = rct(p, &s).unwrap();
        assert_eq!(g.flagged_count(), 0);
        let mut rig = Rig::new(Plant::noiseless(DuffingParams::linear(1.0, 0.2, 1.0)).unwrap(), 1.0, 100).unwrap();
        assert_eq!(rct_point(&mut rig, 1.0, 0.3, &s).unwrap().corrections, 0);
    }
}
