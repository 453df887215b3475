use alloc::format;
use alloc::vec::Vec;

use super::{Branch, BranchPoint, MethodId, Rig};
use crate::control::{
    control_off_stability_probe, differential_control, invasiveness, ClosedLoopPoint, ProbeSettings, ProbeVerdict,
    ReferenceSignal,
};
use crate::error::{precondition, Result};
use crate::fourier::{default_gain, HarmonicVector, LmsFilter};
use crate::plant::Plant;
use crate::postprocess::SurfaceGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScbcVariant {
    /// Reference harmonics reassigned from the measured response after
    /// each hold.
    Picard,
    /// Reference harmonics tracked continuously by an adaptive filter.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScbcSettings {
    pub omega: f64,
    pub a_star_grid: Vec<f64>,
    pub variant: ScbcVariant,
    pub kd: f64,
    /// Relative invasiveness accepted at convergence.
    pub tol: f64,
    pub max_iter: usize,
    pub h: usize,
    pub settle_periods: usize,
    pub measure_periods: usize,
    pub mu_bar: f64,
    pub steps_per_period: usize,
    pub probe: Option<ProbeSettings>,
}

impl Default for ScbcSettings {
    fn default() -> Self {
        Self {
            omega: 1.0,
            a_star_grid: Vec::new(),
            variant: ScbcVariant::Picard,
            kd: 1.0,
            tol: 0.01,
            max_iter: 20,
            h: 5,
            settle_periods: 50,
            measure_periods: 5,
            mu_bar: 0.1,
            steps_per_period: 1000,
            probe: None,
        }
    }
}

fn validate(s: &ScbcSettings) -> Result<()> {
    if s.a_star_grid.is_empty() || s.a_star_grid.iter().any(|a| !(*a > 0.0)) {
        return Err(precondition("target amplitude grid must be non-empty and positive"));
    }
    if s.max_iter == 0 || s.measure_periods == 0 || s.h < 2 {
        return Err(precondition("need iterations, measured periods and h >= 2"));
    }
    Ok(())
}

/// Runs one target amplitude to convergence on a rig already at the
/// desired frequency; `nf` carries the reference harmonics between targets.
fn scbc_point(rig: &mut Rig, a_star: f64, nf: &mut HarmonicVector, s: &ScbcSettings) -> Result<BranchPoint> {
    let omega = rig.omega();
    let mut reference = ReferenceSignal::new(omega, a_star, 0.0, nf);
    let mut lms = LmsFilter::new(s.h, default_gain(omega, s.h, s.mu_bar), omega).with_weights(reference.coeffs());
    let dt = rig.dt();
    let periods = s.settle_periods + s.measure_periods;
    let kd = s.kd;
    let mut result = None;
    for _ in 0..s.max_iter {
        let rec = match s.variant {
            ScbcVariant::Picard => rig.hold_feedback(
                |ph, sen| differential_control(reference.rate_at_phase(ph), sen.v, kd),
                periods,
                s.measure_periods,
            )?,
            ScbcVariant::Adaptive => rig.hold_feedback(
                |ph, sen| {
                    lms.update_at_phase(sen.q, ph, dt);
                    reference.set_nonfundamental(&lms.weights);
                    differential_control(reference.rate_at_phase(ph), sen.v, kd)
                },
                periods,
                s.measure_periods,
            )?,
        };
        let w = rec.response(s.h);
        let inv = invasiveness(&reference, &w);
        let mut bp = BranchPoint::new(omega, w.clone(), rec.drive(s.h), rec.peak());
        bp.a_star = Some(a_star);
        bp.invasiveness = Some(inv);
        bp.converged = inv.relative < s.tol;
        if s.variant == ScbcVariant::Picard {
            reference.set_nonfundamental(&w);
        }
        let done = bp.converged;
        result = Some(bp);
        if done {
            break;
        }
    }
    let mut bp = result.expect("at least one iteration");
    if let Some(probe) = &s.probe {
        let point = ClosedLoopPoint {
            state: rig.state(),
            phase: rig.phase(),
            omega,
            forcing: bp.forcing.clone(),
            amplitude: bp.a1(),
        };
        let verdict = control_off_stability_probe(rig.plant(), &point, probe)?;
        bp.open_loop_stable = Some(verdict == ProbeVerdict::OpenLoopStable);
    }
    *nf = reference.nonfundamental().clone();
    bp.wall_time = rig.elapsed();
    Ok(bp)
}

/// Simplified control-based continuation at fixed frequency: one closed-loop
/// point per target amplitude, forming an S-curve.
pub fn scbc(plant: Plant, s: &ScbcSettings) -> Result<Branch> {
    validate(s)?;
    let mut rig = Rig::new(plant, s.omega, s.steps_per_period)?;
    let mut nf = HarmonicVector::zeros(s.h);
    let mut branch = Branch::new(MethodId::Scbc);
    for &a in &s.a_star_grid {
        let bp = scbc_point(&mut rig, a, &mut nf, s)?;
        if !bp.converged {
            branch.diagnostics.push(format!(
                "a*={a}: invasiveness {:.3e} above tolerance after {} iterations",
                bp.invasiveness.map_or(f64::NAN, |r| r.relative),
                s.max_iter
            ));
        }
        branch.points.push(bp);
    }
    Ok(branch)
}

/// Harmonic force surface from S-curves at every frequency of the axis.
pub fn scbc_surface(plant: Plant, omega_axis: &[f64], s: &ScbcSettings) -> Result<SurfaceGrid> {
    validate(s)?;
    let mut grid = SurfaceGrid::new(omega_axis.to_vec(), s.a_star_grid.clone())?;
    let mut rig = Rig::new(plant, omega_axis[0], s.steps_per_period)?;
    for (i, &w) in omega_axis.iter().enumerate() {
        rig.set_omega(w)?;
        let mut nf = HarmonicVector::zeros(s.h);
        for (j, &a) in s.a_star_grid.iter().enumerate() {
            let bp = scbc_point(&mut rig, a, &mut nf, s)?;
            grid.set(i, j, bp.f_meas(), bp.a1(), !bp.converged);
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
    fn linear_plant_needs_one_picard_iteration() {
        let p = Plant::noiseless(DuffingParams::linear(1.0, 0.1, 1.0)).unwrap();
        let s = ScbcSettings {
            omega: 0.9,
            a_star_grid: vec![0.5, 1.0],
            max_iter: 1,
            settle_periods: 20,
            steps_per_period: 200,
            ..Default::default()
        };
        let b = scbc(p, &s).unwrap();
        assert!(b.points.iter().all(|p| p.converged));
        assert!(b.points[1].invasiveness.unwrap().relative < 1e-6);
    }

    #[test]
    fn adaptive_variant_is_non_invasive_on_duffing() {
        let p = Plant::noiseless(DuffingParams::dimensionless(0.05, 0.0)).unwrap();
        let s = ScbcSettings {
            omega: 1.4,
            a_star_grid: vec![0.8],
            variant: ScbcVariant::Adaptive,
            kd: 2.0,
            settle_periods: 30,
            steps_per_period: 400,
            ..Default::default()
        };
        let b = scbc(p, &s).unwrap();
        let pt = &b.points[0];
        assert!(pt.converged, "{:?}", b.diagnostics);
        assert!(pt.forcing.non_fundamental().rms() < 0.01 * pt.f_meas());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let p = Plant::noiseless(DuffingParams::linear(1.0, 0.1, 1.0)).unwrap();
        assert!(scbc(p, &ScbcSettings::default()).is_err());
    }
}
