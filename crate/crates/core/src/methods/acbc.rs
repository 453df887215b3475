#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::string::ToString;

use super::{Branch, BranchPoint, MethodId, Record, Rig};
use crate::control::{differential_control, invasiveness, ReferenceSignal};
use crate::error::{precondition, Error, Result};
use crate::fourier::LmsFilter;
use crate::plant::Plant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepLaw {
    /// `dα/dt = r`.
    Constant,
    /// `dα/dt = -k (f - f*)`.
    Integral,
    /// `dα/dt = -r sign(f - f*)`.
    Sign,
}

/// Rate of the eccentric anomaly for a force error `err = f - f*`.
pub fn sweep_law(law: SweepLaw, rate: f64, err: f64) -> f64 {
    match law {
        SweepLaw::Constant => rate,
        SweepLaw::Integral => -rate * err,
        SweepLaw::Sign => {
            if err == 0.0 {
                0.0
            } else {
                -rate * err.signum()
            }
        }
    }
}

/// Correction ellipse around the last accepted point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseState {
    pub omega_n: f64,
    pub a_n: f64,
    pub d_omega: f64,
    pub d_a: f64,
    /// Eccentric anomaly, rad.
    pub alpha: f64,
    pub law: SweepLaw,
    pub rate: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl EllipseState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        omega_n: f64,
        a_n: f64,
        d_omega: f64,
        d_a: f64,
        law: SweepLaw,
        rate: f64,
        sigma: f64,
        rho: f64,
    ) -> Result<Self> {
        if !(d_omega > 0.0 && d_a > 0.0) {
            return Err(precondition("ellipse semi-axes must be positive"));
        }
        if !(rho > 0.0) || !(sigma > 0.0 && sigma <= 1.0) {
            return Err(precondition("need rho > 0 and 0 < sigma <= 1"));
        }
        if rate == 0.0 || !rate.is_finite() {
            return Err(precondition("sweep rate must be non-zero and finite"));
        }
        let alpha = if rate > 0.0 { 0.0 } else { core::f64::consts::PI };
        Ok(Self {
            omega_n,
            a_n,
            d_omega,
            d_a,
            alpha,
            law,
            rate,
            sigma,
            rho,
        })
    }

    /// `(ω, a*)` on the ellipse at anomaly `alpha`.
    pub fn point(&self, alpha: f64) -> (f64, f64) {
        (self.omega_n + self.d_omega * alpha.cos(), self.a_n + self.d_a * alpha.sin())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcbcSettings {
    pub f_star: f64,
    pub kd: f64,
    pub h: usize,
    /// LMS step per sample.
    pub mu: f64,
    pub d_omega: f64,
    pub d_a: f64,
    pub law: SweepLaw,
    /// `r_α` or `k_α` depending on the law.
    pub rate: f64,
    pub sigma: f64,
    pub rho: f64,
    /// Wait after every change of the target, in excitation periods.
    pub t_steady: f64,
    pub measure_periods: usize,
    /// Cap on one correction, in excitation periods.
    pub max_correction_periods: usize,
    pub steps_per_period: usize,
    pub omega_range: (f64, f64),
    pub n_points: usize,
    pub max_retries: usize,
}

impl Default for AcbcSettings {
    fn default() -> Self {
        Self {
            f_star: 0.05,
            kd: 1.0,
            h: 15,
            mu: 0.0025,
            d_omega: 0.05,
            d_a: 0.05,
            law: SweepLaw::Integral,
            rate: 1.0,
            sigma: 0.5,
            rho: 0.01,
            t_steady: 50.0,
            measure_periods: 5,
            max_correction_periods: 5000,
            steps_per_period: 1000,
            omega_range: (0.4, 1.2),
            n_points: 400,
            max_retries: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcbcStart {
    pub omega: f64,
    pub a_star: f64,
}

/// Closed loop with adaptive reference harmonics and an adaptive estimate
/// of the realised forcing.
struct Loop<'a> {
    rig: Rig,
    s: &'a AcbcSettings,
    reference: ReferenceSignal,
    lms_x: LmsFilter,
    lms_u: LmsFilter,
    count: usize,
}

impl Loop<'_> {
    fn set_target(&mut self, omega: f64, a_star: f64) -> Result<()> {
        self.rig.set_omega(omega)?;
        self.reference.omega = omega;
        self.reference.a_star = a_star;
        self.lms_x.omega = omega;
        self.lms_u.omega = omega;
        Ok(())
    }

    fn force_estimate(&self) -> f64 {
        let w = &self.lms_u.weights;
        (w.sin(1) * w.sin(1) + w.cos(1) * w.cos(1)).sqrt()
    }

    /// One controller sample; returns the applied drive.
    fn sample(&mut self) -> Result<f64> {
        let ph = self.rig.phase();
        let sen = self.rig.sensed();
        let dt = self.rig.dt();
        self.lms_x.mu = self.s.mu / dt;
        self.lms_x.update_at_phase(sen.q, ph, dt);
        // Refreshing the reference harmonics every sample couples them
        // through the velocity feedback; once per period keeps them steady.
        if self.count % self.s.steps_per_period == 0 {
            self.reference.set_nonfundamental(&self.lms_x.weights);
        }
        self.count += 1;
        let u = differential_control(self.reference.rate_at_phase(ph), sen.v, self.s.kd);
        self.lms_u.mu = self.s.mu / dt;
        self.lms_u.update_at_phase(u, ph, dt);
        self.rig.step_held(u)?;
        Ok(u)
    }

    fn samples(&self, periods: f64) -> usize {
        (periods * self.s.steps_per_period as f64).ceil() as usize
    }

    fn wait(&mut self, periods: f64) -> Result<()> {
        for _ in 0..self.samples(periods) {
            self.sample()?;
        }
        Ok(())
    }

    fn measure(&mut self) -> Result<Record> {
        let mut rec = Record::default();
        for _ in 0..self.s.measure_periods * self.s.steps_per_period {
            let (ph, sen) = (self.rig.phase(), self.rig.sensed());
            let u = self.sample()?;
            rec.push(ph, sen, u);
        }
        Ok(rec)
    }

    /// Sweeps α until the force estimate is within `σρf*`. Returns false when
    /// the correction time cap is hit.
    fn correct(&mut self, ell: &mut EllipseState, rate: f64) -> Result<bool> {
        let f_star = self.s.f_star;
        let band = ell.sigma * ell.rho * f_star;
        let alpha0 = ell.alpha;
        for _ in 0..self.s.max_correction_periods * self.s.steps_per_period {
            let err = self.force_estimate() - f_star;
            if err.abs() <= band {
                return Ok(true);
            }
            ell.alpha += sweep_law(ell.law, rate, err) * self.rig.dt();
            let swept = ell.alpha - alpha0;
            if swept.abs() > 2.0 * core::f64::consts::PI {
                return Err(Error::NoIntersection { swept });
            }
            let (w, a) = ell.point(ell.alpha);
            self.set_target(w, a)?;
            self.sample()?;
        }
        Ok(false)
    }

    fn point(&self, rec: &Record) -> BranchPoint {
        let h = self.s.h;
        let w = rec.response(h);
        let mut bp = BranchPoint::new(self.rig.omega(), w.clone(), rec.drive(h), rec.peak());
        bp.a_star = Some(self.reference.a_star);
        bp.invasiveness = Some(invasiveness(&self.reference, &w));
        bp.wall_time = self.rig.elapsed();
        bp
    }
}

fn check(s: &AcbcSettings, start: &AcbcStart) -> Result<()> {
    if !(s.f_star > 0.0 && s.kd > 0.0 && s.mu > 0.0) || s.h < 2 {
        return Err(precondition("need f_star, kd, mu > 0 and h >= 2"));
    }
    if !(s.t_steady >= 0.0) || s.measure_periods == 0 || s.steps_per_period < 8 {
        return Err(precondition("need t_steady >= 0, measured periods and >= 8 samples per period"));
    }
    let (lo, hi) = s.omega_range;
    if !(lo > 0.0 && lo < hi) || !(start.omega >= lo && start.omega <= hi) || !(start.a_star > 0.0) {
        return Err(precondition("start must lie inside a positive frequency range"));
    }
    Ok(())
}

/// Arclength continuation without derivatives: every new point is the
/// intersection of the force level `f*` with a small ellipse around the
/// previous one, found by sweeping the ellipse's eccentric anomaly.
pub fn acbc(plant: Plant, s: &AcbcSettings, start: &AcbcStart) -> Result<Branch> {
    check(s, start)?;
    let mut ell = EllipseState::new(start.omega, start.a_star, s.d_omega, s.d_a, s.law, s.rate, s.sigma, s.rho)?;
    let h = s.h;
    let rig = Rig::new(plant, start.omega, s.steps_per_period)?;
    let mut lp = Loop {
        rig,
        s,
        reference: ReferenceSignal::tonal(start.omega, start.a_star, h),
        lms_x: LmsFilter::new(h, 0.0, start.omega),
        lms_u: LmsFilter::new(h, 0.0, start.omega),
        count: 0,
    };
    let mut branch = Branch::new(MethodId::Acbc);
    let tol = s.rho * s.f_star;

    // Start: scale the target amplitude until the realised force matches.
    let mut a = start.a_star;
    let mut first = None;
    for _ in 0..=s.max_retries * 4 {
        lp.set_target(start.omega, a)?;
        lp.wait(s.t_steady)?;
        let rec = lp.measure()?;
        let bp = lp.point(&rec);
        let f = bp.f_meas();
        if (f - s.f_star).abs() <= tol {
            first = Some(bp);
            break;
        }
        if !(f > 0.0) {
            break;
        }
        a *= s.f_star / f;
    }
    let Some(bp) = first else {
        branch
            .diagnostics
            .push("start point did not reach the force level".to_string());
        return Ok(branch);
    };
    branch.points.push(bp);
    ell.omega_n = start.omega;
    ell.a_n = a;

    let (lo, hi) = s.omega_range;
    while branch.points.len() < s.n_points {
        let (w, a) = ell.point(ell.alpha);
        lp.set_target(w, a)?;
        lp.wait(s.t_steady)?;
        let mut rate = s.rate;
        let mut accepted = None;
        let mut last = None;
        for _ in 0..=s.max_retries {
            match lp.correct(&mut ell, rate) {
                Ok(_) => {}
                Err(Error::NoIntersection { swept }) => {
                    branch.diagnostics.push(format!(
                        "no intersection with the force level around omega={:.5}, a*={:.5} (swept {swept:.3} rad)",
                        ell.omega_n, ell.a_n
                    ));
                    return Ok(branch);
                }
                Err(e) => return Err(e),
            }
            lp.wait(s.t_steady)?;
            let rec = lp.measure()?;
            let bp = lp.point(&rec);
            if (bp.f_meas() - s.f_star).abs() <= tol {
                accepted = Some(bp);
                break;
            }
            last = Some(bp);
            rate *= 0.5;
        }
        let bp = match accepted {
            Some(bp) => bp,
            None => {
                let mut bp = last.expect("at least one correction");
                bp.converged = false;
                branch.diagnostics.push(format!(
                    "force tolerance not met at omega={:.5} after {} retries",
                    bp.omega, s.max_retries
                ));
                branch.points.push(bp);
                break;
            }
        };
        let (w, a) = ell.point(ell.alpha);
        ell.omega_n = w;
        ell.a_n = a;
        let out = !(w >= lo && w <= hi);
        branch.points.push(bp);
        if out {
            break;
        }
    }
    Ok(branch)
}
