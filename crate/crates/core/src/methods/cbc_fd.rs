use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Branch, BranchPoint, MethodId, Record, Rig};
use crate::control::{
    control_off_stability_probe, differential_control, invasiveness, ClosedLoopPoint, ProbeSettings, ProbeVerdict,
    ReferenceSignal,
};
use crate::error::{precondition, Result};
use crate::fourier::HarmonicVector;
use crate::linalg::{dot, norm2, norm_inf, Matrix};
use crate::plant::Plant;

#[derive(Debug, Clone, PartialEq)]
pub struct CbcFdSettings {
    pub f_star: f64,
    pub kd: f64,
    /// Harmonics in the reference and in the forcing residual.
    pub h: usize,
    pub omega_start: f64,
    pub omega_end: f64,
    /// Arclength step in scaled coordinates.
    pub step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Force residual tolerance relative to `f_star`.
    pub tol_b: f64,
    pub newton_max_iter: usize,
    /// Finite-difference step relative to the unknown, with an absolute
    /// floor, both in scaled coordinates.
    pub fd_rel: f64,
    pub fd_abs: f64,
    pub settle_periods: usize,
    pub measure_periods: usize,
    pub max_points: usize,
    pub steps_per_period: usize,
    pub probe: Option<ProbeSettings>,
}

impl Default for CbcFdSettings {
    fn default() -> Self {
        Self {
            f_star: 1.0,
            kd: 1.0,
            h: 3,
            omega_start: 0.5,
            omega_end: 2.0,
            step: 0.05,
            min_step: 1e-3,
            max_step: 0.2,
            tol_b: 1e-3,
            newton_max_iter: 8,
            fd_rel: 1e-3,
            fd_abs: 1e-3,
            settle_periods: 30,
            measure_periods: 5,
            max_points: 200,
            steps_per_period: 1000,
            probe: None,
        }
    }
}

/// The closed-loop experiment seen as a map from (reference coefficients,
/// frequency) to forcing residual, all in scaled coordinates. The constant
/// coefficient is left out: velocity feedback cannot see it.
struct Experiment<'a> {
    rig: Rig,
    s: &'a CbcFdSettings,
    amp_scale: f64,
    omega_scale: f64,
}

impl Experiment<'_> {
    fn dim(&self) -> usize {
        2 * self.s.h
    }

    fn unscale(&self, y: &[f64]) -> (HarmonicVector, f64) {
        let n = self.dim();
        let mut w = vec![0.0];
        w.extend(y[..n].iter().map(|v| v * self.amp_scale));
        (HarmonicVector::from_coeffs(self.s.h, w).expect("length"), y[n] * self.omega_scale)
    }

    fn measure(&mut self, y: &[f64]) -> Result<(Vec<f64>, Record, ReferenceSignal)> {
        let (w, omega) = self.unscale(y);
        if !(omega > 0.0) {
            return Err(precondition("continuation left positive frequencies"));
        }
        self.rig.set_omega(omega)?;
        let reference = ReferenceSignal::new(omega, w.sin(1), w.cos(1), &w);
        let kd = self.s.kd;
        let rec = self.rig.hold_feedback(
            |ph, sen| differential_control(reference.rate_at_phase(ph), sen.v, kd),
            self.s.settle_periods + self.s.measure_periods,
            self.s.measure_periods,
        )?;
        let mut r = rec.drive(self.s.h).into_vec();
        r.remove(0);
        r[0] -= self.s.f_star;
        for v in &mut r {
            *v /= self.s.f_star;
        }
        Ok((r, rec, reference))
    }

    /// Forward-difference Jacobian around `y` with residual `r0`.
    fn jacobian(&mut self, y: &[f64], r0: &[f64]) -> Result<Matrix> {
        let n = self.dim();
        let mut jac = Matrix::zeros(n, n + 1);
        for j in 0..=n {
            let d = (self.s.fd_rel * y[j].abs()).max(self.s.fd_abs);
            let mut yp = y.to_vec();
            yp[j] += d;
            let (rp, _, _) = self.measure(&yp)?;
            for i in 0..n {
                jac[(i, j)] = (rp[i] - r0[i]) / d;
            }
        }
        Ok(jac)
    }
}

fn bordered(jac: &Matrix, row: &[f64]) -> Matrix {
    let n = jac.rows();
    let mut a = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        a.row_mut(i).copy_from_slice(jac.row(i));
    }
    a.row_mut(n).copy_from_slice(row);
    a
}

fn tangent(jac: &Matrix, prev: &[f64]) -> Result<Vec<f64>> {
    let n = jac.rows();
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let mut t = bordered(jac, prev).solve(&rhs)?;
    let nt = norm2(&t);
    for v in &mut t {
        *v /= nt;
    }
    if dot(&t, prev) < 0.0 {
        for v in &mut t {
            *v = -*v;
        }
    }
    Ok(t)
}

struct Converged {
    y: Vec<f64>,
    rec: Record,
    reference: ReferenceSignal,
    iterations: usize,
    jac: Matrix,
}

/// Chord Newton on `r(y) = 0, c·(y − y_pred) = 0` with the Jacobian taken
/// once at the prediction.
fn correct(ex: &mut Experiment, pred: &[f64], c: &[f64]) -> Result<Option<Converged>> {
    let mut y = pred.to_vec();
    let (mut r, mut rec, mut reference) = ex.measure(&y)?;
    let jac = ex.jacobian(&y, &r)?;
    let a = bordered(&jac, c);
    for it in 0..=ex.s.newton_max_iter {
        if norm_inf(&r) <= ex.s.tol_b {
            return Ok(Some(Converged {
                y,
                rec,
                reference,
                iterations: it,
                jac,
            }));
        }
        if it == ex.s.newton_max_iter {
            break;
        }
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let off: Vec<f64> = y.iter().zip(pred).map(|(a, b)| a - b).collect();
        rhs.push(-dot(c, &off));
        let dy = match a.solve(&rhs) {
            Ok(d) => d,
            Err(_) => return Ok(None),
        };
        for (yi, d) in y.iter_mut().zip(&dy) {
            *yi += d;
        }
        (r, rec, reference) = ex.measure(&y)?;
    }
    Ok(None)
}

/// Control-based continuation with finite-difference derivatives: the
/// reference coefficients and the frequency are continued so that the
/// realised forcing equals a pure sine of amplitude `f_star`.
pub fn cbc_fd(plant: Plant, s: &CbcFdSettings) -> Result<Branch> {
    if !(s.f_star > 0.0) || !(s.omega_start > 0.0 && s.omega_end > 0.0) || s.omega_start == s.omega_end {
        return Err(precondition("need f_star > 0 and two distinct positive frequencies"));
    }
    if !(s.min_step > 0.0 && s.min_step <= s.step && s.step <= s.max_step) || s.h == 0 {
        return Err(precondition("need 0 < min_step <= step <= max_step and h >= 1"));
    }
    let mut rig = Rig::new(plant, s.omega_start, s.steps_per_period)?;
    // Open-loop response at the start gives a non-invasive first reference.
    let rec = rig.hold_tonal(s.f_star, 4 * s.settle_periods, s.measure_periods)?;
    let w0 = rec.response(s.h);
    let amp_scale = w0.amp_phase(1)?.0.max(f64::MIN_POSITIVE);
    let mut ex = Experiment {
        rig,
        s,
        amp_scale,
        omega_scale: s.omega_start,
    };
    let n = ex.dim();
    let mut y: Vec<f64> = w0.as_slice()[1..].iter().map(|v| v / amp_scale).collect();
    y.push(1.0);
    let dir = if s.omega_end > s.omega_start { 1.0 } else { -1.0 };
    let mut t = vec![0.0; n + 1];
    t[n] = dir;
    let mut branch = Branch::new(MethodId::CbcFd);
    let mut first = match correct(&mut ex, &y, &t)? {
        Some(c) => c,
        None => {
            branch.diagnostics.push("no convergence at the start frequency".into());
            return Ok(branch);
        }
    };
    let (lo, hi) = if dir > 0.0 {
        (s.omega_start, s.omega_end)
    } else {
        (s.omega_end, s.omega_start)
    };
    let mut step = s.step;
    loop {
        let (_, omega) = ex.unscale(&first.y);
        let w = first.rec.response(s.h);
        let mut bp = BranchPoint::new(omega, w.clone(), first.rec.drive(s.h), first.rec.peak());
        bp.a_star = Some(first.reference.a_star);
        bp.invasiveness = Some(invasiveness(&first.reference, &w));
        if let Some(probe) = &s.probe {
            let point = ClosedLoopPoint {
                state: ex.rig.state(),
                phase: ex.rig.phase(),
                omega,
                forcing: bp.forcing.clone(),
                amplitude: bp.a1(),
            };
            let v = control_off_stability_probe(ex.rig.plant(), &point, probe)?;
            bp.open_loop_stable = Some(v == ProbeVerdict::OpenLoopStable);
        }
        bp.wall_time = ex.rig.elapsed();
        branch.points.push(bp);
        if omega < lo || omega > hi || branch.points.len() >= s.max_points {
            break;
        }
        t = tangent(&first.jac, &t)?;
        y = first.y.clone();
        let next = loop {
            let pred: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a + step * b).collect();
            if let Some(c) = correct(&mut ex, &pred, &t)? {
                break Some(c);
            }
            step *= 0.5;
            if step < s.min_step {
                break None;
            }
        };
        match next {
            Some(c) => {
                if c.iterations <= 3 {
                    step = (step * 1.2).min(s.max_step);
                }
                first = c;
            }
            None => {
                branch
                    .diagnostics
                    .push(format!("step underflow after {} points; branch truncated", branch.points.len()));
                break;
            }
        }
    }
    Ok(branch)
}
