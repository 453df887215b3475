use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::floquet::{floquet_multipliers, Floquet};
use super::residual::{linearize, Aft, HbmProblem, Linearization};
use crate::error::{precondition, Error, Result};
use crate::fourier::HarmonicVector;
use crate::linalg::{dot, norm2, norm_inf, Matrix};

/// Which scalar the branch is parametrised by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Frequency,
    ForcingAmplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    Tangent,
    Secant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corrector {
    Natural,
    PseudoArclength,
    ArclengthSphere,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSettings {
    pub step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub predictor: Predictor,
    pub corrector: Corrector,
    pub max_points: usize,
    /// Integration steps per period for the Floquet analysis; 0 skips it.
    pub floquet_steps: usize,
    /// Velocity feedback gain used for closed-loop stability.
    pub kd: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            step: 0.02,
            min_step: 1e-6,
            max_step: 0.05,
            newton_tol: 1e-9,
            newton_max_iter: 25,
            predictor: Predictor::Tangent,
            corrector: Corrector::PseudoArclength,
            max_points: 5000,
            floquet_steps: 1000,
            kd: 0.0,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_step > 0.0 && self.min_step <= self.step && self.step <= self.max_step) {
            return Err(precondition("need 0 < min_step <= step <= max_step"));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(precondition("newton tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// One solution on an harmonic balance branch.
#[derive(Debug, Clone, PartialEq)]
pub struct HbmPoint {
    pub coeffs: HarmonicVector,
    pub omega: f64,
    pub forcing: f64,
    pub multipliers: Option<[Complex64; 2]>,
    pub stable: Option<bool>,
    pub iterations: usize,
    /// Parameter component of the unit tangent in scaled coordinates.
    pub dparam_ds: f64,
}

impl HbmPoint {
    pub fn amplitude(&self) -> f64 {
        let (a, _) = self.coeffs.amp_phase(1).unwrap_or((0.0, 0.0));
        a
    }

    /// Peak `|q|` over a period from 512 synthesized samples.
    pub fn total_amplitude(&self) -> f64 {
        let n = 512;
        (0..n)
            .map(|i| {
                self.coeffs
                    .eval(2.0 * core::f64::consts::PI * i as f64 / n as f64)
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// `det(I − Φ(T))`; changes sign exactly when a real multiplier crosses +1.
    pub fn fold_indicator(&self) -> Option<f64> {
        let m = self.multipliers?;
        Some(((1.0 - m[0]) * (1.0 - m[1])).re)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbmBranch {
    pub parameter: Parameter,
    pub points: Vec<HbmPoint>,
    /// Indices `i` such that the parameter turns between points `i-1` and `i`.
    pub folds: Vec<usize>,
    /// Indices where a real multiplier crosses +1 away from any fold.
    pub branch_points: Vec<usize>,
    pub diagnostics: Vec<String>,
    pub truncated: Option<Error>,
}

/// Constraint closing the augmented Newton system.
#[derive(Debug, Clone, Copy)]
pub enum Constraint<'a> {
    /// Parameter held at its current value.
    Fixed,
    /// `tᵀ(y − y_pred) = 0` in scaled coordinates.
    Hyperplane { tangent: &'a [f64], pred: &'a [f64] },
    /// `|y − center|² = radius²` in scaled coordinates.
    Sphere { center: &'a [f64], radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Corrected {
    pub coeffs: Vec<f64>,
    pub param: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Scaling between physical unknowns and the coordinates where steps and
/// tangents are measured.
#[derive(Debug, Clone, Copy)]
struct Scale {
    x: f64,
    param: f64,
}

struct Engine<'a> {
    problem: &'a HbmProblem,
    aft: Aft,
    parameter: Parameter,
    /// The parameter that is not continued.
    fixed: f64,
    scale: Scale,
    force_unit: f64,
}

impl<'a> Engine<'a> {
    fn eval(&self, x: &[f64], param: f64) -> Result<Linearization> {
        let (w, f) = self.split(param);
        linearize(&self.aft, x, w, f, self.problem)
    }

    fn split(&self, param: f64) -> (f64, f64) {
        match self.parameter {
            Parameter::Frequency => (param, self.fixed),
            Parameter::ForcingAmplitude => (self.fixed, param),
        }
    }

    fn d_param<'b>(&self, lin: &'b Linearization) -> &'b [f64] {
        match self.parameter {
            Parameter::Frequency => &lin.d_omega,
            Parameter::ForcingAmplitude => &lin.d_forcing,
        }
    }

    fn to_scaled(&self, x: &[f64], param: f64) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| v / self.scale.x).collect();
        y.push(param / self.scale.param);
        y
    }

    fn from_scaled(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let n = y.len() - 1;
        (
            y[..n].iter().map(|v| v * self.scale.x).collect(),
            y[n] * self.scale.param,
        )
    }

    /// Scaled Jacobian `[J_x·sx | J_p·sp]`, `n x (n+1)`.
    fn scaled_jacobian(&self, lin: &Linearization) -> Matrix {
        let n = lin.residual.len();
        let dp = self.d_param(lin);
        let mut a = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = lin.d_coeffs[(i, j)] * self.scale.x;
            }
            a[(i, n)] = dp[i] * self.scale.param;
        }
        a
    }

    fn residual_norm(&self, lin: &Linearization) -> f64 {
        norm_inf(&lin.residual) / self.force_unit
    }

    fn correct(
        &self,
        x0: &[f64],
        p0: f64,
        constraint: Constraint<'_>,
        tol: f64,
        max_iter: usize,
    ) -> Result<Corrected> {
        let n = x0.len();
        let mut y = self.to_scaled(x0, p0);
        let mut last = f64::INFINITY;
        for it in 0..=max_iter {
            let (x, p) = self.from_scaled(&y);
            let lin = self.eval(&x, p)?;
            let rnorm = self.residual_norm(&lin);
            let cval = match constraint {
                Constraint::Fixed => 0.0,
                Constraint::Hyperplane { tangent, pred } => {
                    tangent.iter().zip(y.iter().zip(pred)).map(|(t, (a, b))| t * (a - b)).sum()
                }
                Constraint::Sphere { center, radius } => {
                    let d: f64 = y.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d - radius * radius) / (2.0 * radius.max(1e-300))
                }
            };
            last = rnorm;
            if !rnorm.is_finite() {
                break;
            }
            if rnorm < tol && cval.abs() < tol {
                return Ok(Corrected {
                    coeffs: x,
                    param: p,
                    iterations: it,
                    residual: rnorm,
                });
            }
            if it == max_iter {
                break;
            }
            let dy = match constraint {
                Constraint::Fixed => {
                    let mut jx = Matrix::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            jx[(i, j)] = lin.d_coeffs[(i, j)] * self.scale.x;
                        }
                    }
                    let rhs: Vec<f64> = lin.residual.iter().map(|v| -v).collect();
                    let mut d = jx.solve(&rhs)?;
                    d.push(0.0);
                    d
                }
                Constraint::Hyperplane { tangent, .. } => {
                    let mut a = self.scaled_jacobian(&lin);
                    a.row_mut(n).copy_from_slice(tangent);
                    let mut rhs: Vec<f64> = lin.residual.iter().map(|v| -v).collect();
                    rhs.push(-cval);
                    a.solve(&rhs)?
                }
                Constraint::Sphere { center, radius } => {
                    let mut a = self.scaled_jacobian(&lin);
                    for j in 0..=n {
                        a[(n, j)] = (y[j] - center[j]) / radius;
                    }
                    let mut rhs: Vec<f64> = lin.residual.iter().map(|v| -v).collect();
                    rhs.push(-cval);
                    a.solve(&rhs)?
                }
            };
            for (yi, di) in y.iter_mut().zip(&dy) {
                *yi += di;
            }
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: last,
        })
    }

    /// Unit null vector of the scaled Jacobian, oriented along `reference`.
    fn tangent(&self, lin: &Linearization, reference: &[f64]) -> Result<Vec<f64>> {
        let n = lin.residual.len();
        let mut a = self.scaled_jacobian(lin);
        a.row_mut(n).copy_from_slice(reference);
        let mut rhs = vec![0.0; n + 1];
        rhs[n] = 1.0;
        let mut t = a.solve(&rhs)?;
        let nrm = norm2(&t);
        t.iter_mut().for_each(|v| *v /= nrm);
        if dot(&t, reference) < 0.0 {
            t.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(t)
    }
}

/// Newton correction of `initial` under `constraint`.
///
/// `param` is the frequency or forcing amplitude according to `parameter`;
/// the other one is taken from the problem (forcing) or `fixed_omega`.
pub fn newton_correct(
    problem: &HbmProblem,
    initial: &HarmonicVector,
    omega: f64,
    settings: &ContinuationSettings,
) -> Result<HbmPoint> {
    let eng = engine(problem, Parameter::Frequency, omega);
    let c = eng.correct(
        initial.as_slice(),
        omega,
        Constraint::Fixed,
        settings.newton_tol,
        settings.newton_max_iter,
    )?;
    let mut pt = HbmPoint {
        coeffs: HarmonicVector::from_coeffs(problem.h, c.coeffs)?,
        omega,
        forcing: problem.forcing_amp,
        multipliers: None,
        stable: None,
        iterations: c.iterations,
        dparam_ds: 0.0,
    };
    attach_stability(problem, settings, &mut pt);
    Ok(pt)
}

/// Newton correction with an explicit constraint, for callers that manage
/// their own predictor. Coordinates of the constraint are scaled as in
/// [`continue_branch`].
pub fn newton_correct_constrained(
    problem: &HbmProblem,
    parameter: Parameter,
    initial: &HarmonicVector,
    param: f64,
    fixed: f64,
    constraint: Constraint<'_>,
    settings: &ContinuationSettings,
) -> Result<Corrected> {
    let mut eng = engine(problem, parameter, param);
    eng.fixed = fixed;
    eng.correct(
        initial.as_slice(),
        param,
        constraint,
        settings.newton_tol,
        settings.newton_max_iter,
    )
}

fn engine(problem: &HbmProblem, parameter: Parameter, param: f64) -> Engine<'_> {
    let scale = Scale {
        x: problem.plant.displacement_unit(),
        param: match parameter {
            Parameter::Frequency => problem.plant.omega0(),
            Parameter::ForcingAmplitude => problem.force_unit(),
        },
    };
    let fixed = match parameter {
        Parameter::Frequency => problem.forcing_amp,
        Parameter::ForcingAmplitude => param,
    };
    Engine {
        problem,
        aft: problem.aft(),
        parameter,
        fixed,
        scale,
        force_unit: problem.force_unit(),
    }
}

fn attach_stability(problem: &HbmProblem, settings: &ContinuationSettings, pt: &mut HbmPoint) {
    if settings.floquet_steps == 0 {
        return;
    }
    if let Ok(Floquet { multipliers, stable }) = floquet_multipliers(
        &pt.coeffs,
        pt.omega,
        &problem.plant,
        settings.kd,
        settings.floquet_steps,
    ) {
        pt.multipliers = Some(multipliers);
        pt.stable = Some(stable);
    }
}

/// Traces a branch from a converged start until the continued parameter
/// leaves `range`, the point budget is spent or the step underflows.
///
/// For [`Parameter::ForcingAmplitude`] the frequency is held at `start_omega`.
pub fn continue_branch(
    problem: &HbmProblem,
    parameter: Parameter,
    settings: &ContinuationSettings,
    start: &HarmonicVector,
    start_omega: f64,
    range: (f64, f64),
) -> Result<HbmBranch> {
    settings.validate()?;
    if start.len() != problem.dim() {
        return Err(precondition("start vector length must be 2h+1"));
    }
    let (lo, hi) = (range.0.min(range.1), range.0.max(range.1));
    let p_start = match parameter {
        Parameter::Frequency => start_omega,
        Parameter::ForcingAmplitude => problem.forcing_amp,
    };
    let mut eng = engine(problem, parameter, p_start);
    if parameter == Parameter::ForcingAmplitude {
        eng.fixed = start_omega;
    }
    let tol = settings.newton_tol;
    let max_it = settings.newton_max_iter;

    let first = eng.correct(start.as_slice(), p_start, Constraint::Fixed, tol, max_it)?;
    let n = problem.dim();
    let mut e_param = vec![0.0; n + 1];
    e_param[n] = 1.0;
    let lin = eng.eval(&first.coeffs, first.param)?;
    let mut tangent = eng.tangent(&lin, &e_param)?;

    let mut branch = HbmBranch {
        parameter,
        points: Vec::new(),
        folds: Vec::new(),
        branch_points: Vec::new(),
        diagnostics: Vec::new(),
        truncated: None,
    };
    let make_point = |eng: &Engine<'_>, c: &Corrected, t: &[f64]| -> Result<HbmPoint> {
        let (w, f) = eng.split(c.param);
        let mut pt = HbmPoint {
            coeffs: HarmonicVector::from_coeffs(problem.h, c.coeffs.clone())?,
            omega: w,
            forcing: f,
            multipliers: None,
            stable: None,
            iterations: c.iterations,
            dparam_ds: t[n],
        };
        attach_stability(problem, settings, &mut pt);
        Ok(pt)
    };
    branch.points.push(make_point(&eng, &first, &tangent)?);

    let mut y_prev = eng.to_scaled(&first.coeffs, first.param);
    let mut y_prev2: Option<Vec<f64>> = None;
    let mut step = settings.step;

    while branch.points.len() < settings.max_points {
        let p_now = y_prev[n] * eng.scale.param;
        if p_now > hi || p_now < lo {
            break;
        }
        let dir: Vec<f64> = match (settings.predictor, &y_prev2) {
            (Predictor::Secant, Some(y2)) => {
                let mut d: Vec<f64> = y_prev.iter().zip(y2).map(|(a, b)| a - b).collect();
                let nd = norm2(&d);
                d.iter_mut().for_each(|v| *v /= nd);
                if dot(&d, &tangent) < 0.0 {
                    d.iter_mut().for_each(|v| *v = -*v);
                }
                d
            }
            _ => tangent.clone(),
        };
        let attempt = match settings.corrector {
            Corrector::Natural => {
                let sign = if tangent[n] >= 0.0 { 1.0 } else { -1.0 };
                let mut pred = y_prev.clone();
                pred[n] += sign * step;
                let (x, p) = eng.from_scaled(&pred);
                eng.correct(&x, p, Constraint::Fixed, tol, max_it)
            }
            Corrector::PseudoArclength => {
                let pred: Vec<f64> = y_prev.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                let (x, p) = eng.from_scaled(&pred);
                eng.correct(
                    &x,
                    p,
                    Constraint::Hyperplane {
                        tangent: &dir,
                        pred: &pred,
                    },
                    tol,
                    max_it,
                )
            }
            Corrector::ArclengthSphere => {
                let pred: Vec<f64> = y_prev.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                let (x, p) = eng.from_scaled(&pred);
                eng.correct(
                    &x,
                    p,
                    Constraint::Sphere {
                        center: &y_prev,
                        radius: step,
                    },
                    tol,
                    max_it,
                )
            }
        };
        let c = match attempt {
            Ok(c) => c,
            Err(_) => {
                step *= 0.5;
                if step < settings.min_step {
                    let p = y_prev[n] * eng.scale.param;
                    branch
                        .diagnostics
                        .push(format!("step underflow at parameter {p}"));
                    branch.truncated = Some(Error::StepUnderflow { step });
                    break;
                }
                continue;
            }
        };
        let y_new = eng.to_scaled(&c.coeffs, c.param);
        // Reject corrections that jumped backwards along the branch.
        let moved: Vec<f64> = y_new.iter().zip(&y_prev).map(|(a, b)| a - b).collect();
        if settings.corrector != Corrector::Natural && dot(&moved, &tangent) <= 0.0 {
            step *= 0.5;
            if step < settings.min_step {
                branch.truncated = Some(Error::StepUnderflow { step });
                break;
            }
            continue;
        }
        let lin = eng.eval(&c.coeffs, c.param)?;
        let t_new = match eng.tangent(&lin, &tangent) {
            Ok(t) => t,
            Err(e) => {
                branch.diagnostics.push(format!("tangent failed: {e}"));
                branch.truncated = Some(e);
                break;
            }
        };
        let pt = make_point(&eng, &c, &t_new)?;
        let idx = branch.points.len();
        if tangent[n] * t_new[n] < 0.0 {
            branch.folds.push(idx);
        }
        branch.points.push(pt);
        y_prev2 = Some(core::mem::replace(&mut y_prev, y_new));
        tangent = t_new;
        if c.iterations <= 3 {
            step = (step * 1.2).min(settings.max_step);
        }
        step = step.max(settings.min_step);
    }
    detect_branch_points(&mut branch);
    Ok(branch)
}

fn detect_branch_points(branch: &mut HbmBranch) {
    let ind: Vec<Option<f64>> = branch.points.iter().map(|p| p.fold_indicator()).collect();
    for i in 1..ind.len() {
        let (Some(a), Some(b)) = (ind[i - 1], ind[i]) else {
            continue;
        };
        if a * b < 0.0 && !branch.folds.iter().any(|&f| f + 1 >= i && f <= i + 1) {
            branch.branch_points.push(i);
            let w = branch.points[i].omega;
            branch
                .diagnostics
                .push(format!("multiplier crosses +1 without a fold near omega {w}"));
        }
    }
}

/// Checks that every fold has a real multiplier crossing +1 within one step.
pub fn folds_match_multipliers(branch: &HbmBranch) -> bool {
    let ind = |k: usize| branch.points.get(k).and_then(|p| p.fold_indicator());
    branch.folds.iter().all(|&f| {
        (f.saturating_sub(2)..=f).any(|i| match (ind(i), ind(i + 1)) {
            (Some(a), Some(b)) => a * b <= 0.0,
            _ => false,
        })
    })
}
