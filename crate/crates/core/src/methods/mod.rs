//! Testing and continuation procedures run against a black-box plant.

use alloc::string::String;
use alloc::vec::Vec;

use crate::control::InvasivenessReport;
use crate::fourier::{phase_lag, HarmonicVector};
use crate::hbm::{HbmBranch, HbmProblem};

pub mod acbc;
pub mod cbc_fd;
pub mod pll;
pub mod rct;
pub mod rig;
pub mod scbc;
pub mod sts;
pub mod sws;

pub use acbc::{acbc, sweep_law, AcbcSettings, AcbcStart, EllipseState, SweepLaw};
pub use cbc_fd::{cbc_fd, CbcFdSettings};
pub use pll::{pll, PllSchedule, PllSettings};
pub use rct::{rct, RctSettings};
pub use rig::{Record, Rig};
pub use scbc::{scbc, scbc_surface, ScbcSettings, ScbcVariant};
pub use sts::{stepped_sine, SteppedAxis, SteppedSettings};
pub use sws::{largest_jump, swept_sine, Jump, SweepSettings, SweepSpacing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodId {
    Hbm,
    Sws,
    Sts,
    CbcFd,
    Scbc,
    Pll,
    Rct,
    Acbc,
}

impl MethodId {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Hbm => "hbm",
            MethodId::Sws => "sws",
            MethodId::Sts => "sts",
            MethodId::CbcFd => "cbc-fd",
            MethodId::Scbc => "scbc",
            MethodId::Pll => "pll",
            MethodId::Rct => "rct",
            MethodId::Acbc => "acbc",
        }
    }
}

/// One measured (or computed) periodic response.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub omega: f64,
    pub a_star: Option<f64>,
    pub response: HarmonicVector,
    pub forcing: HarmonicVector,
    /// Lag of the response fundamental behind the forcing fundamental.
    pub phase_lag: f64,
    pub total_amp: f64,
    pub invasiveness: Option<InvasivenessReport>,
    pub converged: bool,
    pub open_loop_stable: Option<bool>,
    /// Simulated seconds since the start of the run.
    pub wall_time: f64,
}

impl BranchPoint {
    pub fn new(omega: f64, response: HarmonicVector, forcing: HarmonicVector, total_amp: f64) -> Self {
        let (_, tr) = response.amp_phase(1).unwrap_or((0.0, 0.0));
        let (_, tf) = forcing.amp_phase(1).unwrap_or((0.0, 0.0));
        Self {
            omega,
            a_star: None,
            response,
            forcing,
            phase_lag: phase_lag(tr, tf),
            total_amp,
            invasiveness: None,
            converged: true,
            open_loop_stable: None,
            wall_time: 0.0,
        }
    }

    /// Fundamental response amplitude.
    pub fn a1(&self) -> f64 {
        self.response.amp_phase(1).map(|(a, _)| a).unwrap_or(0.0)
    }

    /// Fundamental forcing amplitude.
    pub fn f_meas(&self) -> f64 {
        self.forcing.amp_phase(1).map(|(a, _)| a).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub method: MethodId,
    pub points: Vec<BranchPoint>,
    pub diagnostics: Vec<String>,
    /// Digest of the run configuration, filled in by the caller.
    pub digest: String,
}

impl Branch {
    pub fn new(method: MethodId) -> Self {
        Self {
            method,
            points: Vec::new(),
            diagnostics: Vec::new(),
            digest: String::new(),
        }
    }

    pub fn flagged(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }

    /// Harmonic balance branch expressed as measured points.
    pub fn from_hbm(branch: &HbmBranch, problem: &HbmProblem) -> Self {
        let mut out = Branch::new(MethodId::Hbm);
        for p in &branch.points {
            let mut forcing = problem.forcing_shape.clone();
            for c in forcing.as_mut_slice() {
                *c *= p.forcing;
            }
            let mut bp = BranchPoint::new(p.omega, p.coeffs.clone(), forcing, p.total_amplitude());
            bp.open_loop_stable = p.stable;
            out.points.push(bp);
        }
        out.diagnostics = branch.diagnostics.clone();
        out
    }
}
