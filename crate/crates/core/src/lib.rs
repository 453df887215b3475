//! Numerical core of a virtual experimental-continuation workbench.
//!
//! Simulated Duffing-family oscillators are driven as black boxes by the
//! classic open-loop and control-based testing procedures (swept and stepped
//! sine, CBC with finite differences, simplified CBC, phase-locked loops,
//! response-controlled stepped sine and arclength CBC). A harmonic balance
//! continuation engine with Floquet stability and a brute-force time
//! integration oracle provide the references the experiments are judged
//! against.
//!
//! The crate is `no_std` and only needs an allocator; file formats, the run
//! configuration and the command line live in the `contlab` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod control;
pub mod error;
pub mod fourier;
pub mod hbm;
pub mod linalg;
pub mod methods;
pub mod ode;
pub mod oracle;
pub mod plant;
pub mod postprocess;

pub use error::{Error, Result};
pub use fourier::HarmonicVector;
pub use plant::{DuffingParams, NoiseModel, Plant};
