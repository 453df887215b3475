use core::f64::consts::PI;
use num_complex::Complex64;

use crate::error::{precondition, Error, Result};
use crate::fourier::HarmonicVector;
use crate::linalg::eig2;
use crate::ode::rk4_step;
use crate::plant::DuffingParams;

/// Multipliers with modulus up to `1 + STABILITY_MARGIN` count as stable.
pub const STABILITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floquet {
    pub multipliers: [Complex64; 2],
    pub stable: bool,
}

/// Monodromy matrix of the variational equation around the orbit
/// synthesized from `coeffs`, with optional velocity feedback `kd`.
pub fn monodromy(
    coeffs: &HarmonicVector,
    omega: f64,
    plant: &DuffingParams,
    kd: f64,
    steps: usize,
) -> Result<[[f64; 2]; 2]> {
    if !(omega > 0.0) || steps == 0 {
        return Err(precondition("monodromy needs omega > 0 and at least one step"));
    }
    let dt = 2.0 * PI / omega / steps as f64;
    let damp = (plant.c + kd) / plant.m;
    let rhs = |t: f64, y: &[f64; 4]| {
        let q = coeffs.eval(omega * t);
        let a21 = -plant.tangent_stiffness(q) / plant.m;
        [y[1], a21 * y[0] - damp * y[1], y[3], a21 * y[2] - damp * y[3]]
    };
    let mut y = [1.0, 0.0, 0.0, 1.0];
    for i in 0..steps {
        y = rk4_step(rhs, i as f64 * dt, &y, dt);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                t: i as f64 * dt,
                q: y[0],
                v: y[1],
            });
        }
    }
    Ok([[y[0], y[2]], [y[1], y[3]]])
}

pub fn floquet_multipliers(
    coeffs: &HarmonicVector,
    omega: f64,
    plant: &DuffingParams,
    kd: f64,
    steps: usize,
) -> Result<Floquet> {
    let phi = monodromy(coeffs, omega, plant, kd, steps)?;
    let multipliers = eig2(phi);
    let stable = multipliers
        .iter()
        .all(|z| z.norm() <= 1.0 + STABILITY_MARGIN);
    Ok(Floquet {
        multipliers,
        stable,
    })
}
