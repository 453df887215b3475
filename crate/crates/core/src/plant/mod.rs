//! Simulated single-degree-of-freedom Duffing-family oscillators.
//!
//! The rest of the crate talks to a [`Plant`] only through a drive input and
//! the sensed displacement and velocity, the way a test rig sees a structure.

mod elliptic;

pub use elliptic::{ellip_j, ellip_k};

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{domain, precondition, Error, Result};
use crate::ode::rk4_step;

/// Coefficients of `m q'' + c q' + k q + k2 q² + k3 q³ = f(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuffingParams {
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub k2: f64,
    pub k3: f64,
}

/// Dimensionless damping ratio and quadratic coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessDuffing {
    pub zeta0: f64,
    pub beta2: f64,
}

/// Result of [`DuffingParams::nondimensionalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nondimensional {
    pub dimensionless: DimensionlessDuffing,
    /// Linear natural frequency `√(k/m)`.
    pub omega0: f64,
    /// Multiplies a physical displacement to give `q̄`.
    pub displacement_scale: f64,
    /// Multiplies a physical force amplitude to give `f̄`.
    pub force_scale: f64,
}

impl DuffingParams {
    pub fn new(m: f64, c: f64, k: f64, k2: f64, k3: f64) -> Result<Self> {
        let p = Self { m, c, k, k2, k3 };
        p.validate()?;
        Ok(p)
    }

    /// The unit-mass, unit-stiffness form `q'' + 2ζ0 q' + q + β2 q² + q³`.
    pub fn dimensionless(zeta0: f64, beta2: f64) -> Self {
        Self {
            m: 1.0,
            c: 2.0 * zeta0,
            k: 1.0,
            k2: beta2,
            k3: 1.0,
        }
    }

    pub fn linear(m: f64, c: f64, k: f64) -> Self {
        Self {
            m,
            c,
            k,
            k2: 0.0,
            k3: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.m, self.c, self.k, self.k2, self.k3];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(domain("plant coefficients must be finite"));
        }
        if self.m <= 0.0 || self.k <= 0.0 {
            return Err(domain("plant needs m > 0 and k > 0"));
        }
        Ok(())
    }

    #[inline]
    pub fn restoring(&self, q: f64) -> f64 {
        q * (self.k + q * (self.k2 + q * self.k3))
    }

    /// Tangent stiffness `k + 2 k2 q + 3 k3 q²`.
    #[inline]
    pub fn tangent_stiffness(&self, q: f64) -> f64 {
        self.k + q * (2.0 * self.k2 + 3.0 * self.k3 * q)
    }

    #[inline]
    pub fn rhs(&self, q: f64, v: f64, force: f64) -> (f64, f64) {
        (v, (force - self.c * v - self.restoring(q)) / self.m)
    }

    pub fn omega0(&self) -> f64 {
        (self.k / self.m).sqrt()
    }

    /// Physical size of a unit dimensionless displacement, `√(k/k3)`; 1 for
    /// plants without cubic stiffness.
    pub fn displacement_unit(&self) -> f64 {
        if self.k3 > 0.0 {
            (self.k / self.k3).sqrt()
        } else {
            1.0
        }
    }

    pub fn nondimensionalize(&self) -> Result<Nondimensional> {
        if !(self.m > 0.0 && self.k > 0.0 && self.k3 > 0.0) {
            return Err(domain("nondimensionalization needs m, k, k3 > 0"));
        }
        Ok(Nondimensional {
            dimensionless: DimensionlessDuffing {
                zeta0: self.c / (2.0 * (self.k * self.m).sqrt()),
                beta2: self.k2 / (self.k * self.k3).sqrt(),
            },
            omega0: self.omega0(),
            displacement_scale: (self.k3 / self.k).sqrt(),
            force_scale: (self.k3 / (self.k * self.k * self.k)).sqrt(),
        })
    }
}

/// Position, velocity and time of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub q: f64,
    pub v: f64,
    pub t: f64,
}

pub fn duffing_rhs(state: &PlantState, forcing: f64, params: &DuffingParams) -> (f64, f64) {
    params.rhs(state.q, state.v, forcing)
}

/// Unforced cubic oscillator response `A sn(Ωt | κ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeResponse {
    pub amplitude: f64,
    pub omega: f64,
    pub kappa: f64,
}

impl FreeResponse {
    pub fn sample(&self, t: f64) -> f64 {
        self.amplitude * ellip_j(self.omega * t, self.kappa).0
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let (_, cn, dn) = ellip_j(self.omega * t, self.kappa);
        self.amplitude * self.omega * cn * dn
    }

    pub fn period(&self) -> f64 {
        4.0 * ellip_k(self.kappa) / self.omega
    }
}

/// Exact solution of `q'' + ω0² q + α3 q³ = 0` with `q(0) = 0`, `q'(0) > 0`
/// and peak amplitude `A`.
pub fn exact_free_response(amplitude: f64, omega0: f64, alpha3: f64) -> Result<FreeResponse> {
    let omega_sq = omega0 * omega0 + 0.5 * alpha3 * amplitude * amplitude;
    if !(omega_sq > 0.0) {
        return Err(domain("free response needs ω0² + α3A²/2 > 0"));
    }
    let kappa = -alpha3 * amplitude * amplitude / (2.0 * omega_sq);
    if !(kappa < 1.0) {
        return Err(domain("elliptic parameter must stay below 1"));
    }
    Ok(FreeResponse {
        amplitude,
        omega: omega_sq.sqrt(),
        kappa,
    })
}

/// Additive Gaussian sensor noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    pub sensor_rms: f64,
    pub seed: u64,
}

/// Sensed outputs of one plant step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sensed {
    pub q: f64,
    pub v: f64,
}

/// Black-box oscillator advanced by fixed-step RK4.
#[derive(Debug, Clone)]
pub struct Plant {
    params: DuffingParams,
    state: PlantState,
    noise: Option<(Normal<f64>, ChaCha8Rng)>,
    bound: f64,
    velocity_gain: f64,
}

impl Plant {
    pub fn new(params: DuffingParams, noise: NoiseModel) -> Result<Self> {
        params.validate()?;
        if !(noise.sensor_rms >= 0.0) || !noise.sensor_rms.is_finite() {
            return Err(domain("noise rms must be finite and non-negative"));
        }
        let noise = if noise.sensor_rms > 0.0 {
            let dist = Normal::new(0.0, noise.sensor_rms).map_err(|_| domain("noise rms"))?;
            Some((dist, ChaCha8Rng::seed_from_u64(noise.seed)))
        } else {
            None
        };
        Ok(Self {
            params,
            state: PlantState::default(),
            noise,
            bound: 1e6 * params.displacement_unit(),
            velocity_gain: 1.0,
        })
    }

    pub fn noiseless(params: DuffingParams) -> Result<Self> {
        Self::new(params, NoiseModel::default())
    }

    /// Overrides the divergence bound on `|q|` and `|v|`.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = bound;
        self
    }

    /// Scales the sensed velocity, as the electronic analog's output stage does.
    pub fn with_velocity_gain(mut self, gain: f64) -> Self {
        self.velocity_gain = gain;
        self
    }

    pub fn params(&self) -> &DuffingParams {
        &self.params
    }

    pub fn state(&self) -> PlantState {
        self.state
    }

    pub fn set_state(&mut self, state: PlantState) {
        self.state = state;
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn velocity_gain(&self) -> f64 {
        self.velocity_gain
    }

    /// One step with the drive held constant over `dt`.
    pub fn step(&mut self, drive: f64, dt: f64) -> Result<Sensed> {
        self.step_with(|_| drive, dt)
    }

    /// One step with a drive evaluated at the integrator's stage times.
    pub fn step_with<F: FnMut(f64) -> f64>(&mut self, mut drive: F, dt: f64) -> Result<Sensed> {
        if !(dt > 0.0) {
            return Err(precondition("time step must be positive"));
        }
        let p = self.params;
        let s = self.state;
        let y = rk4_step(
            |t, y: &[f64; 2]| {
                let (dq, dv) = p.rhs(y[0], y[1], drive(t));
                [dq, dv]
            },
            s.t,
            &[s.q, s.v],
            dt,
        );
        let next = PlantState {
            q: y[0],
            v: y[1],
            t: s.t + dt,
        };
        if !(next.q.abs() <= self.bound && next.v.abs() <= self.bound) {
            return Err(Error::Divergence {
                t: s.t,
                q: s.q,
                v: s.v,
            });
        }
        self.state = next;
        Ok(self.sense())
    }

    fn sense(&mut self) -> Sensed {
        let (mut q, mut v) = (self.state.q, self.state.v);
        if let Some((dist, rng)) = self.noise.as_mut() {
            q += dist.sample(rng);
            v += dist.sample(rng);
        }
        Sensed {
            q,
            v: self.velocity_gain * v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::f64::consts::PI;

    #[test]
    fn rhs_examples() {
        let p = DuffingParams::new(1.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(p.rhs(0.0, 0.0, 0.0), (0.0, 0.0));
        assert_eq!(p.rhs(1.0, 0.0, 0.0), (0.0, -2.0));
        let t1 = DuffingParams::new(1e-4, 1.3e-4, 1.923, 0.0, 0.9887).unwrap();
        let (dq, dv) = duffing_rhs(
            &PlantState {
                q: 0.1,
                v: 0.0,
                t: 0.0,
            },
            0.0,
            &t1,
        );
        assert_eq!(dq, 0.0);
        let expect = -(1.923 * 0.1 + 0.9887 * 0.001) / 1e-4;
        assert!((dv - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(DuffingParams::new(0.0, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(DuffingParams::new(1.0, 0.0, -1.0, 0.0, 1.0).is_err());
        assert!(DuffingParams::new(1.0, f64::NAN, 1.0, 0.0, 1.0).is_err());
        let lin = DuffingParams::linear(1.0, 0.1, 1.0);
        assert!(lin.nondimensionalize().is_err());
    }

    #[test]
    fn nondimensional_examples() {
        let n = DuffingParams::new(1.0, 0.0, 1.0, 0.0, 1.0)
            .unwrap()
            .nondimensionalize()
            .unwrap();
        assert_eq!(n.dimensionless.zeta0, 0.0);
        assert_eq!(n.dimensionless.beta2, 0.0);
        assert_eq!(n.omega0, 1.0);
        let n = DuffingParams::new(1.0, 0.1, 1.0, 1.9, 1.0)
            .unwrap()
            .nondimensionalize()
            .unwrap();
        assert!((n.dimensionless.zeta0 - 0.05).abs() < 1e-15);
        assert!((n.dimensionless.beta2 - 1.9).abs() < 1e-15);
    }

    #[test]
    fn free_response_linear_limit() {
        let r = exact_free_response(0.3, 2.0, 0.0).unwrap();
        assert_eq!(r.omega, 2.0);
        assert_eq!(r.kappa, 0.0);
        assert!((r.sample(0.4) - 0.3 * (0.8f64).sin()).abs() < 1e-15);
        assert!((r.period() - PI).abs() < 1e-14);
        let tiny = exact_free_response(1e-8, 1.5, 7.0).unwrap();
        assert!((tiny.omega - 1.5).abs() < 1e-14);
        assert!(exact_free_response(2.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn free_response_matches_rk4() {
        let r = exact_free_response(1.0, 1.0, 2.0).unwrap();
        assert!((r.omega - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.kappa + 0.5).abs() < 1e-15);
        let p = DuffingParams::new(1.0, 0.0, 1.0, 0.0, 2.0).unwrap();
        let mut plant = Plant::noiseless(p).unwrap();
        plant.set_state(PlantState {
            q: 0.0,
            v: r.velocity(0.0),
            t: 0.0,
        });
        let n = 1000;
        let dt = r.period() / n as f64;
        let mut worst: f64 = 0.0;
        for i in 1..=n {
            let s = plant.step(0.0, dt).unwrap();
            worst = worst.max((s.q - r.sample(i as f64 * dt)).abs());
        }
        assert!(worst < 1e-6, "max error {worst}");
    }

    #[test]
    fn deterministic_noise() {
        let p = DuffingParams::dimensionless(0.05, 0.0);
        let noise = NoiseModel {
            sensor_rms: 0.01,
            seed: 42,
        };
        let run = || {
            let mut pl = Plant::new(p, noise).unwrap();
            (0..200)
                .map(|i| pl.step((i as f64 * 0.01).sin(), 0.01).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn origin_is_equilibrium_and_divergence_reported() {
        let p = DuffingParams::dimensionless(0.05, 0.0);
        let mut pl = Plant::noiseless(p).unwrap();
        for _ in 0..100 {
            let s = pl.step(0.0, 0.01).unwrap();
            assert_eq!((s.q, s.v), (0.0, 0.0));
        }
        let mut pl = Plant::noiseless(p).unwrap().with_bound(1.0);
        let err = (0..1000).find_map(|_| pl.step(100.0, 0.01).err());
        assert!(matches!(err, Some(Error::Divergence { .. })));
    }
}
