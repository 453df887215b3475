#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::residual::HbmProblem;
use crate::oracle::{settle_and_measure, SettleOptions, SteadyResponse};

/// A distinct steady response found from random initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitClass {
    pub response: SteadyResponse,
    /// Initial condition that first reached this orbit.
    pub ic: (f64, f64),
    /// Trials that ended on it.
    pub hits: usize,
}

impl OrbitClass {
    pub fn period_multiple(&self) -> Option<usize> {
        self.response.period_multiple
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolaSearch {
    pub n_trials: usize,
    pub seed: u64,
    pub n_transient: usize,
    pub n_measure: usize,
    /// Relative amplitude difference below which two orbits are the same.
    pub rel_tol: f64,
    pub settle: SettleOptions,
}

impl Default for IsolaSearch {
    fn default() -> Self {
        Self {
            n_trials: 20,
            seed: 0,
            n_transient: 400,
            n_measure: 12,
            rel_tol: 0.01,
            settle: SettleOptions {
                steps_per_period: 250,
                ..SettleOptions::default()
            },
        }
    }
}

/// Integrates random initial conditions to steady state at `omega` and
/// returns the distinct orbits, sorted by fundamental amplitude.
pub fn isola_seed_search(problem: &HbmProblem, omega: f64, search: &IsolaSearch) -> Vec<OrbitClass> {
    let p = &problem.plant;
    let f = problem.forcing_amp.abs();
    let mut q_box = f / p.k;
    if p.k3 > 0.0 {
        q_box = q_box.max((f / p.k3).cbrt());
    }
    let q_box = 2.0 * q_box.max(1e-12);
    let v_box = q_box * omega;
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut classes: Vec<OrbitClass> = Vec::new();
    for _ in 0..search.n_trials {
        let ic = (
            rng.random_range(-q_box..=q_box),
            rng.random_range(-v_box..=v_box),
        );
        let Ok(r) = settle_and_measure(
            p,
            problem.forcing_amp,
            omega,
            ic,
            search.n_transient,
            search.n_measure,
            &search.settle,
        ) else {
            continue;
        };
        let amp = r.fundamental_amplitude();
        let found = classes.iter_mut().find(|c| {
            c.response.period_multiple == r.period_multiple && {
                let a = c.response.fundamental_amplitude();
                let t = c.response.total_amp;
                (a - amp).abs() <= search.rel_tol * a.max(amp).max(1e-300)
                    && (t - r.total_amp).abs() <= search.rel_tol * t.max(r.total_amp).max(1e-300)
            }
        });
        match found {
            Some(c) => c.hits += 1,
            None => classes.push(OrbitClass {
                response: r,
                ic,
                hits: 1,
            }),
        }
    }
    classes.sort_by(|a, b| {
        a.response
            .fundamental_amplitude()
            .total_cmp(&b.response.fundamental_amplitude())
    });
    classes
}
