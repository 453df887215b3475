use std::f64::consts::PI;

use contlab_core::fourier::{basis_at_phase, dft_over_periods, wrap_pi, LmsFilter};
use contlab_core::plant::{exact_free_response, PlantState};
use contlab_core::postprocess::CubicSpline;
use contlab_core::{DuffingParams, HarmonicVector, NoiseModel, Plant};
use proptest::prelude::*;

fn harmonic_vector(max_h: usize, scale: f64) -> impl Strategy<Value = HarmonicVector> {
    (1..=max_h).prop_flat_map(move |h| {
        prop::collection::vec(-scale..scale, 2 * h + 1).prop_map(move |c| HarmonicVector::from_coeffs(h, c).unwrap())
    })
}

fn energy(p: &DuffingParams, s: PlantState) -> f64 {
    0.5 * p.m * s.v * s.v + 0.5 * p.k * s.q * s.q + p.k2 * s.q.powi(3) / 3.0 + 0.25 * p.k3 * s.q.powi(4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(v in harmonic_vector(8, 2.0)) {
        let n = 64 * v.h();
        let ms = (0..n).map(|i| v.eval(2.0 * PI * i as f64 / n as f64).powi(2)).sum::<f64>() / n as f64;
        let c0 = v.constant();
        let power = c0 * c0 + 0.5 * (1..=v.h()).map(|k| v.sin(k).powi(2) + v.cos(k).powi(2)).sum::<f64>();
        prop_assert!((ms - power).abs() <= 1e-12 * power.max(1.0));
        prop_assert!((v.rms() - power.sqrt()).abs() <= 1e-12 * power.sqrt().max(1.0));
    }

    #[test]
    fn dft_recovers_coefficients(v in harmonic_vector(6, 1.0), periods in 1usize..5) {
        let spp = 200;
        let samples: Vec<f64> = (0..spp * periods).map(|i| v.eval(2.0 * PI * i as f64 / spp as f64)).collect();
        let w = dft_over_periods(&samples, 0.0, 2.0 * PI / spp as f64, 1.0, periods, v.h()).unwrap();
        for (a, b) in w.as_slice().iter().zip(v.as_slice()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lms_weights_at_signal_are_fixed(v in harmonic_vector(5, 1.0), omega in 0.5f64..3.0, mu_bar in 0.1f64..2.0) {
        let h = v.h();
        let mut f = LmsFilter::new(h, mu_bar * omega, omega).with_weights(v.clone());
        let dt = 2.0 * PI / omega / 400.0;
        let mut basis = vec![0.0; 2 * h + 1];
        for _ in 0..1200 {
            basis_at_phase(h, omega * f.t, &mut basis);
            let x: f64 = basis.iter().zip(v.as_slice()).map(|(b, c)| b * c).sum();
            let e = f.update(x, dt);
            prop_assert!(e.abs() < 1e-9);
        }
        for (a, b) in f.weights.as_slice().iter().zip(v.as_slice()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_pi_stays_in_range(x in -100.0f64..100.0) {
        let w = wrap_pi(x);
        prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        let turns = (x - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn spline_reproduces_cubics(c in prop::array::uniform4(-2.0f64..2.0), n in 4usize..12) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64 * 3.0).collect();
        let p = |t: f64| c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        let s = CubicSpline::not_a_knot(&x, &x.iter().map(|&t| p(t)).collect::<Vec<_>>()).unwrap();
        for i in 0..50 {
            let t = 3.0 * i as f64 / 49.0;
            prop_assert!((s.eval(t) - p(t)).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rk4_period_matches_elliptic_solution(amp in 0.05f64..4.0, w0 in 0.5f64..2.0, a3 in 0.1f64..2.0) {
        let exact = exact_free_response(amp, w0, a3).unwrap();
        prop_assert!((exact.omega - (w0 * w0 + 0.5 * a3 * amp * amp).sqrt()).abs() < 1e-12);
        let t_exact = exact.period();
        let params = DuffingParams { m: 1.0, c: 0.0, k: w0 * w0, k2: 0.0, k3: a3 };
        let mut p = Plant::noiseless(params).unwrap();
        p.set_state(PlantState { q: 0.0, v: exact.velocity(0.0), t: 0.0 });
        let dt = t_exact / 1000.0;
        let mut prev = 0.0;
        let mut crossings = Vec::new();
        for i in 1..=5500 {
            let s = p.step(0.0, dt).unwrap();
            if prev < 0.0 && s.q >= 0.0 {
                crossings.push((i as f64 - s.q / (s.q - prev)) * dt);
            }
            prev = s.q;
        }
        prop_assert!(crossings.len() >= 5);
        let measured = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        prop_assert!((measured - t_exact).abs() / t_exact < 1e-3);
    }

    #[test]
    fn conservative_energy_drift(amp in 0.1f64..3.0, k3 in 0.0f64..2.0) {
        let params = DuffingParams { m: 1.0, c: 0.0, k: 1.0, k2: 0.0, k3 };
        let mut p = Plant::noiseless(params).unwrap();
        p.set_state(PlantState { q: amp, v: 0.0, t: 0.0 });
        let e0 = energy(&params, p.state());
        // 1000 steps per period of the amplitude-dependent frequency.
        let period = 2.0 * PI / (1.0 + 0.75 * k3 * amp * amp).sqrt();
        let dt = period / 1000.0;
        for _ in 0..100_000 {
            p.step(0.0, dt).unwrap();
        }
        let drift = (energy(&params, p.state()) - e0).abs() / e0;
        prop_assert!(drift < 1e-6, "drift {drift:e}");
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>(), rms in 0.001f64..0.1) {
        let run = |seed| {
            let noise = NoiseModel { sensor_rms: rms, seed };
            let mut p = Plant::new(DuffingParams::linear(1.0, 0.1, 1.0), noise).unwrap();
            (0..200).map(|i| p.step((0.01 * i as f64).sin(), 0.01).unwrap().q).collect::<Vec<_>>()
        };
        let a = run(seed);
        prop_assert_eq!(&a, &run(seed));
        prop_assert_ne!(a, run(seed.wrapping_add(1)));
    }
}
