//! Named scenarios: the dimensionless Duffing at two forcing levels, the
//! Helmholtz-Duffing arclength run and the electronic Duffing analog.

use anyhow::{bail, Result};

use crate::config::Config;

pub const NAMES: [&str; 5] = [
    "duffing-f1",
    "duffing-f3",
    "helmholtz-acbc",
    "electronic-duffing",
    "superharmonic-3-1",
];

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Dimensionless Duffing with ζ0 = 0.05. The low-frequency end of the
/// branch needs about 30 harmonics before the truncation error drops below
/// the time-integration oracle's resolution.
fn duffing(f: f64) -> Config {
    let mut c = Config::default();
    c.plant.c = 0.1;
    c.plant.k3 = 1.0;
    c.forcing.amplitude = f;
    c.hbm.h = 31;
    c
}

fn duffing_f1() -> Config {
    let mut c = duffing(1.0);
    c.hbm.omega_end = 4.0;
    let m = &mut c.methods;
    m.sws.omega_start = 0.5;
    m.sws.omega_end = 4.0;
    m.sts.start = 0.5;
    m.sts.end = 4.0;
    m.sts.n = 71;
    m.cbc_fd.omega_start = 0.5;
    m.cbc_fd.omega_end = 4.0;
    m.scbc.omega = 2.0;
    m.scbc.a_star_start = 0.1;
    m.scbc.a_star_end = 4.0;
    m.scbc.omega_start = 0.5;
    m.scbc.omega_end = 4.0;
    m.rct.omega_start = 0.5;
    m.rct.omega_end = 4.0;
    m.rct.a_star_end = 3.0;
    m.acbc.omega_start = 0.5;
    m.acbc.omega_min = 0.5;
    m.acbc.omega_max = 4.0;
    m.acbc.d_a = 0.1;
    m.acbc.d_omega = 0.1;
    m.acbc.a_star_start = 1.5;
    m.pll.amps = vec![0.5, 1.0, 3.0];
    c
}

fn duffing_f3() -> Config {
    let mut c = duffing(3.0);
    c.hbm.omega_end = 10.0;
    let m = &mut c.methods;
    m.sws.omega_start = 1.0;
    m.sws.omega_end = 8.0;
    m.sts.start = 1.0;
    m.sts.end = 8.0;
    m.sts.n = 141;
    m.cbc_fd.omega_start = 1.0;
    m.cbc_fd.omega_end = 8.0;
    m.scbc.omega = 3.0;
    m.scbc.a_star_start = 0.2;
    m.scbc.a_star_end = 6.0;
    m.scbc.omega_start = 1.5;
    m.scbc.omega_end = 5.5;
    m.rct.omega_start = 1.5;
    m.rct.omega_end = 5.5;
    m.rct.n_omega = 21;
    m.rct.a_star_start = 0.2;
    m.rct.a_star_end = 6.0;
    m.rct.n_a_star = 30;
    m.acbc.omega_start = 1.0;
    m.acbc.omega_min = 1.0;
    m.acbc.omega_max = 8.0;
    m.acbc.d_a = 0.2;
    m.acbc.d_omega = 0.2;
    m.acbc.a_star_start = 3.0;
    m.pll.amps = vec![0.5, 1.0, 3.0];
    c
}

/// Softening Helmholtz-Duffing traced by arclength CBC with ζ0 = 0.05,
/// β2 = 1.9, f* = 0.05, kd = 1, kα = 1, h = 15, μ = 0.0025, Δ = 0.05 and
/// t_steady = 50.
fn helmholtz_acbc() -> Config {
    let mut c = duffing(0.05);
    c.plant.k2 = 1.9;
    c.hbm.h = 15;
    c.control.kd_cbc = 1.0;
    c.hbm.omega_start = 0.3;
    c.hbm.omega_end = 1.3;
    c.hbm.max_step = 0.02;
    let m = &mut c.methods;
    m.acbc.omega_start = 0.4;
    m.acbc.a_star_start = 0.1;
    m.acbc.omega_min = 0.4;
    m.acbc.omega_max = 1.2;
    m.acbc.h = 15;
    m.acbc.mu = 0.0025;
    m.acbc.d_omega = 0.05;
    m.acbc.d_a = 0.05;
    m.acbc.law = "integral".into();
    m.acbc.rate = 1.0;
    m.acbc.t_steady = 50.0;
    m.sws.omega_start = 0.4;
    m.sws.omega_end = 1.2;
    m.sws.rate = 2e-4;
    m.sts.start = 0.4;
    m.sts.end = 1.2;
    m.sts.n = 41;
    m.cbc_fd.omega_start = 0.4;
    m.cbc_fd.omega_end = 1.2;
    m.scbc.omega = 0.7;
    m.scbc.a_star_start = 0.02;
    m.scbc.a_star_end = 0.8;
    m.scbc.omega_start = 0.4;
    m.scbc.omega_end = 1.2;
    m.rct.omega_start = 0.4;
    m.rct.omega_end = 1.2;
    m.rct.a_star_start = 0.02;
    m.rct.a_star_end = 0.7;
    m.pll.amps = vec![0.01, 0.02, 0.05];
    m.pll.omega_init = 1.0;
    c
}

/// Electronic Duffing analog, theoretical component values.
fn electronic_duffing() -> Config {
    let mut c = Config::default();
    c.plant.m = 1e-4;
    c.plant.c = 1.3e-4;
    c.plant.k = 1.923;
    c.plant.k2 = 0.0;
    c.plant.k3 = 0.9887;
    c.forcing.amplitude = 1.0;
    c.control.kd_cbc = 0.02;
    c.control.kp = 5.0;
    c.control.ki = 100.0;
    c.hbm.omega_start = 10.0;
    c.hbm.omega_end = 400.0;
    let m = &mut c.methods;
    m.sws.omega_start = 60.0;
    m.sws.omega_end = 400.0;
    m.sts.start = 60.0;
    m.sts.end = 400.0;
    m.sts.n = 69;
    m.cbc_fd.omega_start = 60.0;
    m.cbc_fd.omega_end = 400.0;
    m.scbc.omega = 150.0;
    m.scbc.a_star_start = 0.05;
    m.scbc.a_star_end = 3.0;
    m.scbc.omega_start = 60.0;
    m.scbc.omega_end = 400.0;
    m.rct.omega_start = 60.0;
    m.rct.omega_end = 400.0;
    m.rct.a_star_start = 0.05;
    m.rct.a_star_end = 3.0;
    m.rct.initial_gain = 1.923;
    m.acbc.omega_start = 60.0;
    m.acbc.omega_min = 60.0;
    m.acbc.omega_max = 400.0;
    m.acbc.d_omega = 5.0;
    m.acbc.a_star_start = 0.5;
    m.acbc.rate = 50.0;
    m.pll.omega_init = 140.0;
    m.pll.amps = vec![0.5, 1.0, 2.0];
    m.pll.loop_bandwidth = 5.0;
    c
}

/// Third-harmonic phase locking around the 3:1 superharmonic resonance of
/// the electronic Duffing at 1 V.
fn superharmonic_3_1() -> Config {
    let mut c = electronic_duffing();
    // The loop has to outrun the amplitude decay time 2m/c to hold the
    // middle of the loop.
    c.control.kp = 2.0;
    c.control.ki = 1.0;
    let m = &mut c.methods;
    m.pll.schedule = "phase".into();
    m.pll.lock_harmonic = 3;
    m.pll.thetas = linspace(-0.15, -3.0, 58);
    m.pll.omega_init = 40.0;
    m.pll.h = 5;
    m.pll.settle_periods = 200;
    m.pll.max_settle_periods = 4000;
    m.pll.mu_bar = 1.0;
    m.sws.omega_start = 35.0;
    m.sws.omega_end = 70.0;
    m.sws.rate = 1e-4;
    c.hbm.omega_start = 20.0;
    c.hbm.omega_end = 80.0;
    c
}

pub fn preset(name: &str) -> Result<Config> {
    Ok(match name {
        "duffing-f1" => duffing_f1(),
        "duffing-f3" => duffing_f3(),
        "helmholtz-acbc" => helmholtz_acbc(),
        "electronic-duffing" => electronic_duffing(),
        "superharmonic-3-1" => superharmonic_3_1(),
        _ => bail!("unknown preset `{name}`; known: {}", NAMES.join(", ")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use toml::Value;

    #[test]
    fn preset_examples() {
        let c = preset("electronic-duffing").unwrap();
        assert_eq!(c.plant.k3, 0.9887);
        assert_eq!(c.get("acbc.h"), Some(Value::Integer(15)));
        assert_eq!(preset("helmholtz-acbc").unwrap().get("acbc.h"), Some(Value::Integer(15)));
        assert_eq!(preset("duffing-f1").unwrap().forcing.amplitude, 1.0);
        assert!(preset("duffing-f7").is_err());
    }

    #[test]
    fn every_preset_resolves() {
        for n in NAMES {
            let c = Config::resolve(Some(n), None, &[], None).unwrap();
            assert_eq!(c, preset(n).unwrap());
        }
    }
}
