//! Subcommand dispatch: maps the resolved config onto the core procedures
//! and collects the artifacts in memory.

use std::fs;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use contlab_core::control::{PidGains, ProbeSettings};
use contlab_core::hbm::{
    continue_branch, folds_match_multipliers, isola_seed_search, ContinuationSettings, HbmBranch, HbmProblem,
    IsolaSearch, Parameter,
};
use contlab_core::methods::{
    acbc, cbc_fd, largest_jump, pll, rct, scbc, scbc_surface, stepped_sine, swept_sine, AcbcSettings, AcbcStart,
    Branch, CbcFdSettings, MethodId, PllSchedule, PllSettings, RctSettings, ScbcSettings, ScbcVariant, SteppedAxis,
    SteppedSettings, SweepLaw, SweepSettings, SweepSpacing,
};
use contlab_core::oracle::SettleOptions;
use contlab_core::postprocess::{branch_compare, matched_frequency_deviation, slice_constant_force, SurfaceGrid};
use contlab_core::{DuffingParams, HarmonicVector, NoiseModel, Plant};
use serde_json::{json, Value};

use crate::config::Config;
use crate::io::{self, PointNote};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Hbm,
    Sws,
    Sts,
    CbcFd,
    Scbc,
    Pll,
    Rct,
    Acbc,
    Slice,
    Compare,
    Oracle,
}

impl Subcommand {
    pub const ALL: [Subcommand; 11] = [
        Subcommand::Hbm,
        Subcommand::Sws,
        Subcommand::Sts,
        Subcommand::CbcFd,
        Subcommand::Scbc,
        Subcommand::Pll,
        Subcommand::Rct,
        Subcommand::Acbc,
        Subcommand::Slice,
        Subcommand::Compare,
        Subcommand::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Hbm => "hbm",
            Subcommand::Sws => "sws",
            Subcommand::Sts => "sts",
            Subcommand::CbcFd => "cbc-fd",
            Subcommand::Scbc => "scbc",
            Subcommand::Pll => "pll",
            Subcommand::Rct => "rct",
            Subcommand::Acbc => "acbc",
            Subcommand::Slice => "slice",
            Subcommand::Compare => "compare",
            Subcommand::Oracle => "oracle",
        }
    }
}

impl FromStr for Subcommand {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| anyhow!("unknown subcommand `{s}`"))
    }
}

/// Everything a run produces except the manifest.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub points: usize,
    pub flagged: usize,
    pub diagnostics: Vec<String>,
    pub point_diagnostics: Vec<PointNote>,
    pub summary: Value,
    /// Set when the run stopped early without failing outright.
    pub partial: bool,
}

impl Outcome {
    pub fn exit_status(&self) -> i32 {
        if self.partial || self.flagged > 0 {
            2
        } else {
            0
        }
    }

    fn from_branch(b: &Branch) -> Result<Self> {
        let point_diagnostics = b
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.converged)
            .map(|(index, p)| PointNote {
                index,
                omega: p.omega,
                note: "not converged".into(),
            })
            .collect();
        Ok(Outcome {
            artifacts: vec![("branch.csv".into(), io::branch_csv(b)?)],
            points: b.points.len(),
            flagged: b.flagged(),
            diagnostics: b.diagnostics.clone(),
            point_diagnostics,
            summary: Value::Null,
            partial: false,
        })
    }

    fn from_surface(g: &SurfaceGrid) -> Result<Self> {
        let mut notes = Vec::new();
        for (i, &w) in g.omega_axis.iter().enumerate() {
            for (j, &a) in g.a_star_axis.iter().enumerate() {
                let k = g.index(i, j);
                if g.flags[k] {
                    notes.push(PointNote {
                        index: k,
                        omega: w,
                        note: format!("flagged at a_star={a}"),
                    });
                }
            }
        }
        Ok(Outcome {
            artifacts: vec![("surface.csv".into(), io::surface_csv(g)?)],
            points: g.force.len(),
            flagged: g.flagged_count(),
            point_diagnostics: notes,
            summary: json!({
                "n_omega": g.omega_axis.len(),
                "n_a_star": g.a_star_axis.len(),
            }),
            ..Outcome::default()
        })
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn duffing_params(c: &Config) -> Result<DuffingParams> {
    let p = &c.plant;
    let params = DuffingParams {
        m: p.m,
        c: p.c,
        k: p.k,
        k2: p.k2,
        k3: p.k3,
    };
    params.validate()?;
    Ok(params)
}

pub fn plant(c: &Config) -> Result<Plant> {
    let mut plant = Plant::new(
        duffing_params(c)?,
        NoiseModel {
            sensor_rms: c.plant.noise_rms,
            seed: c.plant.seed,
        },
    )?
    .with_velocity_gain(c.plant.velocity_gain);
    if c.plant.bound > 0.0 {
        plant = plant.with_bound(c.plant.bound);
    }
    Ok(plant)
}

pub fn hbm_problem(c: &Config) -> Result<HbmProblem> {
    Ok(HbmProblem::new(duffing_params(c)?, c.hbm.h, c.forcing.amplitude)?)
}

pub fn continuation_settings(c: &Config) -> ContinuationSettings {
    let h = &c.hbm;
    ContinuationSettings {
        step: h.step,
        min_step: h.min_step,
        max_step: h.max_step,
        newton_tol: h.newton_tol,
        newton_max_iter: h.newton_max_iter,
        max_points: h.max_points,
        floquet_steps: h.floquet_steps,
        ..ContinuationSettings::default()
    }
}

/// Frequency (or forcing) continuation from rest at the start of the range.
pub fn hbm_branch(c: &Config) -> Result<(HbmProblem, HbmBranch)> {
    let problem = hbm_problem(c)?;
    let s = continuation_settings(c);
    let start = HarmonicVector::zeros(c.hbm.h);
    let branch = match c.hbm.parameter.as_str() {
        "frequency" => continue_branch(
            &problem,
            Parameter::Frequency,
            &s,
            &start,
            c.hbm.omega_start,
            (c.hbm.omega_start, c.hbm.omega_end),
        )?,
        "forcing" => continue_branch(
            &problem,
            Parameter::ForcingAmplitude,
            &s,
            &start,
            c.hbm.omega_start,
            (c.forcing.amplitude, c.hbm.forcing_end),
        )?,
        other => bail!("hbm.parameter must be \"frequency\" or \"forcing\", not `{other}`"),
    };
    Ok((problem, branch))
}

pub fn sws_settings(c: &Config) -> Result<SweepSettings> {
    let s = &c.methods.sws;
    let spacing = match s.spacing.as_str() {
        "log" | "logarithmic" => SweepSpacing::Logarithmic,
        "linear" => SweepSpacing::Linear,
        other => bail!("sws.spacing must be \"logarithmic\" or \"linear\", not `{other}`"),
    };
    Ok(SweepSettings {
        f_amp: c.forcing.amplitude,
        omega_start: s.omega_start,
        omega_end: s.omega_end,
        rate: s.rate,
        spacing,
        settle_periods: s.settle_periods,
        steps_per_period: s.steps_per_period,
        h: s.h,
    })
}

pub fn sts_settings(c: &Config) -> Result<SteppedSettings> {
    let s = &c.methods.sts;
    let axis = match s.axis.as_str() {
        "frequency" => SteppedAxis::Frequency {
            f_amp: c.forcing.amplitude,
        },
        "amplitude" => SteppedAxis::Amplitude { omega: s.omega },
        other => bail!("sts.axis must be \"frequency\" or \"amplitude\", not `{other}`"),
    };
    Ok(SteppedSettings {
        axis,
        grid: linspace(s.start, s.end, s.n),
        settle_periods: s.settle_periods,
        measure_periods: s.measure_periods,
        steps_per_period: s.steps_per_period,
        h: s.h,
    })
}

fn probe(on: bool, steps_per_period: usize) -> Option<ProbeSettings> {
    on.then(|| ProbeSettings {
        steps_per_period,
        ..ProbeSettings::default()
    })
}

pub fn cbc_fd_settings(c: &Config) -> CbcFdSettings {
    let s = &c.methods.cbc_fd;
    CbcFdSettings {
        f_star: c.forcing.amplitude,
        kd: c.control.kd_cbc,
        h: s.h,
        omega_start: s.omega_start,
        omega_end: s.omega_end,
        step: s.step,
        min_step: s.min_step,
        max_step: s.max_step,
        tol_b: s.tol_b,
        newton_max_iter: s.newton_max_iter,
        fd_rel: s.fd_rel,
        fd_abs: s.fd_abs,
        settle_periods: s.settle_periods,
        measure_periods: s.measure_periods,
        max_points: s.max_points,
        steps_per_period: s.steps_per_period,
        probe: probe(s.probe, s.steps_per_period),
    }
}

pub fn scbc_settings(c: &Config) -> Result<ScbcSettings> {
    let s = &c.methods.scbc;
    let variant = match s.variant.as_str() {
        "picard" => ScbcVariant::Picard,
        "adaptive" => ScbcVariant::Adaptive,
        other => bail!("scbc.variant must be \"picard\" or \"adaptive\", not `{other}`"),
    };
    Ok(ScbcSettings {
        omega: s.omega,
        a_star_grid: linspace(s.a_star_start, s.a_star_end, s.n_a_star),
        variant,
        kd: c.control.kd_cbc,
        tol: s.tol,
        max_iter: s.max_iter,
        h: s.h,
        settle_periods: s.settle_periods,
        measure_periods: s.measure_periods,
        mu_bar: s.mu_bar,
        steps_per_period: s.steps_per_period,
        probe: probe(s.probe, s.steps_per_period),
    })
}

pub fn pll_settings(c: &Config) -> Result<PllSettings> {
    let s = &c.methods.pll;
    let schedule = match s.schedule.as_str() {
        "forcing" => PllSchedule::Forcing {
            theta: s.theta,
            amps: if s.amps.is_empty() {
                vec![c.forcing.amplitude]
            } else {
                s.amps.clone()
            },
        },
        "phase" => PllSchedule::Phase {
            f_amp: c.forcing.amplitude,
            thetas: if s.thetas.is_empty() { vec![s.theta] } else { s.thetas.clone() },
        },
        other => bail!("pll.schedule must be \"forcing\" or \"phase\", not `{other}`"),
    };
    Ok(PllSettings {
        schedule,
        gains: PidGains {
            kp: c.control.kp,
            ki: c.control.ki,
            kd: c.control.kd,
        },
        lock_harmonic: s.lock_harmonic,
        omega_init: s.omega_init,
        loop_bandwidth: s.loop_bandwidth,
        settle_periods: s.settle_periods,
        max_settle_periods: s.max_settle_periods,
        measure_periods: s.measure_periods,
        tol: s.tol,
        h: s.h,
        mu_bar: s.mu_bar,
        steps_per_period: s.steps_per_period,
    })
}

pub fn rct_settings(c: &Config) -> RctSettings {
    let s = &c.methods.rct;
    RctSettings {
        omega_axis: linspace(s.omega_start, s.omega_end, s.n_omega),
        a_star_axis: linspace(s.a_star_start, s.a_star_end, s.n_a_star),
        tol: s.tol,
        max_corrections: s.max_corrections,
        max_drive_ratio: s.max_drive_ratio,
        relaxation: s.relaxation,
        ramp_periods: s.ramp_periods,
        hold_periods: s.hold_periods,
        measure_periods: s.measure_periods,
        reject_threshold: s.reject_threshold,
        initial_gain: s.initial_gain,
        steps_per_period: s.steps_per_period,
        h: s.h,
    }
}

pub fn acbc_settings(c: &Config) -> Result<(AcbcSettings, AcbcStart)> {
    let s = &c.methods.acbc;
    let law = match s.law.as_str() {
        "constant" => SweepLaw::Constant,
        "integral" => SweepLaw::Integral,
        "sign" => SweepLaw::Sign,
        other => bail!("acbc.law must be \"constant\", \"integral\" or \"sign\", not `{other}`"),
    };
    Ok((
        AcbcSettings {
            f_star: c.forcing.amplitude,
            kd: c.control.kd_cbc,
            h: s.h,
            mu: s.mu,
            d_omega: s.d_omega,
            d_a: s.d_a,
            law,
            rate: s.rate,
            sigma: s.sigma,
            rho: s.rho,
            t_steady: s.t_steady,
            measure_periods: s.measure_periods,
            max_correction_periods: s.max_correction_periods,
            steps_per_period: s.steps_per_period,
            omega_range: (s.omega_min, s.omega_max),
            n_points: s.n_points,
            max_retries: s.max_retries,
        },
        AcbcStart {
            omega: s.omega_start,
            a_star: s.a_star_start,
        },
    ))
}

pub fn isola_search(c: &Config) -> IsolaSearch {
    let o = &c.oracle;
    IsolaSearch {
        n_trials: o.n_trials,
        seed: o.seed,
        n_transient: o.n_transient,
        n_measure: o.n_measure,
        rel_tol: o.rel_tol,
        settle: SettleOptions {
            h: o.h,
            steps_per_period: o.steps_per_period,
            max_multiple: o.max_multiple,
            threshold: o.threshold,
        },
    }
}

fn read_input(path: &str, what: &str) -> Result<String> {
    if path.is_empty() {
        bail!("{what} is required");
    }
    fs::read_to_string(path).with_context(|| format!("reading {what} `{path}`"))
}

/// Checks everything that can be checked without running the procedure, so
/// a bad config produces no artifacts.
pub fn validate(sub: Subcommand, c: &Config) -> Result<()> {
    duffing_params(c)?;
    match sub {
        Subcommand::Hbm => {
            continuation_settings(c).validate()?;
            hbm_problem(c)?;
            if !matches!(c.hbm.parameter.as_str(), "frequency" | "forcing") {
                bail!("hbm.parameter must be \"frequency\" or \"forcing\"");
            }
        }
        Subcommand::Sws => {
            sws_settings(c)?;
        }
        Subcommand::Sts => {
            sts_settings(c)?;
        }
        Subcommand::Scbc => {
            scbc_settings(c)?;
        }
        Subcommand::Pll => {
            pll_settings(c)?;
        }
        Subcommand::Acbc => {
            acbc_settings(c)?;
        }
        Subcommand::Slice => {
            io::read_surface(&read_input(&c.slice.input, "slice.input")?)?;
        }
        Subcommand::Compare => {
            io::read_branch(&read_input(&c.compare.test, "compare.test")?, MethodId::Sts)?;
            io::read_branch(&read_input(&c.compare.reference, "compare.reference")?, MethodId::Hbm)?;
        }
        Subcommand::CbcFd | Subcommand::Rct | Subcommand::Oracle => {}
    }
    Ok(())
}

pub fn execute(sub: Subcommand, c: &Config) -> Result<Outcome> {
    validate(sub, c)?;
    match sub {
        Subcommand::Hbm => run_hbm(c),
        Subcommand::Sws => {
            let b = swept_sine(plant(c)?, &sws_settings(c)?)?;
            let mut out = Outcome::from_branch(&b)?;
            out.summary = match largest_jump(&b) {
                Some(j) => json!({"jump": {
                    "index": j.index,
                    "omega_before": j.omega_before,
                    "omega_after": j.omega_after,
                    "ratio": j.ratio,
                }}),
                None => json!({"jump": null}),
            };
            Ok(out)
        }
        Subcommand::Sts => Outcome::from_branch(&stepped_sine(plant(c)?, &sts_settings(c)?)?),
        Subcommand::CbcFd => Outcome::from_branch(&cbc_fd(plant(c)?, &cbc_fd_settings(c))?),
        Subcommand::Scbc => {
            let s = scbc_settings(c)?;
            if c.methods.scbc.n_omega == 0 {
                Outcome::from_branch(&scbc(plant(c)?, &s)?)
            } else {
                let axis = linspace(c.methods.scbc.omega_start, c.methods.scbc.omega_end, c.methods.scbc.n_omega);
                Outcome::from_surface(&scbc_surface(plant(c)?, &axis, &s)?)
            }
        }
        Subcommand::Pll => Outcome::from_branch(&pll(plant(c)?, &pll_settings(c)?)?),
        Subcommand::Rct => Outcome::from_surface(&rct(plant(c)?, &rct_settings(c))?),
        Subcommand::Acbc => {
            let (s, start) = acbc_settings(c)?;
            let b = acbc(plant(c)?, &s, &start)?;
            let mut out = Outcome::from_branch(&b)?;
            // A diagnostic means the trace ended before leaving the range.
            out.partial = !b.diagnostics.is_empty();
            Ok(out)
        }
        Subcommand::Slice => run_slice(c),
        Subcommand::Compare => run_compare(c),
        Subcommand::Oracle => run_oracle(c),
    }
}

fn run_hbm(c: &Config) -> Result<Outcome> {
    let (problem, hb) = hbm_branch(c)?;
    let b = Branch::from_hbm(&hb, &problem);
    let mut out = Outcome::from_branch(&b)?;
    let folds: Vec<Value> = hb
        .folds
        .iter()
        .map(|&i| json!({"index": i, "omega": hb.points[i].omega, "a1": hb.points[i].amplitude()}))
        .collect();
    out.summary = json!({
        "folds": folds,
        "branch_points": hb.branch_points,
        "folds_match_multipliers": folds_match_multipliers(&hb),
    });
    if let Some(e) = &hb.truncated {
        out.diagnostics.push(format!("branch truncated: {e}"));
        out.partial = true;
    }
    Ok(out)
}

fn run_slice(c: &Config) -> Result<Outcome> {
    let grid = io::read_surface(&read_input(&c.slice.input, "slice.input")?)?;
    let s = slice_constant_force(&grid, c.slice.f_star)?;
    let peak = s.peak();
    Ok(Outcome {
        artifacts: vec![("slice.csv".into(), io::slice_csv(&s)?)],
        points: s.polylines.iter().map(Vec::len).sum(),
        diagnostics: s.diagnostics.clone(),
        summary: json!({
            "polylines": s.polylines.len(),
            "peak": peak.map(|p| json!({"omega": p.omega, "a_star": p.a_star, "a": p.a})),
        }),
        ..Outcome::default()
    })
}

fn run_compare(c: &Config) -> Result<Outcome> {
    let test = io::read_branch(&read_input(&c.compare.test, "compare.test")?, MethodId::Sts)?;
    let reference = io::read_branch(&read_input(&c.compare.reference, "compare.reference")?, MethodId::Hbm)?;
    let report = branch_compare(&test, &reference)?;
    let dev = matched_frequency_deviation(&test, &reference);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "omega", "a1", "rel_deviation"])?;
    for (i, (p, d)) in test.points.iter().zip(&dev).enumerate() {
        w.write_record([
            i.to_string(),
            p.omega.to_string(),
            p.a1().to_string(),
            d.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))?;
    Ok(Outcome {
        artifacts: vec![("compare.csv".into(), bytes)],
        points: test.points.len(),
        summary: json!({
            "max_rel": report.max_rel,
            "mean_rel": report.mean_rel,
            "peak_omega_rel": report.peak_omega_rel,
            "max_matched_rel": dev.iter().flatten().fold(0.0f64, |m, d| m.max(d.abs())),
            "unmatched": dev.iter().filter(|d| d.is_none()).count(),
        }),
        ..Outcome::default()
    })
}

fn run_oracle(c: &Config) -> Result<Outcome> {
    let problem = hbm_problem(c)?;
    let search = isola_search(c);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["omega", "orbit", "period_multiple", "a1", "total_amp", "hits", "q0", "v0"])?;
    let mut rows = 0;
    let mut unresolved = 0;
    for omega in linspace(c.oracle.omega_start, c.oracle.omega_end, c.oracle.n_omega) {
        for (k, o) in isola_seed_search(&problem, omega, &search).iter().enumerate() {
            let pm = o.period_multiple();
            unresolved += pm.is_none() as usize;
            w.write_record([
                omega.to_string(),
                k.to_string(),
                pm.map(|m| m.to_string()).unwrap_or_default(),
                o.response.fundamental_amplitude().to_string(),
                o.response.total_amp.to_string(),
                o.hits.to_string(),
                o.ic.0.to_string(),
                o.ic.1.to_string(),
            ])?;
            rows += 1;
        }
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))?;
    Ok(Outcome {
        artifacts: vec![("oracle.csv".into(), bytes)],
        points: rows,
        flagged: unresolved,
        summary: json!({"orbits": rows, "unresolved_period": unresolved}),
        ..Outcome::default()
    })
}
