use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use contlab::io::{self, Manifest};
use contlab::run::{execute, validate, Subcommand};
use contlab::Config;

/// Virtual experimental continuation of Duffing-family oscillators.
#[derive(Debug, Parser)]
#[command(name = "contlab", version)]
struct Cli {
    /// One of: hbm, sws, sts, cbc-fd, scbc, pll, rct, acbc, slice, compare, oracle.
    subcommand: String,
    /// TOML config file, applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named scenario to start from.
    #[arg(long)]
    preset: Option<String>,
    /// Dotted-path override, e.g. `--set methods.acbc.rho=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed for every random source.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (CONTLAB_OUT takes precedence).
    #[arg(long)]
    out: Option<String>,
}

fn prepare(cli: &Cli) -> Result<(Subcommand, Config)> {
    let sub: Subcommand = cli.subcommand.parse()?;
    let doc = match &cli.config {
        Some(p) => Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut cfg = Config::resolve(cli.preset.as_deref(), doc.as_deref(), &cli.set, cli.seed)?;
    if let Some(o) = &cli.out {
        cfg.run.out = o.clone();
    }
    if let Ok(o) = std::env::var("CONTLAB_OUT") {
        if !o.is_empty() {
            cfg.run.out = o;
        }
    }
    validate(sub, &cfg)?;
    Ok((sub, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, cfg) = match prepare(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let digest = cfg.digest();
    let dir = PathBuf::from(&cfg.run.out).join(format!("{}-{}", sub.name(), &digest[..12]));
    let started = Instant::now();
    let result = execute(sub, &cfg);
    let wall = started.elapsed().as_secs_f64();

    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("error: creating {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    let (outcome, status, error) = match result {
        Ok(o) => {
            let s = o.exit_status();
            (o, s, None)
        }
        Err(e) => (Default::default(), 1, Some(format!("{e:#}"))),
    };
    let mut artifacts = Vec::new();
    for (name, bytes) in &outcome.artifacts {
        if let Err(e) = io::write(&dir, name, bytes) {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
        artifacts.push(name.clone());
    }
    let mut diagnostics = outcome.diagnostics.clone();
    diagnostics.extend(error.clone());
    let manifest = Manifest {
        subcommand: sub.name().into(),
        preset: cli.preset.clone(),
        config_digest: digest,
        config: cfg,
        wall_time_s: wall,
        exit_status: status,
        points: outcome.points,
        flagged: outcome.flagged,
        artifacts,
        diagnostics,
        point_diagnostics: outcome.point_diagnostics,
        summary: outcome.summary,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    if let Err(e) = io::write(&dir, "manifest.json", &json) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if let Some(e) = error {
        eprintln!("error: {e}");
    }
    println!("{}", dir.display());
    ExitCode::from(status as u8)
}
