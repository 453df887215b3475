//! Branch and surface CSV files and the JSON run manifest.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use contlab_core::control::InvasivenessReport;
use contlab_core::fourier::HarmonicVector;
use contlab_core::methods::{Branch, BranchPoint, MethodId};
use contlab_core::postprocess::{SliceResult, SurfaceGrid};
use serde::Serialize;

use crate::config::Config;

pub const BRANCH_COLUMNS: [&str; 11] = [
    "index",
    "omega",
    "a_star",
    "f_meas",
    "a1",
    "phase1",
    "total_amp",
    "invasiveness_rel",
    "converged",
    "open_loop_stable",
    "wall_time_s",
];

pub const SURFACE_COLUMNS: [&str; 5] = ["omega", "a_star", "f_meas", "a_meas", "flag"];

/// Shortest decimal that round-trips.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn branch_csv(b: &Branch) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BRANCH_COLUMNS)?;
    for (i, p) in b.points.iter().enumerate() {
        w.write_record([
            i.to_string(),
            num(p.omega),
            opt(p.a_star.map(num)),
            num(p.f_meas()),
            num(p.a1()),
            num(p.phase_lag),
            num(p.total_amp),
            opt(p.invasiveness.map(|r| num(r.relative))),
            p.converged.to_string(),
            opt(p.open_loop_stable),
            num(p.wall_time),
        ])?;
    }
    w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: usize) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| anyhow!("line {line}: missing column {}", BRANCH_COLUMNS[i]))
}

fn float(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().with_context(|| format!("line {line}: `{s}` is not a number"))
}

fn opt_float(s: &str, line: usize) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        float(s, line).map(Some)
    }
}

fn boolean(s: &str, line: usize) -> Result<bool> {
    s.trim().parse().with_context(|| format!("line {line}: `{s}` is not a boolean"))
}

/// Reads a branch file back as fundamental-only points.
pub fn read_branch(text: &str, method: MethodId) -> Result<Branch> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != BRANCH_COLUMNS {
        bail!("branch header must be {}", BRANCH_COLUMNS.join(","));
    }
    let mut b = Branch::new(method);
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let g = |i| field(&rec, i, line);
        let omega = float(g(1)?, line)?;
        let f = float(g(3)?, line)?;
        let a = float(g(4)?, line)?;
        let phase = float(g(5)?, line)?;
        let response = HarmonicVector::fundamental(1, a * phase.cos(), a * phase.sin());
        let forcing = HarmonicVector::fundamental(1, f, 0.0);
        let mut p = BranchPoint::new(omega, response, forcing, float(g(6)?, line)?);
        p.a_star = opt_float(g(2)?, line)?;
        p.invasiveness = opt_float(g(7)?, line)?.map(|relative| InvasivenessReport {
            residual_norm: f64::NAN,
            relative,
        });
        p.converged = boolean(g(8)?, line)?;
        let s = g(9)?;
        p.open_loop_stable = if s.trim().is_empty() { None } else { Some(boolean(s, line)?) };
        p.wall_time = float(g(10)?, line)?;
        b.points.push(p);
    }
    Ok(b)
}

pub fn surface_csv(g: &SurfaceGrid) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SURFACE_COLUMNS)?;
    for (i, &om) in g.omega_axis.iter().enumerate() {
        for (j, &a) in g.a_star_axis.iter().enumerate() {
            let k = g.index(i, j);
            w.write_record([
                num(om),
                num(a),
                num(g.force[k]),
                num(g.response[k]),
                (g.flags[k] as u8).to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

/// Reads a long-format surface. Rows may come in any order but must cover
/// the full tensor grid exactly once.
pub fn read_surface(text: &str) -> Result<SurfaceGrid> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    if r.headers()?.iter().collect::<Vec<_>>() != SURFACE_COLUMNS {
        bail!("surface header must be {}", SURFACE_COLUMNS.join(","));
    }
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let get = |i: usize| rec.get(i).ok_or_else(|| anyhow!("line {line}: missing column {}", SURFACE_COLUMNS[i]));
        let flag = match get(4)?.trim() {
            "0" | "false" => false,
            "1" | "true" => true,
            s => bail!("line {line}: flag `{s}` must be 0 or 1"),
        };
        rows.push((float(get(0)?, line)?, float(get(1)?, line)?, float(get(2)?, line)?, float(get(3)?, line)?, flag));
    }
    let axis = |sel: fn(&(f64, f64, f64, f64, bool)) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(sel).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (wa, aa) = (axis(|r| r.0), axis(|r| r.1));
    if wa.len() * aa.len() != rows.len() {
        bail!("surface rows do not form a complete grid");
    }
    let mut g = SurfaceGrid::new(wa.clone(), aa.clone()).map_err(|e| anyhow!("{e}"))?;
    let mut seen = vec![false; rows.len()];
    for (w, a, f, x, flag) in rows {
        let i = wa.binary_search_by(|v| v.total_cmp(&w)).expect("axis value");
        let j = aa.binary_search_by(|v| v.total_cmp(&a)).expect("axis value");
        let k = g.index(i, j);
        if seen[k] {
            bail!("duplicate surface cell at omega={w}, a_star={a}");
        }
        seen[k] = true;
        g.set(i, j, f, x, flag);
    }
    Ok(g)
}

pub fn slice_csv(s: &SliceResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["polyline", "omega", "a_star", "a"])?;
    for (i, line) in s.polylines.iter().enumerate() {
        for p in line {
            w.write_record([i.to_string(), num(p.omega), num(p.a_star), num(p.a)])?;
        }
    }
    w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct PointNote {
    pub index: usize,
    pub omega: f64,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub preset: Option<String>,
    pub config_digest: String,
    pub config: Config,
    pub wall_time_s: f64,
    pub exit_status: i32,
    pub points: usize,
    pub flagged: usize,
    pub artifacts: Vec<String>,
    pub diagnostics: Vec<String>,
    pub point_diagnostics: Vec<PointNote>,
    pub summary: serde_json::Value,
}

pub fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::write(dir.join(name), bytes).with_context(|| format!("writing {}", dir.join(name).display()))
}
