//! Run configuration: typed sections with complete defaults, TOML files,
//! presets and dotted `--set` overrides.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Output root, overridden by `CONTLAB_OUT`.
    pub out: String,
    /// Master seed; `--seed` rewrites every module seed from it.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: "runs".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub m: f64,
    pub c: f64,
    pub k: f64,
    pub k2: f64,
    pub k3: f64,
    pub noise_rms: f64,
    pub seed: u64,
    pub velocity_gain: f64,
    /// Divergence bound on |q| and |v|; 0 selects 1e6 displacement units.
    pub bound: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            m: 1.0,
            c: 0.1,
            k: 1.0,
            k2: 0.0,
            k3: 1.0,
            noise_rms: 0.0,
            seed: 0,
            velocity_gain: 1.0,
            bound: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    pub amplitude: f64,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self { amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HbmConfig {
    pub h: usize,
    /// "frequency" or "forcing".
    pub parameter: String,
    pub omega_start: f64,
    pub omega_end: f64,
    /// End of the forcing range for forcing continuation.
    pub forcing_end: f64,
    pub step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub max_points: usize,
    pub floquet_steps: usize,
}

impl Default for HbmConfig {
    fn default() -> Self {
        Self {
            h: 15,
            parameter: "frequency".into(),
            omega_start: 0.1,
            omega_end: 4.0,
            forcing_end: 5.0,
            step: 0.02,
            min_step: 1e-6,
            max_step: 0.05,
            newton_tol: 1e-9,
            newton_max_iter: 25,
            max_points: 5000,
            floquet_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    /// PID gains of the phase-locked loop.
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Velocity feedback gain of the control-based methods.
    pub kd_cbc: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            kp: 0.05,
            ki: 0.01,
            kd: 0.0,
            kd_cbc: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwsConfig {
    pub omega_start: f64,
    pub omega_end: f64,
    pub rate: f64,
    /// "log" or "linear".
    pub spacing: String,
    pub settle_periods: usize,
    pub steps_per_period: usize,
    pub h: usize,
}

impl Default for SwsConfig {
    fn default() -> Self {
        Self {
            omega_start: 0.5,
            omega_end: 3.0,
            rate: 2e-4,
            spacing: "log".into(),
            settle_periods: 100,
            steps_per_period: 1000,
            h: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StsConfig {
    /// "frequency" (grid of ω at the configured forcing) or "amplitude"
    /// (grid of forcing amplitudes at `omega`).
    pub axis: String,
    pub start: f64,
    pub end: f64,
    pub n: usize,
    pub omega: f64,
    pub settle_periods: usize,
    pub measure_periods: usize,
    pub steps_per_period: usize,
    pub h: usize,
}

impl Default for StsConfig {
    fn default() -> Self {
        Self {
            axis: "frequency".into(),
            start: 0.5,
            end: 3.0,
            n: 51,
            omega: 1.0,
            settle_periods: 50,
            measure_periods: 5,
            steps_per_period: 1000,
            h: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbcFdConfig {
    pub omega_start: f64,
    pub omega_end: f64,
    pub h: usize,
    pub step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub tol_b: f64,
    pub newton_max_iter: usize,
    pub fd_rel: f64,
    pub fd_abs: f64,
    pub settle_periods: usize,
    pub measure_periods: usize,
    pub max_points: usize,
    pub steps_per_period: usize,
    pub probe: bool,
}

impl Default for CbcFdConfig {
    fn default() -> Self {
        Self {
            omega_start: 0.5,
            omega_end: 3.0,
            h: 3,
            step: 0.05,
            min_step: 1e-3,
            max_step: 0.2,
            tol_b: 1e-3,
            newton_max_iter: 8,
            fd_rel: 1e-3,
            fd_abs: 1e-3,
            settle_periods: 30,
            measure_periods: 5,
            max_points: 200,
            steps_per_period: 1000,
            probe: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScbcConfig {
    /// Frequency of a single S-curve.
    pub omega: f64,
    /// Frequency axis of a force surface; `n_omega = 0` runs one S-curve.
    pub omega_start: f64,
    pub omega_end: f64,
    pub n_omega: usize,
    pub a_star_start: f64,
    pub a_star_end: f64,
    pub n_a_star: usize,
    /// "picard" or "adaptive".
    pub variant: String,
    pub tol: f64,
    pub max_iter: usize,
    pub h: usize,
    pub settle_periods: usize,
    pub measure_periods: usize,
    pub mu_bar: f64,
    pub steps_per_period: usize,
    pub probe: bool,
}

impl Default for ScbcConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            omega_start: 0.5,
            omega_end: 3.0,
            n_omega: 0,
            a_star_start: 0.1,
            a_star_end: 3.0,
            n_a_star: 30,
            variant: "picard".into(),
            tol: 0.01,
            max_iter: 20,
            h: 5,
            settle_periods: 50,
            measure_periods: 5,
            mu_bar: 0.1,
            steps_per_period: 1000,
            probe: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PllConfig {
    /// "forcing" (amplitudes at fixed `theta`) or "phase" (`thetas` at the
    /// configured forcing).
    pub schedule: String,
    pub theta: f64,
    pub thetas: Vec<f64>,
    pub amps: Vec<f64>,
    pub lock_harmonic: usize,
    pub omega_init: f64,
    pub loop_bandwidth: f64,
    pub settle_periods: usize,
    pub max_settle_periods: usize,
    pub measure_periods: usize,
    pub tol: f64,
    pub h: usize,
    pub mu_bar: f64,
    pub steps_per_period: usize,
}

impl Default for PllConfig {
    fn default() -> Self {
        Self {
            schedule: "forcing".into(),
            theta: -std::f64::consts::FRAC_PI_2,
            thetas: Vec::new(),
            amps: vec![0.5, 1.0, 3.0],
            lock_harmonic: 1,
            omega_init: 1.0,
            loop_bandwidth: 0.05,
            settle_periods: 100,
            max_settle_periods: 1000,
            measure_periods: 5,
            tol: 1e-3,
            h: 5,
            mu_bar: 1.0,
            steps_per_period: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RctConfig {
    pub omega_start: f64,
    pub omega_end: f64,
    pub n_omega: usize,
    pub a_star_start: f64,
    pub a_star_end: f64,
    pub n_a_star: usize,
    pub tol: f64,
    pub max_corrections: usize,
    pub max_drive_ratio: f64,
    pub relaxation: f64,
    pub ramp_periods: usize,
    pub hold_periods: usize,
    pub measure_periods: usize,
    pub reject_threshold: f64,
    pub initial_gain: f64,
    pub steps_per_period: usize,
    pub h: usize,
}

impl Default for RctConfig {
    fn default() -> Self {
        Self {
            omega_start: 0.5,
            omega_end: 3.0,
            n_omega: 26,
            a_star_start: 0.1,
            a_star_end: 3.0,
            n_a_star: 30,
            tol: 0.01,
            max_corrections: 10,
            max_drive_ratio: 2.0,
            relaxation: 0.5,
            ramp_periods: 10,
            hold_periods: 50,
            measure_periods: 5,
            reject_threshold: 0.2,
            initial_gain: 1.0,
            steps_per_period: 1000,
            h: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcbcConfig {
    pub omega_start: f64,
    pub a_star_start: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub h: usize,
    pub mu: f64,
    pub d_omega: f64,
    pub d_a: f64,
    /// "integral", "constant" or "sign".
    pub law: String,
    pub rate: f64,
    pub sigma: f64,
    pub rho: f64,
    pub t_steady: f64,
    pub measure_periods: usize,
    pub max_correction_periods: usize,
    pub steps_per_period: usize,
    pub n_points: usize,
    pub max_retries: usize,
}

impl Default for AcbcConfig {
    fn default() -> Self {
        Self {
            omega_start: 0.5,
            a_star_start: 0.1,
            omega_min: 0.4,
            omega_max: 3.0,
            h: 15,
            mu: 0.0025,
            d_omega: 0.05,
            d_a: 0.05,
            law: "integral".into(),
            rate: 1.0,
            sigma: 0.5,
            rho: 0.01,
            t_steady: 50.0,
            measure_periods: 5,
            max_correction_periods: 5000,
            steps_per_period: 1000,
            n_points: 400,
            max_retries: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodsConfig {
    pub sws: SwsConfig,
    pub sts: StsConfig,
    pub cbc_fd: CbcFdConfig,
    pub scbc: ScbcConfig,
    pub pll: PllConfig,
    pub rct: RctConfig,
    pub acbc: AcbcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceConfig {
    /// SurfaceGrid CSV to slice.
    pub input: String,
    pub f_star: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            input: String::new(),
            f_star: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub test: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub omega_start: f64,
    pub omega_end: f64,
    pub n_omega: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub n_transient: usize,
    pub n_measure: usize,
    pub rel_tol: f64,
    pub h: usize,
    pub steps_per_period: usize,
    pub max_multiple: usize,
    pub threshold: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            omega_start: 0.5,
            omega_end: 3.0,
            n_omega: 11,
            n_trials: 20,
            seed: 0,
            n_transient: 400,
            n_measure: 12,
            rel_tol: 0.01,
            h: 5,
            steps_per_period: 250,
            max_multiple: 5,
            threshold: 0.999,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub run: RunConfig,
    pub plant: PlantConfig,
    pub forcing: ForcingConfig,
    pub hbm: HbmConfig,
    pub control: ControlConfig,
    pub methods: MethodsConfig,
    pub slice: SliceConfig,
    pub compare: CompareConfig,
    pub oracle: OracleConfig,
}

fn to_table(c: &Config) -> Table {
    match Value::try_from(c).expect("config serialises") {
        Value::Table(t) => t,
        _ => unreachable!("config is a table"),
    }
}

/// Dotted paths present in `t` but absent from `reference`.
fn unknown_keys(t: &Table, reference: &Table, prefix: &str, out: &mut BTreeSet<String>) {
    for (k, v) in t {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (v, reference.get(k)) {
            (Value::Table(sub), Some(Value::Table(rsub))) => unknown_keys(sub, rsub, &path, out),
            (_, Some(_)) => {}
            (_, None) => {
                out.insert(path);
            }
        }
    }
}

fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// `acbc.*` and friends are accepted as short forms of `methods.*`.
pub fn canonical_path(path: &str) -> String {
    const METHODS: [&str; 7] = ["sws", "sts", "cbc_fd", "scbc", "pll", "rct", "acbc"];
    let head = path.split('.').next().unwrap_or("");
    let head_norm = head.replace('-', "_");
    if METHODS.contains(&head_norm.as_str()) {
        format!("methods.{head_norm}{}", &path[head.len()..])
    } else {
        path.to_string()
    }
}

fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(t: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().ok_or_else(|| anyhow!("empty override key"))?;
    let mut cur = t;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(sub) => sub,
            _ => bail!("override {path}: {p} is not a section"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn normalise_floats(t: &mut Table, reference: &Table) {
    for (k, v) in t.iter_mut() {
        match (v, reference.get(k)) {
            (Value::Table(sub), Some(Value::Table(rsub))) => normalise_floats(sub, rsub),
            (v @ Value::Integer(_), Some(Value::Float(_))) => {
                if let Value::Integer(i) = v {
                    *v = Value::Float(*i as f64);
                }
            }
            (Value::Array(a), Some(Value::Array(_))) => {
                for x in a.iter_mut() {
                    if let Value::Integer(i) = x {
                        *x = Value::Float(*i as f64);
                    }
                }
            }
            _ => {}
        }
    }
}

impl Config {
    /// Builds a config from an optional preset, an optional TOML document and
    /// `key=value` overrides, in that order. Unknown keys are reported all at
    /// once.
    pub fn resolve(preset: Option<&str>, document: Option<&str>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let base = match preset {
            Some(name) => crate::presets::preset(name)?,
            None => Config::default(),
        };
        let reference = to_table(&Config::default());
        let mut table = to_table(&base);
        let mut unknown = BTreeSet::new();
        if let Some(doc) = document {
            let mut parsed: Table = doc.parse().context("config is not valid TOML")?;
            if let Some(Value::Table(m)) = parsed.remove("methods") {
                let mut fixed = Table::new();
                for (k, v) in m {
                    fixed.insert(k.replace('-', "_"), v);
                }
                parsed.insert("methods".into(), Value::Table(fixed));
            }
            unknown_keys(&parsed, &reference, "", &mut unknown);
            merge(&mut table, &parsed);
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{o}` is not key=value"))?;
            let path = canonical_path(k.trim());
            let mut probe = Table::new();
            set_path(&mut probe, &path, Value::Boolean(true))?;
            unknown_keys(&probe, &reference, "", &mut unknown);
            set_path(&mut table, &path, parse_value(v.trim()))?;
        }
        normalise_floats(&mut table, &reference);
        if !unknown.is_empty() {
            let list: Vec<String> = unknown.into_iter().collect();
            bail!("unknown config keys: {}", list.join(", "));
        }
        let mut cfg: Config = Value::Table(table)
            .try_into()
            .context("config values have the wrong type")?;
        if let Some(s) = seed {
            cfg.apply_seed(s);
        }
        Ok(cfg)
    }

    /// Derives every module seed from one master seed.
    pub fn apply_seed(&mut self, seed: u64) {
        self.run.seed = seed;
        self.plant.seed = seed;
        self.oracle.seed = seed.wrapping_add(1);
    }

    /// Value at a dotted path of the resolved config, short method paths
    /// included.
    pub fn get(&self, path: &str) -> Option<Value> {
        let mut cur = Value::Table(to_table(self));
        for p in canonical_path(path).split('.') {
            cur = match cur {
                Value::Table(mut t) => t.remove(p)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hex SHA-256 of the canonical TOML rendering (the output root is left
    /// out so relocating a run does not change its identity).
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.run.out = String::new();
        let bytes = Sha256::digest(c.to_toml().as_bytes());
        let mut s = String::with_capacity(64);
        for b in bytes {
            let _ = write!(s, "{b:02x}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        let back: Config = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_and_aliases() {
        let c = Config::resolve(None, None, &["methods.acbc.rho=0.02".into(), "acbc.h=7".into(), "plant.k3=2".into()], None)
            .unwrap();
        assert_eq!(c.methods.acbc.rho, 0.02);
        assert_eq!(c.methods.acbc.h, 7);
        assert_eq!(c.plant.k3, 2.0);
        assert_eq!(c.get("acbc.h"), Some(Value::Integer(7)));
    }

    #[test]
    fn unknown_keys_are_listed() {
        let doc = "[plant]\nmass = 1.0\n[methods.acbc]\nfoo = 2\n";
        let err = Config::resolve(None, Some(doc), &["hbm.bar=1".into()], None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("plant.mass"), "{msg}");
        assert!(msg.contains("methods.acbc.foo"), "{msg}");
        assert!(msg.contains("hbm.bar"), "{msg}");
    }

    #[test]
    fn wrong_type_is_an_error() {
        assert!(Config::resolve(None, Some("[plant]\nm = \"heavy\"\n"), &[], None).is_err());
        assert!(Config::resolve(None, Some("[plant\n"), &[], None).is_err());
    }

    #[test]
    fn integer_literals_fill_float_keys() {
        let c = Config::resolve(None, Some("[forcing]\namplitude = 3\n"), &[], None).unwrap();
        assert_eq!(c.forcing.amplitude, 3.0);
    }

    #[test]
    fn seed_reaches_every_module() {
        let c = Config::resolve(None, None, &[], Some(42)).unwrap();
        assert_eq!((c.run.seed, c.plant.seed), (42, 42));
        assert_ne!(c.oracle.seed, 0);
        let d = Config::resolve(None, None, &[], Some(43)).unwrap();
        assert_ne!(c.digest(), d.digest());
    }

    #[test]
    fn digest_ignores_output_root() {
        let mut a = Config::default();
        let d0 = a.digest();
        a.run.out = "/tmp/elsewhere".into();
        assert_eq!(a.digest(), d0);
        a.plant.c = 0.2;
        assert_ne!(a.digest(), d0);
    }
}
