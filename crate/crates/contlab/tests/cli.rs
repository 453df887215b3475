use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn contlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CONTLAB_OUT")
        .output()
        .expect("binary runs")
}

fn run_dir(o: &Output) -> PathBuf {
    PathBuf::from(String::from_utf8(o.stdout.clone()).unwrap().trim())
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

const LINEAR: [&str; 10] = [
    "--set",
    "plant.k3=0",
    "--set",
    "hbm.h=3",
    "--set",
    "hbm.omega_start=0.5",
    "--set",
    "hbm.omega_end=1.5",
    "--set",
    "hbm.floquet_steps=0",
];

#[test]
fn malformed_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[plant\nm = 1").unwrap();
    let out = tmp.path().join("runs");
    let o = contlab(&["hbm", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let o = contlab(&["sws", "--set", "methods.sws.sped=1", "--set", "plant.mass=2"], &out);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("methods.sws.sped") && err.contains("plant.mass"), "{err}");
    assert!(!out.exists());

    let o = contlab(&["sweep"], &out);
    assert_eq!(o.status.code(), Some(1));
    let o = contlab(&["hbm", "--preset", "duffing-f9"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn hbm_run_writes_branch_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let o = contlab(&[&["hbm"], &LINEAR[..]].concat(), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    let csv = fs::read_to_string(dir.join("branch.csv")).unwrap();
    assert!(csv.starts_with(
        "index,omega,a_star,f_meas,a1,phase1,total_amp,invasiveness_rel,converged,open_loop_stable,wall_time_s\n"
    ));
    let m = manifest(&dir);
    assert_eq!(m["subcommand"], "hbm");
    assert_eq!(m["exit_status"], 0);
    let digest = m["config_digest"].as_str().unwrap();
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with(&digest[..12]));
    // Defaults the run relied on are spelled out.
    assert_eq!(m["config"]["hbm"]["newton_tol"], 1e-9);
    assert_eq!(m["config"]["methods"]["acbc"]["rho"], 0.01);
    assert_eq!(m["config"]["plant"]["k3"], 0.0);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn environment_overrides_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let env_root = tmp.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_contlab"))
        .args([&["hbm"], &LINEAR[..]].concat())
        .arg("--out")
        .arg(tmp.path().join("flag"))
        .env("CONTLAB_OUT", &env_root)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(run_dir(&o).starts_with(&env_root));
    assert!(!tmp.path().join("flag").exists());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "sts",
        "--preset",
        "duffing-f1",
        "--set",
        "plant.noise_rms=0.01",
        "--set",
        "sts.n=4",
        "--set",
        "sts.settle_periods=10",
        "--seed",
        "7",
    ];
    let a = contlab(&args, &tmp.path().join("a"));
    let b = contlab(&args, &tmp.path().join("b"));
    assert_eq!(a.status.code(), Some(0));
    let (da, db) = (run_dir(&a), run_dir(&b));
    assert_eq!(da.file_name(), db.file_name());
    assert_eq!(fs::read(da.join("branch.csv")).unwrap(), fs::read(db.join("branch.csv")).unwrap());
    assert_eq!(manifest(&da)["config"]["plant"]["seed"], 7);

    let mut other = args.to_vec();
    *other.last_mut().unwrap() = "8";
    let c = contlab(&other, &tmp.path().join("c"));
    assert_ne!(fs::read(da.join("branch.csv")).unwrap(), fs::read(run_dir(&c).join("branch.csv")).unwrap());
}

#[test]
fn flagged_points_give_partial_status() {
    let tmp = tempfile::tempdir().unwrap();
    let o = contlab(
        &[
            "scbc",
            "--preset",
            "duffing-f1",
            "--set",
            "scbc.n_a_star=2",
            "--set",
            "scbc.max_iter=1",
            "--set",
            "scbc.tol=1e-12",
            "--set",
            "scbc.settle_periods=5",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&run_dir(&o));
    assert_eq!(m["flagged"], 2);
    assert_eq!(m["point_diagnostics"].as_array().unwrap().len(), 2);
}

#[test]
fn surface_slice_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let surf = tmp.path().join("surface.csv");
    let mut text = String::from("omega,a_star,f_meas,a_meas,flag\n");
    for w in [0.8, 0.9, 1.0, 1.1, 1.2] {
        for a in [0.5, 1.0, 1.5, 2.0] {
            // Linear oscillator with m = k = 1, c = 0.1.
            let f = a * ((1.0 - w * w) * (1.0f64 - w * w) + (0.1 * w) * (0.1 * w)).sqrt();
            text += &format!("{w},{a},{f},{a},0\n");
        }
    }
    fs::write(&surf, text).unwrap();
    let o = contlab(
        &["slice", "--set", &format!("slice.input=\"{}\"", surf.display()), "--set", "slice.f_star=0.1"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    assert!(fs::read_to_string(dir.join("slice.csv")).unwrap().starts_with("polyline,omega,a_star,a\n"));
    let peak = &manifest(&dir)["summary"]["peak"];
    assert!((peak["omega"].as_f64().unwrap() - 1.0).abs() < 0.05);

    let o = contlab(&[&["hbm"], &LINEAR[..]].concat(), tmp.path());
    let reference = run_dir(&o).join("branch.csv");
    let o = contlab(
        &[
            "sts",
            "--set",
            "plant.k3=0",
            "--set",
            "sts.start=0.6",
            "--set",
            "sts.end=1.4",
            "--set",
            "sts.n=5",
            "--set",
            "sts.settle_periods=120",
        ],
        tmp.path(),
    );
    let test = run_dir(&o).join("branch.csv");
    let o = contlab(
        &[
            "compare",
            "--set",
            &format!("compare.test=\"{}\"", test.display()),
            "--set",
            &format!("compare.reference=\"{}\"", reference.display()),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&run_dir(&o));
    assert_eq!(m["summary"]["unmatched"], 0);
    assert!(m["summary"]["max_matched_rel"].as_f64().unwrap() < 0.01, "{}", m["summary"]);
}

#[test]
fn compare_with_missing_file_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("runs");
    let o = contlab(&["compare", "--set", "compare.test=\"/nonexistent.csv\""], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}
