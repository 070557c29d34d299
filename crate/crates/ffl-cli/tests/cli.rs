//! End-to-end tests of the `ffl` binary: exit codes, report contents and
//! byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ffl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffl"))
        .args(args)
        .env_remove("FFL_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const BASE: &str = r#"
[grid]
nx = 16
ntheta = 16
[time]
T = 0.04
dt = 0.004
snap_every = 5
[heat]
u0 = "sincos"
amplitude = 0.5
[tolerances]
delta_grad = 1e-7
s_gate = 1e-4
harnack_slack = 10.0
"#;

fn write_config(dir: &Path, norm: &str, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "output_dir = \"{}\"\nseed = 7\n[norm]\n{norm}\n{BASE}{extra}",
        dir.join("out").display()
    );
    fs::write(&path, text).unwrap();
    path
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn tensors_of_a_locally_minkowski_norm() {
    let o = ffl(&["tensors", "--norm", "quartic:0.1", "--x", "1,-2", "--theta", "0.3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["request"]["norm"], "quartic:0.1");
    let f = v["f"].as_f64().unwrap();
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let expect = (1.0 + 0.1 * (c.powi(4) + s.powi(4))).sqrt();
    assert!((f - expect).abs() < 1e-14);
    for key in ["spray", "ric_inf", "s_curvature"] {
        let flat: Vec<f64> = flatten(&v[key]);
        assert!(flat.iter().all(|x| x.abs() < 1e-12), "{key} = {flat:?}");
    }
    assert!(v["ricci"]["ric"].as_f64().unwrap().abs() < 1e-12);
    // C_y(y, ., .) = 0.
    let cartan = &v["cartan"];
    for j in 0..2 {
        for k in 0..2 {
            let cy = c * cartan[0][j][k].as_f64().unwrap() + s * cartan[1][j][k].as_f64().unwrap();
            assert!(cy.abs() < 1e-14);
        }
    }
}

fn flatten(v: &serde_json::Value) -> Vec<f64> {
    match v {
        serde_json::Value::Array(a) => a.iter().flat_map(flatten).collect(),
        other => vec![other.as_f64().unwrap()],
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(code(&ffl(&["flow", "--config", missing.to_str().unwrap()])), 2);
    assert_eq!(
        code(&ffl(&["tensors", "--norm", "bogus", "--x", "0,0", "--theta", "0"])),
        2
    );
    assert_eq!(
        code(&ffl(&[
            "tensors",
            "--norm",
            "quartic:-0.9",
            "--x",
            "0,0",
            "--theta",
            "0"
        ])),
        2
    );
    let bad = write_config(tmp.path(), "name = \"euclidean\"", "[flow]\nangular_modes = 8\n");
    assert_eq!(code(&ffl(&["flow", "--config", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&ffl(&["no-such-command"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_ffl"))
        .args(["selftest"])
        .env("FFL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn flat_flow_and_harnack_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "name = \"euclidean\"", "");
    let o = ffl(&["flow", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with(&format!("# ffl {}\n# config ", env!("CARGO_PKG_VERSION"))));
    let rows = data_rows(&summary);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let k1: f64 = r[4].parse().unwrap();
        let k2: f64 = r[5].parse().unwrap();
        assert!(k1 < 1e-20 && k2 < 1e-20);
    }

    let o = ffl(&[
        "verify-harnack",
        "--traj",
        out.to_str().unwrap(),
        "--theta",
        "1.5",
        "--theta",
        "2",
        "--eps",
        "1",
        "--random-pairs",
        "4",
        "--pair",
        "0,0,1,3,5,2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("harnack_report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["request"]["seed"], 7);
    assert_eq!(report["integrated"].as_array().unwrap().len(), 5);
    let margins = data_rows(&fs::read_to_string(out.join("harnack_margins.csv")).unwrap());
    // One interior snapshot (centered time difference) times two thetas.
    assert_eq!(margins.len(), 2);
    assert!(margins.iter().all(|r| r[6] == "true"));

    // Domain errors in the request exit 2; a zero slack still passes here
    // because the flat bound is loose.
    assert_eq!(
        code(&ffl(&[
            "verify-harnack",
            "--traj",
            out.to_str().unwrap(),
            "--theta",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&ffl(&[
            "verify-harnack",
            "--traj",
            out.to_str().unwrap(),
            "--theta",
            "2",
            "--random-pairs",
            "2"
        ])),
        2
    );
    assert_eq!(
        code(&ffl(&[
            "verify-harnack",
            "--traj",
            out.to_str().unwrap(),
            "--theta",
            "2",
            "--slack",
            "0"
        ])),
        0
    );
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "name = \"quartic\"\nparams = [0.1]", "");
    let mut snapshots = Vec::new();
    for (sub, threads) in [("a", "1"), ("b", "3")] {
        let dir = tmp.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_ffl"))
            .args([
                "heat",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.to_str().unwrap(),
            ])
            .env("FFL_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        snapshots.push(
            files
                .iter()
                .map(|p| (p.file_name().unwrap().to_owned(), fs::read(p).unwrap()))
                .collect::<Vec<_>>(),
        );
    }
    // The output directory is part of the embedded config, so compare
    // after normalizing it.
    let norm = |b: &[u8], sub: &str| {
        String::from_utf8_lossy(b)
            .replace(tmp.path().join(sub).to_str().unwrap(), "<out>")
            .into_bytes()
    };
    assert_eq!(snapshots[0].len(), snapshots[1].len());
    for ((na, a), (nb, b)) in snapshots[0].iter().zip(&snapshots[1]) {
        assert_eq!(na, nb);
        if na.to_string_lossy().ends_with(".bin") {
            assert_eq!(a, b, "{na:?}");
        } else {
            assert_eq!(norm(a, "a"), norm(b, "b"), "{na:?}");
        }
    }
}

#[test]
fn bochner_check_reports_and_gates() {
    let args = [
        "bochner-check",
        "--norm",
        "riemannian_conformal:0.2",
        "--u",
        "sincos",
        "--amplitude",
        "0.1",
        "--nx",
        "32",
        "--ntheta",
        "16",
        "--delta-grad",
        "1e-7",
    ];
    let o = ffl(&args);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["residual_core"].as_f64().unwrap() < 1e-3);
    assert!(v["trace_inequality_min"].as_f64().unwrap() >= -1e-12);
    assert_eq!(o.stdout, ffl(&args).stdout);
    let mut strict = args.to_vec();
    strict.extend(["--tol", "1e-12"]);
    assert_eq!(code(&ffl(&strict)), 1);
}

#[test]
fn flow_breakdown_exits_3_and_keeps_the_prefix() {
    // Without the angular filter roundoff in high fiber modes grows until
    // strong convexity fails.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("brk.toml");
    fs::write(
        &cfg,
        format!(
            r#"output_dir = "{}"
seed = 1
[norm]
name = "riemannian_conformal"
params = [0.2]
[grid]
nx = 64
ntheta = 16
[time]
T = 0.05
dt = 0.001
snap_every = 2
[heat]
u0 = "sincos"
amplitude = 0.5
[tolerances]
delta_grad = 1e-7
s_gate = 1e-4
harnack_slack = 10.0
"#,
            tmp.path().join("out").display()
        ),
    )
    .unwrap();
    let o = ffl(&["flow", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "partial");
    assert!(!m["snapshots"].as_array().unwrap().is_empty());
}

#[test]
fn selftest_passes() {
    let o = ffl(&["selftest"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("[PASS]")));
}
