use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "model.kappa = -1
model.beta_inf = 1
model.beta_minus = 0.5
model.beta_plus = 2
grid.nx = 8
grid.np = 32
solver.dt = 1e-3
solver.t_end = 0.3
output.sample_interval = 0.05
";

fn qkfp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkfp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_the_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.conf", SMALL);
    let out = dir.path().join("out");
    let o = qkfp(&["--quiet", "--config", &cfg, "--out", out.to_str().unwrap(), "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["diagnostics.csv", "fit.json", "final_snapshot.csv", "decay.svg", "entropy.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,mass,H_abs,H_rel,H_rel_pi,D,E,dist_w,dist_pi,dist_macro,l1_pair,floor_events,bound_violation"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 13);
        for (i, c) in cells.iter().enumerate() {
            if i == 10 {
                assert!(c.is_empty(), "l1_pair without a companion");
            } else {
                assert!(c.parse::<f64>().unwrap().is_finite());
            }
        }
    }
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    for k in ["lambda", "c", "r_squared", "window", "C3", "C4", "C6", "C7", "delta", "config"] {
        assert!(fit.get(k).is_some(), "fit.json lacks {k}");
    }
    assert_eq!(fit["config"]["grid.np"], 32);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.conf", SMALL);
    let mut csv = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = qkfp(&["--quiet", "--config", &cfg, "--out", out.to_str().unwrap(), "run"]);
        assert!(o.status.success());
        csv.push(fs::read(out.join("diagnostics.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(qkfp(&["--quiet", "run"]).status.code(), Some(2));
    let bad = write_config(dir.path(), "bad.conf", &format!("{SMALL}grid.bogus = 1\n"));
    let o = qkfp(&["--quiet", "--config", &bad, "--out", out, "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `grid.bogus`"));
    let bose = SMALL.replace("kappa = -1", "kappa = 1").replace("beta_plus = 2", "beta_plus = 3");
    let bose = write_config(dir.path(), "bose.conf", &bose);
    assert_eq!(qkfp(&["--quiet", "--config", &bose, "run"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "s.conf", SMALL);
    assert_eq!(
        qkfp(&["--quiet", "--config", &cfg, "--out", out, "contract"]).status.code(),
        Some(2),
        "contract without a companion"
    );
    assert_eq!(qkfp(&["--quiet", "equilibrium", "--rows", "3"]).status.code(), Some(0));
}

#[test]
fn contract_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}pair.kind = local_equilibrium\npair.beta_profile = 1.5 + 0.1*sin(2*pi*x)\n");
    let cfg = write_config(dir.path(), "pair.conf", &text);
    let out = dir.path().join("out");
    let o = qkfp(&["--quiet", "--config", &cfg, "--out", out.to_str().unwrap(), "contract"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("contract.json")).unwrap()).unwrap();
    assert!(rep["max_ratio"].as_f64().unwrap() <= 1.0 + 1e-12);
    assert_eq!(rep["ordered"], true);

    let o = qkfp(&[
        "--quiet",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "check",
        "--snapshot",
        out.join("final_snapshot.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("check.json")).unwrap()).unwrap();
    assert_eq!(rep["passed"], true);
    assert!(rep["entries"].as_array().unwrap().len() >= 5);
}

#[test]
fn sweep_delta_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.conf", SMALL);
    let out = dir.path().join("out");
    let o = qkfp(&[
        "--quiet",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "sweep-delta",
        "--deltas",
        "0.1,0.5,1",
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let o = qkfp(&["--quiet", "--config", &cfg, "--out", out.to_str().unwrap(), "sweep-delta", "--deltas", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}
