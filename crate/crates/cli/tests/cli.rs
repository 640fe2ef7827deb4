use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mgnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV artifact, after checking the schema comment.
fn csv_rows(path: &Path, schema: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# mgnet {schema} schema v1"));
    lines
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn constant_target_passes_with_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &["verify", "--target", "constant:3", "-L", "3", "-o", "run"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = dir.path().join("run");
    for f in [
        "bound_report.csv",
        "modulus.csv",
        "net.json",
        "params.json",
        "summary.json",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let s = json(&run.join("summary.json"));
    assert_eq!(s["all_pass"], true);
    assert_eq!(s["status"], "ok");
    for l in s["levels"].as_array().unwrap() {
        assert!(l["measured_error"].as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn ramp_rows_respect_the_lipschitz_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "verify", "--target", "ramp", "--d", "1", "-N", "2", "-L", "6", "--p", "2", "-o", "run",
        ],
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("run/bound_report.csv"), "bound_report");
    assert_eq!(rows.len(), 7);
    for (l, r) in rows.iter().enumerate() {
        let err: f64 = r[2].parse().unwrap();
        assert!(err <= 3.0 * 0.5f64.powi(l as i32), "level {l}: {err}");
    }
}

#[test]
fn indicator_bound_follows_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "verify",
            "--target",
            "indicator",
            "--p",
            "1",
            "-L",
            "5",
            "-o",
            "run",
        ],
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("run/bound_report.csv"), "bound_report");
    // omega_1(t) = min(t, 1/2) for the jump at 1/2, times (2d+1) and the 1.1 headroom
    for (l, r) in rows.iter().enumerate() {
        let bound: f64 = r[4].parse().unwrap();
        let expect = 3.3 * 0.5f64.powi(l as i32).min(0.5);
        assert!(
            (bound - expect).abs() <= 0.05 * expect,
            "level {l}: {bound} vs {expect}"
        );
    }
}

#[test]
fn equal_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str| {
        vec![
            "verify",
            "--target",
            "sine:1",
            "--d",
            "2",
            "-L",
            "2",
            "--p",
            "1",
            "--decoder",
            "table",
            "-o",
            o,
        ]
    };
    assert!(mgnet(dir.path(), &args("a")).status.success());
    assert!(mgnet(dir.path(), &args("b")).status.success());
    for f in ["bound_report.csv", "modulus.csv", "net.json", "params.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "target = \"ramp\"\nd = 1\nN = 2\nL = 2\np = 2.0\ndelta = 1e-4\ndecoder = \"sine\"\nout = \"file-out\"\n",
    )
    .unwrap();
    let out = mgnet(
        dir.path(),
        &["verify", "-c", "exp.toml", "-L", "1", "-o", "flag-out"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&dir.path().join("flag-out/summary.json"));
    assert_eq!(s["config"]["L"], 1);
    assert_eq!(s["config"]["delta"], 1e-4);
    assert_eq!(s["levels"][1]["decoder"], "sine");
    let p = json(&dir.path().join("flag-out/params.json"));
    assert_eq!(p["width"], 7);
    assert_eq!(p["exported_parameter_count"], p["parameter_count"]);
    assert!(!dir.path().join("file-out").exists());
}

#[test]
fn unknown_config_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "target = \"ramp\"\ndepht = 3\n",
    )
    .unwrap();
    let out = mgnet(dir.path(), &["verify", "-c", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("depht"));
}

#[test]
fn invalid_fields_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "verify", "--target", "ramp", "--d", "0", "-N", "1", "--p", "0.5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for f in ["`d`", "`N`", "`p`"] {
        assert!(err.contains(f), "{err}");
    }
}

#[test]
fn failing_check_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // a Hölder constant far too small for the ramp
    let out = mgnet(
        dir.path(),
        &[
            "verify", "--target", "ramp", "-L", "3", "--bound", "holder", "--alpha", "1",
            "--lambda", "0.01", "-o", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        json(&dir.path().join("run/summary.json"))["all_pass"],
        false
    );
}

#[test]
fn build_failure_flags_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "verify",
            "--target",
            "ramp",
            "-L",
            "4",
            "--decoder",
            "sine",
            "--decoder-eps",
            "1e-9",
            "-o",
            "run",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let s = json(&dir.path().join("run/summary.json"));
    assert_eq!(s["status"], "build-failed");
    assert_eq!(s["partial"], true);
    assert!(dir.path().join("run/net.json").exists());
}

#[test]
fn single_point_sweep_matches_verify() {
    let dir = tempfile::tempdir().unwrap();
    let run = mgnet(
        dir.path(),
        &[
            "verify", "--target", "ramp", "-N", "2", "-L", "3", "--p", "1", "-o", "one",
        ],
    );
    assert!(run.status.success());
    let sweep = mgnet(
        dir.path(),
        &[
            "sweep",
            "--targets",
            "ramp",
            "--n-list",
            "2",
            "--depth-list",
            "3",
            "--p-list",
            "1",
            "-o",
            "sw",
        ],
    );
    assert!(sweep.status.success());
    let a = csv_rows(&dir.path().join("one/bound_report.csv"), "bound_report");
    let b = csv_rows(&dir.path().join("sw/sweep.csv"), "sweep");
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        // level, t, measured_error, omega, bound, tolerance, margin, pass
        assert_eq!(&x[..], &y[5..13]);
    }
}

#[test]
fn larger_n_decays_faster_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "sweep",
            "--targets",
            "ramp",
            "--n-list",
            "2,3",
            "--depth-list",
            "3",
            "--p-list",
            "2",
            "-o",
            "sw",
        ],
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("sw/sweep.csv"), "sweep");
    assert_eq!(rows.len(), 8);
    let err = |r: &Vec<String>| r[7].parse::<f64>().unwrap();
    for l in 1..4 {
        assert_eq!(rows[l][1], "2");
        assert_eq!(rows[4 + l][1], "3");
        assert!(err(&rows[4 + l]) < err(&rows[l]));
    }
}

#[test]
fn empty_sweep_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(dir.path(), &["sweep", "--targets", "ramp", "--p-list", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_records_failed_runs_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "sweep",
            "--targets",
            "banana,ramp",
            "--n-list",
            "2",
            "--depth-list",
            "2",
            "--p-list",
            "1",
            "-o",
            "sw",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let rows = csv_rows(&dir.path().join("sw/sweep.csv"), "sweep");
    assert_eq!(rows[0][4], "error");
    assert!(rows[1..].iter().all(|r| r[4] == "ok"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn exported_weights_reproduce_readouts() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "build",
            "--target",
            "ramp",
            "-L",
            "1",
            "--decoder",
            "sine",
            "--delta",
            "0.01",
            "-o",
            "b",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = mgnet(
        dir.path(),
        &[
            "export-weights",
            "--net",
            "b/net.json",
            "--output",
            "w.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let net = mgnet::MultigradeNet::read(&dir.path().join("b/net.json")).unwrap();
    let stack = mgnet::LayerStack::read(&dir.path().join("w.json")).unwrap();
    assert_eq!(stack.width, 7);
    for i in 0..100 {
        let x = [i as f64 / 99.0];
        let a = net.readouts(&x).unwrap();
        let b = mgnet::multigrade::stack_readouts(&stack, &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6);
        }
    }
}

#[test]
fn table_nets_cannot_be_exported() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &["export-weights", "--target", "ramp", "-L", "2", "-o", "x"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("table decoder"));
}

#[test]
fn modulus_subcommand_reproduces_indicator_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "modulus",
            "--target",
            "indicator",
            "--t",
            "0.1,0.25",
            "--norm",
            "1,2",
        ],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let (t, p, v): (f64, f64, f64) = (
            r[1].parse().unwrap(),
            r[2].parse().unwrap(),
            r[3].parse().unwrap(),
        );
        let exact = t.powf(1.0 / p);
        assert!((v - exact).abs() <= 0.05 * exact);
    }
}

#[test]
fn box_domain_runs_through_rescaling() {
    let dir = tempfile::tempdir().unwrap();
    let out = mgnet(
        dir.path(),
        &[
            "verify",
            "--target",
            "ramp",
            "--domain",
            "0:2",
            "--bound",
            "pointwise-holder",
            "-L",
            "4",
            "--p",
            "1",
            "-o",
            "run",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&dir.path().join("run/bound_report.csv"), "bound_report");
    for (l, r) in rows.iter().enumerate() {
        let err: f64 = r[2].parse().unwrap();
        assert!(err <= 12.0 * 0.5f64.powi(l as i32));
    }
}
