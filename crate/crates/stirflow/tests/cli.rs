use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn stirflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stirflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SHORT_RUN: &str = r#"{
  "protocol": { "word": "1 -2" },
  "integrator": { "steps_per_period": 2000 },
  "diagnostics": {
    "periods": 2,
    "curve": {
      "shape": { "kind": "segment", "start": [-0.25, -0.95], "end": [-0.25, 0.95] },
      "delta": 0.05,
      "refinements_per_period": 10
    },
    "gradient": { "vorticity": { "kind": "linear-x" }, "grid": 6 }
  }
}"#;

#[test]
fn classify_reports_the_golden_stretch() {
    let out = stirflow(&["--json", "classify", "1 -2"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["trace"], 3);
    assert_eq!(v["class"], "pseudo-Anosov");
    let l = v["log_lambda"].as_f64().unwrap();
    assert!((l - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
}

#[test]
fn malformed_words_exit_with_input_error() {
    let out = stirflow(&["classify", "1 x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unbalanced_circulations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{ "protocol": { "word": "1 -2" },
             "flow": { "vorticity": 0.0, "circulations": [0.1, 0.0, 0.0, 0.0] } }"#,
    );
    let out = stirflow(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn a_hold_protocol_meets_its_control_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "hold.json",
        r#"{
  "protocol": { "moves": [ { "kind": "hold", "duration": 2.0 } ] },
  "integrator": { "steps_per_period": 100 },
  "diagnostics": {
    "periods": 4,
    "curve": { "shape": { "kind": "segment", "start": [-0.25, -0.9], "end": [-0.25, 0.9] } },
    "thresholds": { "max_curve_rate": 0.05 }
  }
}"#,
    );
    let out = stirflow(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn an_unmet_threshold_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "hold.json",
        r#"{
  "protocol": { "moves": [ { "kind": "hold" } ] },
  "integrator": { "steps_per_period": 50 },
  "diagnostics": {
    "periods": 4,
    "curve": { "shape": { "kind": "segment", "start": [-0.25, -0.9], "end": [-0.25, 0.9] } },
    "thresholds": { "min_curve_rate": 0.5 }
  }
}"#,
    );
    let out = stirflow(&[
        "run",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SHORT_RUN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = stirflow(&[
            "--json",
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "braid.json",
        "residuals.csv",
        "curve.csv",
        "gradient.csv",
        "summary.json",
    ] {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs");
    }
    let summary: Value =
        serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    let hash = summary["provenance"]["config_hash"]
        .as_str()
        .unwrap()
        .to_owned();
    assert_eq!(hash.len(), 64);

    let changed = write(
        dir.path(),
        "changed.json",
        &SHORT_RUN.replace("\"steps_per_period\": 2000", "\"steps_per_period\": 2400"),
    );
    let c = dir.path().join("c");
    let o = stirflow(&["run", "--config", &changed, "--out", c.to_str().unwrap()]);
    assert!(o.status.success());
    let other: Value = serde_json::from_slice(&fs::read(c.join("summary.json")).unwrap()).unwrap();
    assert_ne!(other["provenance"]["config_hash"].as_str().unwrap(), hash);
}

#[test]
fn curve_csv_has_one_row_per_period() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", SHORT_RUN);
    let out = dir.path().join("m");
    let o = stirflow(&[
        "measure",
        "curve",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,length,vertices"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!((rows[0][1] - 1.9).abs() < 1e-12);
    assert!(rows[2][1] > rows[1][1] && rows[1][1] > rows[0][1]);
}

#[test]
fn protocol_extract_reads_back_the_word() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "p.json",
        r#"{ "moves": [
              { "kind": "swap", "slot": 1, "handedness": "ccw" },
              { "kind": "hold", "duration": 0.5 },
              { "kind": "swap", "slot": 2, "handedness": "cw" } ] }"#,
    );
    let o = stirflow(&["--json", "protocol", "extract", &p]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["word"], "1 -2");
}

#[test]
fn advect_writes_tracer_positions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "hold.json",
        r#"{ "protocol": { "moves": [ { "kind": "hold" } ] }, "integrator": { "steps_per_period": 20 } }"#,
    );
    let tracers = write(dir.path(), "t.csv", "x,y\n0.1,0.7\n-0.3,-0.4\n");
    let out = dir.path().join("adv");
    let o = stirflow(&[
        "advect",
        "--config",
        &cfg,
        "--tracers",
        &tracers,
        "--periods",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("tracers.csv")).unwrap();
    // A quiescent hold leaves every tracer in place.
    assert!(text.contains("2,0,0.1,0.7"), "{text}");
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}
