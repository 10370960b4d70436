//! End-to-end tests of the `vortexiter` binary: exit codes, output files,
//! and manifest-driven reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortexiter"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("read {}: {e}", path.as_ref().display()))
}

fn summary_value(dir: &Path, key: &str) -> String {
    let text = read(dir.join("summary.csv"));
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(&format!("{key},")) {
            return rest.to_string();
        }
    }
    panic!("summary.csv has no key {key}:\n{text}");
}

#[test]
fn malformed_config_lines_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "n=16\nthis line has no equals\n").unwrap();
    let out = run(&[
        "iterate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    let msg = stderr(&out);
    assert!(msg.contains("bad.cfg:2"), "no file:line in {msg}");
    assert!(msg.contains("expected key=value"), "no diagnosis in {msg}");
}

#[test]
fn unknown_sweep_name_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify",
        "--sweep",
        "nonsense",
        "--out",
        dir.path().join("v").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("pointwise|integrals|envelopes|all"));
}

#[test]
fn missing_drift_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("k");
    let out = run(&[
        "kernel",
        "--drift",
        "file",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("drift_field"));

    let out = run(&[
        "kernel",
        "--drift",
        "file",
        "--set",
        "drift_field=/definitely/not/here.vf3d",
        "--set",
        "n_paths=10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("not/here.vf3d"));
}

#[test]
fn zero_amplitude_iteration_converges_in_one_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("it");
    let out = run(&[
        "iterate",
        "--preset",
        "taylor-green",
        "--amplitude",
        "0",
        "--n",
        "16",
        "--dt",
        "0.005",
        "--T",
        "0.05",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(summary_value(&out_dir, "converged"), "true");
    assert_eq!(summary_value(&out_dir, "iterations"), "1");
    assert!(out_dir.join("manifest").exists());
    assert!(out_dir.join("iteration.csv").exists());
    assert!(out_dir.join("vorticity_0000.vf3d").exists());
}

#[test]
fn drift_free_kernel_reproduces_the_analytic_density_with_zero_variance() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("k");
    let out = run(&[
        "kernel",
        "--drift",
        "zero",
        "--method",
        "mc",
        "--n-paths",
        "1000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("all_pass=true"));
    let table = read(out_dir.join("comparison.csv"));
    let mut rows = 0;
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        // Columns: mc_value at 4, mc_std_err at 5, reference at 7, pass last.
        assert_eq!(cols[4], cols[7], "estimator should equal the reference");
        assert_eq!(cols[5].parse::<f64>().unwrap(), 0.0);
        assert_eq!(*cols.last().unwrap(), "true");
        rows += 1;
    }
    assert_eq!(rows, 5);
    assert_eq!(summary_value(&out_dir, "all_pass"), "true");
}

#[test]
fn manifest_reruns_reproduce_estimates_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let out = run(&[
        "kernel",
        "--drift",
        "shear",
        "--method",
        "mc",
        "--amplitude",
        "0.2",
        "--n-paths",
        "2000",
        "--seed",
        "7",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let second = dir.path().join("b");
    let out = run(&[
        "kernel",
        "--config",
        first.join("manifest").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    assert_eq!(
        read(first.join("estimates_mc.csv")),
        read(second.join("estimates_mc.csv"))
    );
    // The manifests agree except for the overridden output directory.
    let strip = |text: String| -> String {
        text.lines()
            .filter(|l| !l.starts_with("out="))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(read(first.join("manifest"))),
        strip(read(second.join("manifest")))
    );
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "kernel".to_string(),
            "--drift".into(),
            "taylor-green".into(),
            "--n-paths".into(),
            "1500".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let a = dir.path().join("one");
    let out = bin()
        .args(args(&a))
        .env("VORTEXITER_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let b = dir.path().join("two");
    let out = bin()
        .args(args(&b))
        .env("VORTEXITER_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert_eq!(
        read(a.join("estimates_mc.csv")),
        read(b.join("estimates_mc.csv"))
    );
}

#[test]
fn pointwise_verify_sweep_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("v");
    let out = run(&["verify", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let table = read(out_dir.join("bounds.csv"));
    assert!(table.lines().count() > 40);
    assert!(!table.contains(",false"));
    assert_eq!(summary_value(&out_dir, "all_pass"), "true");
}

#[test]
fn snapshots_round_trip_through_the_fields_converter() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("it");
    let out = run(&[
        "iterate",
        "--preset",
        "taylor-green",
        "--amplitude",
        "0.05",
        "--n",
        "16",
        "--dt",
        "0.01",
        "--T",
        "0.02",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let snapshot = out_dir.join("vorticity_0000.vf3d");
    let csv = dir.path().join("dump.csv");
    let out = run(&[
        "fields",
        snapshot.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("n: 16"));
    assert!(text.contains("components: 3"));

    let dump = read(&csv);
    let mut lines = dump.lines();
    assert_eq!(lines.next().unwrap(), "i1,i2,i3,x1,x2,x3,c0,c1,c2");
    assert_eq!(dump.lines().count(), 1 + 16 * 16 * 16);
}
