//! End-to-end tests of the `voicesim` binary: exit codes, artifact layout,
//! reproducibility across code paths, and the machine-readable error JSON.

use std::path::Path;
use std::process::{Command, Output};

fn voicesim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voicesim"))
        .args(args)
        .current_dir(dir)
        .env_remove("VOICESIM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn simulate_small(dir: &Path) {
    let out = voicesim(
        dir,
        &[
            "simulate",
            "--scenario",
            "ideal",
            "--seed",
            "7",
            "--speakers",
            "4",
            "--segments",
            "3",
            "--dim",
            "8",
            "--out-dir",
            ".",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn evaluate_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "evaluate",
        "--scores-oo",
        "scores_oo.txt",
        "--scores-op",
        "scores_op.txt",
        "--scores-pp",
        "scores_pp.txt",
        "--utt2spk-o",
        "utt2spk_o.txt",
        "--utt2spk-p",
        "utt2spk_p.txt",
    ];
    args.extend_from_slice(extra);
    args
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

#[test]
fn simulate_reproduces_the_golden_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    assert_eq!(
        read(tmp.path(), "utt2spk_o.txt"),
        include_bytes!("golden/utt2spk_o.txt")
    );
    assert_eq!(
        read(tmp.path(), "utt2spk_p.txt"),
        include_bytes!("golden/utt2spk_p.txt")
    );
}

#[test]
fn evaluate_writes_all_artifacts_with_valid_json() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    let out = voicesim(
        tmp.path(),
        &evaluate_args(&["--out-dir", "out", "--set-name", "demo"]),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "out/metrics.json",
        "out/matrix_oo.txt",
        "out/matrix_op.txt",
        "out/matrix_pp.txt",
        "out/composite.ppm",
        "out/composite.svg",
    ] {
        assert!(tmp.path().join(name).is_file(), "{name} missing");
    }
    let json: serde_json::Value =
        serde_json::from_slice(&read(tmp.path(), "out/metrics.json")).unwrap();
    assert_eq!(json["set_name"], "demo");
    assert_eq!(json["n_speakers"], 4);
    // the ideal scenario: cross-domain scores carry no speaker information
    assert_eq!(json["deid_percent"], 100.0);
    assert_eq!(json["gvd_db"], 0.0);
    assert_eq!(json["flags"], serde_json::json!([]));
    for key in ["ddiag_oo", "ddiag_op", "ddiag_pp"] {
        assert!(json[key].is_number(), "{key} missing");
    }
    let ppm = read(tmp.path(), "out/composite.ppm");
    assert!(ppm.starts_with(b"P6\n129 129\n255\n")); // 2*4*16 + 1
}

#[test]
fn nop_inputs_give_zero_deid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = voicesim(
        tmp.path(),
        &[
            "simulate",
            "--scenario",
            "nop",
            "--seed",
            "3",
            "--speakers",
            "3",
            "--segments",
            "2",
            "--dim",
            "4",
            "--out-dir",
            ".",
        ],
    );
    assert!(out.status.success());
    let out = voicesim(tmp.path(), &evaluate_args(&["--out-dir", "out"]));
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_slice(&read(tmp.path(), "out/metrics.json")).unwrap();
    assert_eq!(json["deid_percent"], 0.0);
    assert_eq!(json["gvd_db"], 0.0);
}

#[test]
fn malformed_score_line_exits_2_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    let mut scores = String::from_utf8(read(tmp.path(), "scores_oo.txt")).unwrap();
    scores.push_str("s01_o01 s01_o02\n"); // missing score field
    let n_lines = scores.lines().count();
    std::fs::write(tmp.path().join("scores_oo.txt"), scores).unwrap();
    let out = voicesim(tmp.path(), &evaluate_args(&["--out-dir", "out"]));
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "MalformedLine");
    assert_eq!(err["line"], n_lines as u64);
}

#[test]
fn missing_input_fails_fast_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    std::fs::remove_file(tmp.path().join("scores_pp.txt")).unwrap();
    let out = voicesim(tmp.path(), &evaluate_args(&["--out-dir", "out"]));
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "MissingInput");
    // fail fast: nothing was written
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = voicesim(tmp.path(), &["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = voicesim(tmp.path(), &["simulate", "--scenario", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    let out = voicesim(tmp.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn wrong_kind_in_score_file_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    // hand the OP file where the OO set is expected
    let out = voicesim(
        tmp.path(),
        &[
            "evaluate",
            "--scores-oo",
            "scores_op.txt",
            "--scores-op",
            "scores_op.txt",
            "--scores-pp",
            "scores_pp.txt",
            "--utt2spk-o",
            "utt2spk_o.txt",
            "--utt2spk-p",
            "utt2spk_p.txt",
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "KindMismatch");
}

#[test]
fn render_reproduces_the_evaluate_composite() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    let out = voicesim(
        tmp.path(),
        &evaluate_args(&["--out-dir", "out", "--cell-size", "5"]),
    );
    assert!(out.status.success());
    let out = voicesim(
        tmp.path(),
        &[
            "render",
            "--matrix-oo",
            "out/matrix_oo.txt",
            "--matrix-op",
            "out/matrix_op.txt",
            "--matrix-pp",
            "out/matrix_pp.txt",
            "--format",
            "ppm",
            "--cell-size",
            "5",
            "--out",
            "again.ppm",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        read(tmp.path(), "out/composite.ppm"),
        read(tmp.path(), "again.ppm")
    );

    let out = voicesim(
        tmp.path(),
        &[
            "render",
            "--matrix-oo",
            "out/matrix_oo.txt",
            "--matrix-op",
            "out/matrix_op.txt",
            "--matrix-pp",
            "out/matrix_pp.txt",
            "--format",
            "svg",
            "--out",
            "composite.svg",
        ],
    );
    assert!(out.status.success());
    let svg = String::from_utf8(read(tmp.path(), "composite.svg")).unwrap();
    assert!(svg.starts_with("<svg "));
}

#[test]
fn calibrate_then_pre_calibrated_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    let out = voicesim(tmp.path(), &evaluate_args(&["--out-dir", "raw"]));
    assert!(out.status.success());
    for kind in ["oo", "op", "pp"] {
        let out = voicesim(
            tmp.path(),
            &[
                "calibrate",
                "--scores",
                &format!("scores_{kind}.txt"),
                "--utt2spk-o",
                "utt2spk_o.txt",
                "--utt2spk-p",
                "utt2spk_p.txt",
                "--out",
                &format!("cal_{kind}.txt"),
            ],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = voicesim(
        tmp.path(),
        &[
            "evaluate",
            "--scores-oo",
            "cal_oo.txt",
            "--scores-op",
            "cal_op.txt",
            "--scores-pp",
            "cal_pp.txt",
            "--utt2spk-o",
            "utt2spk_o.txt",
            "--utt2spk-p",
            "utt2spk_p.txt",
            "--pre-calibrated",
            "--out-dir",
            "pre",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "metrics.json",
        "matrix_oo.txt",
        "matrix_op.txt",
        "matrix_pp.txt",
        "composite.ppm",
    ] {
        assert_eq!(
            read(tmp.path(), &format!("raw/{name}")),
            read(tmp.path(), &format!("pre/{name}")),
            "{name} differs between the raw and pre-calibrated runs"
        );
    }
}

#[test]
fn single_class_score_set_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    // keep only same-speaker OO trials: calibration has nothing to contrast
    let scores = String::from_utf8(read(tmp.path(), "scores_oo.txt")).unwrap();
    let targets: String = scores
        .lines()
        .filter(|l| {
            let mut it = l.split_whitespace();
            let a = it.next().unwrap();
            let b = it.next().unwrap();
            a[..3] == b[..3]
        })
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(tmp.path().join("scores_oo.txt"), targets).unwrap();
    let out = voicesim(tmp.path(), &evaluate_args(&["--out-dir", "out"]));
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "DegenerateLabels");
}

#[test]
fn out_dir_env_var_is_the_default() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_voicesim"))
        .args([
            "simulate",
            "--scenario",
            "nop",
            "--seed",
            "1",
            "--speakers",
            "2",
            "--segments",
            "2",
            "--dim",
            "2",
        ])
        .current_dir(tmp.path())
        .env("VOICESIM_OUT_DIR", tmp.path().join("from_env"))
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(tmp.path().join("from_env/utt2spk_o.txt").is_file());
}

#[test]
fn evaluate_is_deterministic_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    simulate_small(tmp.path());
    for dir in ["a", "b"] {
        let out = voicesim(tmp.path(), &evaluate_args(&["--out-dir", dir]));
        assert!(out.status.success());
    }
    for name in [
        "metrics.json",
        "matrix_oo.txt",
        "composite.ppm",
        "composite.svg",
    ] {
        assert_eq!(
            read(tmp.path(), &format!("a/{name}")),
            read(tmp.path(), &format!("b/{name}"))
        );
    }
}
