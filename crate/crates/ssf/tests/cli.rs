//! Command-line behaviour: exit codes, map dumps and a small end-to-end run.

use std::path::Path;
use std::process::{Command, Output};

use ssf::io::{read_recording, write_recording};
use ssf::montage::bundled;
use ssf_core::data::{segment_windows, AttentionLabel, RawRecording, Trial};

fn ssf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssf"))
        .args(args)
        .output()
        .expect("spawn ssf")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const REFS: &str = r#"preprocess.reference_channels=["M1","M2"]"#;

fn tiny_synth_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "--set",
        "synth.subjects=2",
        "--set",
        "synth.subject.duration_s=240",
        "--set",
        "synth.subject.n_trials=4",
        "--set",
        "synth.subject.noise_sigma=2",
        "--set",
        REFS,
    ];
    v.extend_from_slice(extra);
    v
}

#[test]
fn empty_window_list_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = tiny_synth_args(&["--set", "window_sizes=[]", "--out"]);
    let out_s = out.to_str().unwrap();
    args.extend([out_s, "run"]);
    let o = ssf(&args);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("window_sizes"));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ssf(&["no-such-command"])), 2);
    assert_eq!(code(&ssf(&["run", "--bogus"])), 2);
    assert_eq!(code(&ssf(&["--set", "not-an-assignment", "run"])), 2);
    assert_eq!(code(&ssf(&["--set", "typo_field=1", "run"])), 2);
}

fn constant_recording(path: &Path) {
    let m = bundled("biosemi32").unwrap();
    let n = 8 * 128;
    let rec = RawRecording::new(
        "C01",
        128.0,
        m.names().map(String::from).collect(),
        vec![vec![1.5; n]; m.len()],
        vec![
            Trial {
                start: 0,
                end: n / 2,
                label: AttentionLabel::Left,
            },
            Trial {
                start: n / 2,
                end: n,
                label: AttentionLabel::Right,
            },
        ],
    )
    .unwrap();
    write_recording(path, &rec).unwrap();
}

#[test]
fn constant_window_dumps_a_uniform_map() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("const.json");
    constant_recording(&rec);
    let prefix = dir.path().join("maps/const");
    let o = ssf(&[
        "--set",
        "montage=biosemi32",
        "--out",
        prefix.to_str().unwrap(),
        "dump-map",
        "--input",
        rec.to_str().unwrap(),
        "--window",
        "1",
        "--index",
        "3",
        "--no-preprocess",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pgm = std::fs::read_to_string(dir.path().join("maps/const.pgm")).unwrap();
    let mut lines = pgm.lines();
    assert_eq!(lines.next(), Some("P2"));
    assert_eq!(lines.next(), Some("32 32"));
    assert_eq!(lines.next(), Some("255"));
    let px: Vec<&str> = lines.flat_map(str::split_whitespace).collect();
    assert_eq!(px.len(), 32 * 32);
    assert!(px.iter().all(|p| *p == px[0]));
    let csv = std::fs::read_to_string(dir.path().join("maps/const.csv")).unwrap();
    assert_eq!(csv.lines().count(), 32);
}

#[test]
fn out_of_range_window_index_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("const.json");
    constant_recording(&rec);
    let o = ssf(&[
        "--set",
        "montage=biosemi32",
        "--out",
        dir.path().join("m").to_str().unwrap(),
        "dump-map",
        "--input",
        rec.to_str().unwrap(),
        "--window",
        "1",
        "--index",
        "100000",
        "--no-preprocess",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("100000"));
}

#[test]
fn left_lateralized_window_is_brighter_on_the_left() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut args = tiny_synth_args(&["--set", "synth.subject.noise_sigma=0.5", "--out"]);
    let data_s = data.to_str().unwrap();
    args.extend([data_s, "synth"]);
    let o = ssf(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rec_path = data.join("S01.json");
    let rec = read_recording(&rec_path).unwrap();
    let index = segment_windows(&rec, 1.0, 0.5)
        .unwrap()
        .iter()
        .position(|w| w.label == AttentionLabel::Left)
        .unwrap()
        .to_string();
    let prefix = dir.path().join("left");
    let o = ssf(&[
        "--out",
        prefix.to_str().unwrap(),
        "dump-map",
        "--input",
        rec_path.to_str().unwrap(),
        "--window",
        "1",
        "--index",
        &index,
        "--no-preprocess",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("left.csv")).unwrap();
    let (mut left, mut right) = (0.0, 0.0);
    for line in csv.lines() {
        let row: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let half = row.len() / 2;
        left += row[..half].iter().sum::<f64>();
        right += row[half..].iter().sum::<f64>();
    }
    assert!(left > right, "left {left} right {right}");
}

#[test]
fn small_run_writes_reports_and_failures_leave_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let mut args = tiny_synth_args(&[
        "--set",
        "window_sizes=[2]",
        "--set",
        "runs=1",
        "--set",
        "training.max_epochs=2",
        "--set",
        "synth.subject.envelope={}",
        "--out",
        out_s,
        "run",
    ]);
    let o = ssf(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("model,window_s,subject,accuracy\n"));
    assert_eq!(metrics.lines().count(), 1 + 2 * 2);
    assert!(out.join("aggregate.md").exists());
    assert!(out.join("paired_tests.csv").exists());
    assert!(out.join("checkpoints/ssf-cnn_w2_seed0.ckpt").exists());
    assert!(out.join("history/ssf-cnn_w2_seed0.csv").exists());
    assert!(out.join("decoders/linear_w2_S01.ckpt").exists());

    // Windows longer than any trial fail at runtime; no partial output stays.
    let failed = dir.path().join("failed");
    args.truncate(args.len() - 3);
    args.extend([
        "--set",
        "window_sizes=[90]",
        "--out",
        failed.to_str().unwrap(),
        "run",
    ]);
    let o = ssf(&args);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("split failed"));
    assert!(!failed.exists());
    assert!(!dir.path().join("failed.partial").exists());
}
