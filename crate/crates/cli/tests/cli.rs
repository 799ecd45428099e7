// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use tempcomp::encoder::Checkpoint;
use tempcomp::ingestion::{serialize, Delimiter, LabelMap};
use tempcomp::synthetic::{generate, make_classification_suite, mean_shift, Generated};
use tempcomp_cli::format_ground_truth;

fn tempcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempcomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
}

fn without_timing(report: &str) -> &str {
    report.split("\ntiming:\n").next().unwrap()
}

fn write_archive(dir: &Path, name: &str, items: &[Generated]) -> (String, String) {
    let mut labels = LabelMap::default();
    labels.id_of(0);
    labels.id_of(1);
    let series: Vec<_> = items.iter().map(|g| g.series.clone()).collect();
    let data = dir.join(format!("{name}.tsv"));
    std::fs::write(&data, serialize(&series, &labels, Delimiter::Tab)).unwrap();
    let truth: Vec<_> = items.iter().map(|g| g.truth.clone()).collect();
    let gt = dir.join(format!("{name}.gt"));
    std::fs::write(&gt, format_ground_truth(&truth)).unwrap();
    (
        data.to_string_lossy().into_owned(),
        gt.to_string_lossy().into_owned(),
    )
}

fn two_segment_file(dir: &Path) -> (String, String) {
    let items: Vec<_> = (0..5)
        .map(|seed| {
            let mut g = generate(&mean_shift(200, 3.0, seed)).unwrap();
            g.series.label = Some(0);
            g
        })
        .collect();
    write_archive(dir, "shift", &items)
}

#[test]
fn segment_with_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (input, gt) = two_segment_file(dir.path());
    let o = tempcomp(&["segment", "--input", &input, "--gt", &gt]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout(&o);
    assert_eq!(field(&r, "schema_version"), Some("1"));
    let covering: f64 = field(&r, "covering_mean").unwrap().parse().unwrap();
    assert!(covering >= 0.9, "{covering}");
    assert!(r.contains("\nconfig:\n  - scales = grid\n"));
}

#[test]
fn segment_without_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = two_segment_file(dir.path());
    let out = dir.path().join("report.txt");
    let o = tempcomp(&["segment", "--input", &input, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let r = std::fs::read_to_string(&out).unwrap();
    assert!(field(&r, "covering_mean").is_none());
    assert_eq!(r.matches("cuts=[").count(), 5);

    let o = tempcomp(&["segment", "--input", &input, "--format", "csv", "--k", "3"]);
    let csv = stdout(&o);
    assert!(csv.starts_with("id,length,segments,cuts\n"));
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("3")));
}

#[test]
fn input_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_input = dir.path().join("bad.tsv");
    std::fs::write(&bad_input, "x\t1.0\t2.0\n").unwrap();
    let o = tempcomp(&["segment", "--input", bad_input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1, column 1"));

    let (input, _) = two_segment_file(dir.path());
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "smoothing_window = five\n").unwrap();
    let out = dir.path().join("never.txt");
    let o = tempcomp(&[
        "segment",
        "--input",
        &input,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());

    let o = tempcomp(&["bench", "--length", "15", "--reps", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_reports_timing() {
    let o = tempcomp(&["bench", "--length", "300", "--reps", "3"]);
    assert!(o.status.success());
    let r = stdout(&o);
    assert_eq!(field(&r, "scales_used"), Some("15"));
    assert!(r.contains("\ntiming:\n  median_ms: "));
}

#[test]
fn train_is_reproducible_and_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let suite = make_classification_suite(3);
    let (train, _) = write_archive(dir.path(), "train", &suite.train[..24]);
    let (test, _) = write_archive(dir.path(), "test", &suite.test[..10]);
    let cfg = dir.path().join("small.cfg");
    std::fs::write(
        &cfg,
        "# quick run\nhidden_size = 8\ndense_size = 8\nmax_epochs = 6\npatience = 2\nphase_boundary = 3\nval_fraction = 0.2\n",
    )
    .unwrap();
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "train",
            "--train",
            &train,
            "--test",
            &test,
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = tempcomp(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let ckpt = out.with_extension("ckpt");
        (
            std::fs::read_to_string(&out).unwrap(),
            std::fs::read(ckpt).unwrap(),
        )
    };
    let (a, ckpt_a) = run("a.txt", &[]);
    let (b, ckpt_b) = run("a.txt", &[]);
    assert_eq!(without_timing(&a), without_timing(&b));
    assert_eq!(ckpt_a, ckpt_b);
    let ck = Checkpoint::from_bytes(&ckpt_a).unwrap();
    assert_eq!(ck.seed, 5);
    assert_eq!(ck.metadata["hidden_size"], "8");
    assert_eq!(field(&a, "validation_series"), Some("5"));
    assert!(field(&a, "test_accuracy").is_some());
    assert!(
        a.contains("epoch=6 lambda1=2 lambda2=1") || field(&a, "stopped_early") == Some("true")
    );

    let (c, _) = run("c.txt", &["--lambda2", "0"]);
    assert!(field(&c, "note").unwrap().contains("probe_accuracy"));
    assert!(c.contains("lambda2=0 "));
    assert!(!c.contains("lambda2=1 "));
}
