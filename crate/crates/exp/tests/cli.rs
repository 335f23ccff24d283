use std::path::Path;
use std::process::{Command, Output};

fn rpmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpmix"))
        .args(args)
        .output()
        .expect("run rpmix")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

#[test]
fn help_documents_csv_columns() {
    let o = rpmix(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in [
        "kind,<group columns>,trial,seed,<measures>",
        "projected_eccentricity",
        "regular_success",
        "pca_low_separation",
        "iteration,loglik",
        "label,predicted",
    ] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
    let o = rpmix(&["experiment", "--help"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fig9_clusters_raw.csv"));
}

#[test]
fn unknown_experiment_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = rpmix(&["experiment", "fig42", "--out", &out_arg(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error"));
}

#[test]
fn bad_override_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = rpmix(&[
        "experiment",
        "fig3",
        "--set",
        "bogus=1",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(!o.status.success());
    let o = rpmix(&[
        "experiment",
        "fig3",
        "--set",
        "n",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(!o.status.success());
}

#[test]
fn missing_input_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = rpmix(&[
        "em",
        "--data",
        "/nonexistent.csv",
        "--k",
        "2",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(!o.status.success());
    let o = rpmix(&[
        "experiment",
        "fig9",
        "--set",
        "data_path=/nonexistent.csv",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("label"), "{}", stderr(&o));
}

#[test]
fn experiment_writes_report_and_replays() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "experiment".to_string(),
            "fig3".into(),
            "--trials".into(),
            "3".into(),
            "--set".into(),
            "n=25,40".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out_arg(dir),
        ]
    };
    let run = |dir: &Path, threads: &str| {
        let mut v = args(dir);
        v.extend(["--threads".to_string(), threads.to_string()]);
        let refs: Vec<&str> = v.iter().map(String::as_str).collect();
        let o = rpmix(&refs);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(dir.join("fig3.csv")).unwrap()
    };
    let first = run(a.path(), "1");
    let second = run(b.path(), "3");
    assert_eq!(first, second);
    assert!(first.starts_with("kind,n,trial,seed,original_separation,projected_separation\n"));
    assert!(first.contains("\ntrial,25,0,7,"));
    assert_eq!(first.lines().count(), 1 + 6 + 10);
}

#[test]
fn config_file_drives_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "experiment = \"fig5\"\ntrials = 2\n[overrides]\nE = [50]\nn = [25]\nd = 5\n",
    )
    .unwrap();
    let o = rpmix(&[
        "experiment",
        "fig5",
        "--config",
        &cfg.to_string_lossy(),
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("fig5.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("trial,")).count(), 2);
}

#[test]
fn synth_em_classify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = rpmix(&[
        "synth",
        "--n",
        "6",
        "--k",
        "2",
        "--c",
        "4",
        "--samples",
        "400",
        "--seed",
        "3",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["mixture.json", "points.csv", "labeled.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let points = dir.path().join("points.csv").to_string_lossy().into_owned();
    let truth = dir
        .path()
        .join("mixture.json")
        .to_string_lossy()
        .into_owned();

    let o = rpmix(&["project", "--data", &points, "--d", "3", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let projected = std::fs::read_to_string(dir.path().join("projected.csv")).unwrap();
    assert!(projected.starts_with("x0,x1,x2\n"));

    let o = rpmix(&[
        "em", "--data", &points, "--k", "2", "--truth", &truth, "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,loglik\n"));

    let labeled = dir
        .path()
        .join("labeled.csv")
        .to_string_lossy()
        .into_owned();
    let o = rpmix(&[
        "classify",
        "--train",
        &labeled,
        "--test",
        &labeled,
        "--d",
        "4",
        "--per-class-k",
        "1",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = std::fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    assert!(preds.starts_with("label,predicted\n"));
    let rows: Vec<&str> = preds.lines().skip(1).collect();
    assert_eq!(rows.len(), 400);
    let correct = rows
        .iter()
        .filter(|r| {
            let (a, b) = r.split_once(',').unwrap();
            a == b
        })
        .count();
    assert!(correct >= 380, "{correct}");
}

#[test]
fn em_rejects_bad_restriction() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert!(rpmix(&[
        "synth",
        "--n",
        "3",
        "--k",
        "2",
        "--samples",
        "50",
        "--out",
        &out
    ])
    .status
    .success());
    let points = dir.path().join("points.csv").to_string_lossy().into_owned();
    let o = rpmix(&[
        "em",
        "--data",
        &points,
        "--k",
        "2",
        "--restriction",
        "diagonal",
        "--out",
        &out,
    ]);
    assert!(!o.status.success());
}
