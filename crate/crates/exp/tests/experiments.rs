use rpmix::classifier::LabeledDataset;
use rpmix::{Dataset64, Matrix64};
use rpmix_exp::config::Value;
use rpmix_exp::experiments::{compare_logliks, log_dim, split_every_fifth};
use rpmix_exp::report::{summarize, STATS};
use rpmix_exp::{run, ExpError, Experiment, ExperimentConfig};

fn config(e: Experiment, trials: usize, overrides: &[(&str, Value)]) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(e);
    c.trials = Some(trials);
    for (k, v) in overrides {
        c = c.with_override(k, v.clone());
    }
    c
}

fn list(v: &[f64]) -> Value {
    Value::List(v.to_vec())
}

fn small_fig4() -> ExperimentConfig {
    config(
        Experiment::Fig4SepVsK,
        6,
        &[("k", list(&[2.0, 5.0])), ("n", Value::Number(40.0))],
    )
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn same_seed_gives_identical_csv() {
    let c = small_fig4();
    let a = run(&c).unwrap().to_csv();
    let b = run(&c).unwrap().to_csv();
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_output() {
    let c = small_fig4();
    let one = in_pool(1, || run(&c).unwrap().to_csv());
    let four = in_pool(4, || run(&c).unwrap().to_csv());
    assert_eq!(one, four);
}

#[test]
fn different_base_seed_changes_rows() {
    let mut c = small_fig4();
    let a = run(&c).unwrap();
    c.base_seed = 99;
    let b = run(&c).unwrap();
    assert_ne!(a.rows[0].measures, b.rows[0].measures);
    assert_eq!(b.rows[0].seed, 99);
    assert_eq!(b.rows[1].seed, 100);
}

#[test]
fn aggregate_rows_match_recomputation_from_csv() {
    let report = run(&small_fig4()).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[..4], ["kind", "k", "trial", "seed"]);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for k in ["2", "5"] {
        let trials: Vec<&Vec<&str>> = rows
            .iter()
            .filter(|r| r[0] == "trial" && r[1] == k)
            .collect();
        assert_eq!(trials.len(), 6);
        for col in 4..header.len() {
            let values: Vec<f64> = trials.iter().map(|r| r[col].parse().unwrap()).collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let median = (sorted[2] + sorted[3]) / 2.0;
            let expected = [mean, sd, sorted[0], median, sorted[5]];
            for (stat, want) in STATS.iter().zip(expected) {
                let row = rows.iter().find(|r| r[0] == *stat && r[1] == k).unwrap();
                assert_eq!(row[2], "");
                assert_eq!(row[3], "");
                let got: f64 = row[col].parse().unwrap();
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "{stat} {k} col {col}"
                );
            }
        }
    }
}

#[test]
fn csv_floats_round_trip_exactly() {
    let report = run(&small_fig4()).unwrap();
    let csv = report.to_csv();
    for (line, row) in csv.lines().skip(1).zip(&report.rows) {
        let parsed: Vec<f64> = line
            .split(',')
            .skip(4)
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(parsed, row.measures);
    }
}

#[test]
fn single_trial_aggregates_equal_the_row() {
    let report = run(&config(Experiment::Fig3SepVsN, 1, &[("n", list(&[30.0]))])).unwrap();
    let row = &report.rows[0].measures;
    for a in report.aggregates() {
        if a.stat == "sd" {
            assert!(a.values.iter().all(|&v| v == 0.0));
        } else {
            assert_eq!(&a.values, row);
        }
    }
}

#[test]
fn full_dimension_projection_keeps_separation() {
    let report = run(&config(
        Experiment::Fig3SepVsN,
        5,
        &[("n", list(&[20.0])), ("d", Value::Number(20.0))],
    ))
    .unwrap();
    for r in &report.rows {
        assert!((r.measures[0] - 1.0).abs() < 1e-9);
        assert!((r.measures[1] - r.measures[0]).abs() < 1e-9);
    }
}

#[test]
fn full_dimension_projection_keeps_eccentricity() {
    let report = run(&config(
        Experiment::Fig6EccVsD,
        3,
        &[("n", Value::Number(30.0)), ("d", list(&[30.0, 10.0]))],
    ))
    .unwrap();
    for v in report.column(&["30".to_string()], "projected_eccentricity") {
        assert!((v - 1000.0).abs() < 1e-6 * 1000.0, "{v}");
    }
    for v in report.column(&["10".to_string()], "projected_eccentricity") {
        assert!(v < 1000.0);
    }
}

#[test]
fn aggregates_are_ordered() {
    let report = run(&config(
        Experiment::Fig5EccTable,
        7,
        &[("E", list(&[50.0])), ("n", list(&[25.0]))],
    ))
    .unwrap();
    let values = report.column(
        &["50".to_string(), "25".to_string()],
        "projected_eccentricity",
    );
    let s = summarize(&values);
    assert!(s[2] <= s[3] && s[3] <= s[4]);
    assert!(s[2] <= s[0] && s[0] <= s[4]);
}

#[test]
fn fig4_uses_log_dimension() {
    assert_eq!(log_dim(2), 7);
    assert_eq!(log_dim(20), 30);
    let report = run(&small_fig4()).unwrap();
    assert_eq!(report.mean(&["5"], "d"), 16.0);
}

#[test]
fn pca_collapse_rejects_small_k() {
    let err = run(&config(
        Experiment::PcaCollapse,
        1,
        &[("k", Value::Number(2.0))],
    ))
    .unwrap_err();
    assert!(
        err.to_string().contains('k') || err.to_string().contains("cluster"),
        "{err}"
    );
}

#[test]
fn pca_full_separation_stable_in_sample_size() {
    let at = |m: f64| {
        run(&config(
            Experiment::PcaCollapse,
            3,
            &[("k", Value::Number(6.0)), ("train_size", Value::Number(m))],
        ))
        .unwrap()
        .mean(&["6"], "pca_full_separation")
    };
    let (small, large) = (at(500.0), at(20_000.0));
    assert!((small - large).abs() <= 0.1 * large, "{small} vs {large}");
}

#[test]
fn digit_sweep_reports_missing_file() {
    let err = run(&config(
        Experiment::Fig9DigitSweep,
        1,
        &[("data_path", Value::Text("/nonexistent/digits.csv".into()))],
    ))
    .unwrap_err();
    assert!(matches!(err, ExpError::MissingData(_)), "{err}");
}

#[test]
fn config_errors_surface_before_running() {
    let mut c = ExperimentConfig::new(Experiment::Fig3SepVsN);
    c.trials = Some(0);
    assert!(matches!(run(&c), Err(ExpError::Config(_))));
    let c = config(
        Experiment::Fig3SepVsN,
        1,
        &[("train_size", Value::Number(5.0))],
    );
    assert!(matches!(run(&c), Err(ExpError::Config(_))));
    let c = config(Experiment::Fig3SepVsN, 1, &[("n", list(&[10.0]))]);
    assert!(matches!(run(&c), Err(ExpError::Config(_))));
    assert!(ExperimentConfig::from_toml("experiment = \"fig42\"").is_err());
    assert!(ExperimentConfig::from_toml("experiment = \"fig3\"\nbogus = 1").is_err());
}

#[test]
fn config_file_round_trip() {
    let c = config(
        Experiment::Fig5EccTable,
        4,
        &[("E", list(&[50.0, 100.0])), ("d", Value::Number(10.0))],
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, c.to_toml()).unwrap();
    assert_eq!(ExperimentConfig::from_file(&path).unwrap(), c);
}

#[test]
fn loglik_comparison() {
    assert_eq!(compare_logliks(-10.0, -12.0), (true, false, false));
    assert_eq!(compare_logliks(-12.0, -10.0), (false, false, true));
    assert_eq!(
        compare_logliks(-10.0, -10.0 * (1.0 + 1e-12)),
        (false, true, false)
    );
    assert_eq!(
        compare_logliks(f64::NEG_INFINITY, -10.0),
        (false, false, true)
    );
    assert_eq!(
        compare_logliks(-10.0, f64::NEG_INFINITY),
        (true, false, false)
    );
}

#[test]
fn every_fifth_point_is_held_out() {
    let points = Dataset64::new(Matrix64::from_vec(10, 1, (0..10).map(f64::from).collect()));
    let data = LabeledDataset::new(points, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
    let (train, test) = split_every_fifth(&data).unwrap();
    assert_eq!(train.len(), 8);
    assert_eq!(test.len(), 2);
}

#[test]
fn report_files_written() {
    let report = run(&config(Experiment::Fig7PcaVsRp, 1, &[])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = report.write(dir.path()).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        ["fig7.csv", "fig7_pca_table.csv", "fig7_rp_table.csv"]
    );
    let table = std::fs::read_to_string(dir.path().join("fig7_rp_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
}
