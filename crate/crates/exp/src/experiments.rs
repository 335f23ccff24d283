//! Experiment bodies. Every trial derives all of its randomness from its own
//! seed `base_seed + trial`, so rows can be replayed one at a time and the
//! output does not depend on thread scheduling.

use std::path::Path;

use rayon::prelude::*;
use rpmix::classifier::{cluster_analysis, ingest, train, LabeledDataset};
use rpmix::em::{
    centers_recovered, rp_em_lift, rp_em_low, run_em, test_loglik, CovarianceRestriction, EmOptions,
};
use rpmix::linalg::congruence;
use rpmix::random::child_seed;
use rpmix::synthesis::{eccentric_covariance, make_mixture, CovarianceMode, MixtureSpec};
use rpmix::{spectral_summary, Dataset64, Error, Gaussian64, Mixture64, Projection64};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{at_seed, ExpError, Result};
use crate::report::{table_csv, Report, TrialRow};

/// Relative tolerance under which two test log-likelihoods count as equal.
pub const LOGLIK_MATCH_TOL: f64 = 1e-9;

/// Validates the config and runs the selected experiment.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    match config.experiment {
        Experiment::Fig3SepVsN => fig3(config),
        Experiment::Fig4SepVsK => fig4(config),
        Experiment::Fig5EccTable => fig5(config),
        Experiment::Fig6EccVsD => fig6(config),
        Experiment::Fig7PcaVsRp => fig7(config),
        Experiment::Fig8EmCompare | Experiment::SecondEmCompare => em_compare(config),
        Experiment::Fig9DigitSweep => fig9(config),
        Experiment::PcaCollapse => pca_collapse(config),
    }
}

fn config_err(msg: impl Into<String>) -> ExpError {
    ExpError::Config(msg.into())
}

/// Runs `body` for every (group, trial) pair in parallel and appends the
/// rows in group-then-trial order.
fn run_trials<G, F>(
    report: &mut Report,
    config: &ExperimentConfig,
    groups: &[(Vec<String>, G)],
    body: F,
) -> Result<()>
where
    G: Sync,
    F: Fn(&G, u64) -> rpmix::Result<Vec<f64>> + Sync,
{
    let trials = config.trials();
    let jobs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..trials).map(move |t| (g, t)))
        .collect();
    let seed_of = |t: usize| config.base_seed.wrapping_add(t as u64);
    let results = jobs
        .par_iter()
        .map(|&(g, t)| body(&groups[g].1, seed_of(t)).map_err(at_seed(seed_of(t))))
        .collect::<Result<Vec<_>>>()?;
    for (&(g, t), measures) in jobs.iter().zip(results) {
        report.rows.push(TrialRow {
            group: groups[g].0.clone(),
            trial: t,
            seed: seed_of(t),
            measures,
        });
    }
    Ok(())
}

fn spherical_pair(n: usize, c: f64, seed: u64) -> rpmix::Result<Mixture64> {
    make_mixture(&MixtureSpec {
        n,
        k: 2,
        c,
        eccentricity: 1.0,
        covariance_mode: CovarianceMode::SphericalShared,
        seed,
    })
}

fn fig3(config: &ExperimentConfig) -> Result<Report> {
    let ns = config.counts("n", &[50, 100, 200, 500, 1000]);
    let d = config.count("d", 20);
    let c = config.real("c", 1.0);
    if let Some(&n) = ns.iter().find(|&&n| n < d) {
        return Err(config_err(format!(
            "n = {n} is below the target dimension d = {d}"
        )));
    }
    let mut report = Report::new(
        Experiment::Fig3SepVsN,
        &["n"],
        &["original_separation", "projected_separation"],
    );
    let groups: Vec<_> = ns.iter().map(|&n| (vec![n.to_string()], n)).collect();
    run_trials(&mut report, config, &groups, |&n, seed| {
        let mix = spherical_pair(n, c, child_seed(seed, 0))?;
        let p = Projection64::random_orthonormal(n, d, child_seed(seed, 1))?;
        Ok(vec![
            mix.separation()?,
            p.project_mixture(&mix)?.separation()?,
        ])
    })?;
    Ok(report)
}

/// `round(10 ln k)`, the target dimension used for `k` clusters.
pub fn log_dim(k: usize) -> usize {
    (10.0 * (k as f64).ln()).round() as usize
}

fn fig4(config: &ExperimentConfig) -> Result<Report> {
    let ks = config.counts("k", &[2, 3, 5, 10, 20]);
    let n = config.count("n", 100);
    let c = config.real("c", 1.0);
    let dim_for = |k: usize| {
        if config.has("d") {
            config.count("d", 0)
        } else {
            log_dim(k)
        }
    };
    for &k in &ks {
        if k < 2 || k > n + 1 {
            return Err(config_err(format!(
                "k = {k} needs 2 <= k <= n + 1 = {}",
                n + 1
            )));
        }
        if dim_for(k) > n || dim_for(k) == 0 {
            return Err(config_err(format!(
                "d = {} is not in [1, n = {n}] for k = {k}",
                dim_for(k)
            )));
        }
    }
    let mut report = Report::new(
        Experiment::Fig4SepVsK,
        &["k"],
        &["d", "original_separation", "projected_separation"],
    );
    let groups: Vec<_> = ks.iter().map(|&k| (vec![k.to_string()], k)).collect();
    run_trials(&mut report, config, &groups, |&k, seed| {
        let d = dim_for(k);
        let mix = make_mixture::<f64>(&MixtureSpec {
            n,
            k,
            c,
            eccentricity: 1.0,
            covariance_mode: CovarianceMode::SphericalShared,
            seed: child_seed(seed, 0),
        })?;
        let p = Projection64::random_orthonormal(n, d, child_seed(seed, 1))?;
        Ok(vec![
            d as f64,
            mix.separation()?,
            p.project_mixture(&mix)?.separation()?,
        ])
    })?;
    Ok(report)
}

/// Eccentricity of `P Σ Pᵀ`.
pub fn projected_eccentricity(cov: &rpmix::Matrix64, p: &Projection64) -> rpmix::Result<f64> {
    Ok(spectral_summary(&congruence(p.matrix(), cov)?)?.eccentricity)
}

fn fig5(config: &ExperimentConfig) -> Result<Report> {
    let es = config.reals("E", &[50.0, 100.0, 150.0, 200.0]);
    let ns = config.counts("n", &[25, 50, 75, 100, 200]);
    let d = config.count("d", 20);
    if let Some(&n) = ns.iter().find(|&&n| n < d) {
        return Err(config_err(format!("n = {n} is below d = {d}")));
    }
    if es.iter().any(|&e| e < 1.0) {
        return Err(config_err("eccentricities must be at least 1"));
    }
    let mut report = Report::new(
        Experiment::Fig5EccTable,
        &["E", "n"],
        &["projected_eccentricity"],
    );
    let groups: Vec<_> = es
        .iter()
        .flat_map(|&e| {
            ns.iter()
                .map(move |&n| (vec![e.to_string(), n.to_string()], (e, n)))
        })
        .collect();
    run_trials(&mut report, config, &groups, |&(e, n), seed| {
        let cov =
            eccentric_covariance(n, e, CovarianceMode::DiagonalDistinct, child_seed(seed, 0))?;
        let p = Projection64::random_orthonormal(n, d, child_seed(seed, 1))?;
        Ok(vec![projected_eccentricity(&cov, &p)?])
    })?;
    Ok(report)
}

fn fig6(config: &ExperimentConfig) -> Result<Report> {
    let n = config.count("n", 50);
    let e = config.real("E", 1000.0);
    let default_ds: Vec<usize> = (25..n.max(26)).rev().collect();
    let ds = config.counts("d", &default_ds);
    if let Some(&d) = ds.iter().find(|&&d| d > n) {
        return Err(config_err(format!("d = {d} exceeds n = {n}")));
    }
    if e < 1.0 {
        return Err(config_err("eccentricity must be at least 1"));
    }
    // One Gaussian for the whole sweep, pinned by the base seed.
    let cov = eccentric_covariance(
        n,
        e,
        CovarianceMode::DiagonalDistinct,
        child_seed(config.base_seed, 0),
    )?;
    let mut report = Report::new(Experiment::Fig6EccVsD, &["d"], &["projected_eccentricity"]);
    let groups: Vec<_> = ds.iter().map(|&d| (vec![d.to_string()], d)).collect();
    run_trials(&mut report, config, &groups, |&d, seed| {
        let p = Projection64::random_orthonormal(n, d, child_seed(seed, d as u64))?;
        Ok(vec![projected_eccentricity(&cov, &p)?])
    })?;
    Ok(report)
}

fn offdiag_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect()
}

fn fig7(config: &ExperimentConfig) -> Result<Report> {
    let n = config.count("n", 100);
    let k = config.count("k", 5);
    let c = config.real("c", 0.5);
    let e = config.real("E", 1000.0);
    let d = config.count("d", 10);
    let samples = config.count("train_size", 1000);
    if d > n || k < 2 || k > n + 1 {
        return Err(config_err(format!(
            "need d <= n and 2 <= k <= n + 1 (n={n}, k={k}, d={d})"
        )));
    }
    let pairs = offdiag_pairs(k);
    let mut measures = vec!["min_separation".to_string(), "max_separation".to_string()];
    measures.extend(pairs.iter().map(|(i, j)| format!("s{i}_{j}")));
    let measure_refs: Vec<&str> = measures.iter().map(String::as_str).collect();
    let mut report = Report::new(Experiment::Fig7PcaVsRp, &["method"], &measure_refs);
    let groups = vec![
        (vec!["pca".to_string()], true),
        (vec!["rp".to_string()], false),
    ];
    run_trials(&mut report, config, &groups, |&use_pca, seed| {
        let mix = make_mixture::<f64>(&MixtureSpec {
            n,
            k,
            c,
            eccentricity: e,
            covariance_mode: CovarianceMode::DiagonalDistinct,
            seed: child_seed(seed, 0),
        })?;
        let p = if use_pca {
            Projection64::pca(&mix.sample(samples, child_seed(seed, 1)), d)?
        } else {
            Projection64::random_orthonormal(n, d, child_seed(seed, 2))?
        };
        let table = p.project_mixture(&mix)?.separation_table();
        let values: Vec<f64> = pairs.iter().map(|&(i, j)| table[(i, j)]).collect();
        let mut row = vec![
            values.iter().copied().fold(f64::INFINITY, f64::min),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ];
        row.extend(values);
        Ok(row)
    })?;
    // Mean tables in the familiar square layout.
    let labels: Vec<String> = (0..k).map(|i| i.to_string()).collect();
    for method in ["pca", "rp"] {
        let mut square = vec![vec![0.0; k]; k];
        for &(i, j) in &pairs {
            let mean = report.mean(&[method], &format!("s{i}_{j}"));
            square[i][j] = mean;
            square[j][i] = mean;
        }
        report.tables.push((
            format!("fig7_{method}_table.csv"),
            table_csv("component", &labels, &square),
        ));
    }
    Ok(report)
}

/// Outcome of one fit in an EM comparison.
struct FitOutcome {
    success: bool,
    failed: bool,
    iterations: f64,
    test_loglik: f64,
}

impl FitOutcome {
    fn failure(err: &Error) -> Self {
        let iterations = match err {
            Error::EmFailed { iteration, .. } => *iteration as f64,
            _ => 0.0,
        };
        FitOutcome {
            success: false,
            failed: true,
            iterations,
            test_loglik: f64::NEG_INFINITY,
        }
    }

    fn scored(model: &Mixture64, truth: &Mixture64, test: &Dataset64, iterations: usize) -> Self {
        let success = centers_recovered(model, truth)
            .map(|r| r.0)
            .unwrap_or(false);
        match test_loglik(model, test) {
            Ok(ll) if ll.is_finite() => FitOutcome {
                success,
                failed: false,
                iterations: iterations as f64,
                test_loglik: ll,
            },
            _ => FitOutcome {
                success,
                failed: true,
                iterations: iterations as f64,
                test_loglik: f64::NEG_INFINITY,
            },
        }
    }
}

/// `(beat, match, lose)` for RP+EM against regular EM. Two finite values
/// within [`LOGLIK_MATCH_TOL`] relative match; a failed RP+EM run never
/// beats or matches.
pub fn compare_logliks(rp: f64, regular: f64) -> (bool, bool, bool) {
    if !rp.is_finite() {
        return (false, false, true);
    }
    if !regular.is_finite() {
        return (true, false, false);
    }
    let scale = rp.abs().max(regular.abs());
    if (rp - regular).abs() <= LOGLIK_MATCH_TOL * scale {
        (false, true, false)
    } else if rp > regular {
        (true, false, false)
    } else {
        (false, false, true)
    }
}

pub const EM_COMPARE_COLUMNS: [&str; 11] = [
    "regular_success",
    "rp_success",
    "regular_failed",
    "rp_failed",
    "regular_iterations",
    "rp_low_iterations",
    "rp_high_iterations",
    "regular_test_loglik",
    "rp_test_loglik",
    "rp_beat",
    "exact_match",
];

fn em_compare(config: &ExperimentConfig) -> Result<Report> {
    let second = config.experiment == Experiment::SecondEmCompare;
    let ns = config.counts("n", if second { &[100] } else { &[50, 100, 150, 200] });
    let k = config.count("k", if second { 3 } else { 5 });
    let c = config.real("c", if second { 0.8 } else { 1.0 });
    let e = config.real("E", if second { 25.0 } else { 1.0 });
    let d = config.count("d", 25);
    let train_size = config.count("train_size", 1000);
    let test_size = config.count("test_size", 1000);
    let restriction = config.restriction(if second {
        CovarianceRestriction::FullDistinct
    } else {
        CovarianceRestriction::SharedFull
    });
    let mode = match (restriction, e == 1.0) {
        (CovarianceRestriction::SharedFull, true) => CovarianceMode::SphericalShared,
        (CovarianceRestriction::SharedFull, false) => CovarianceMode::FullShared,
        (CovarianceRestriction::FullDistinct, _) => CovarianceMode::RotatedDistinct,
    };
    for &n in &ns {
        if d > n || k < 2 || k > n + 1 {
            return Err(config_err(format!(
                "need d <= n and 2 <= k <= n + 1 (n={n}, k={k}, d={d})"
            )));
        }
    }
    if train_size < k {
        return Err(config_err(format!(
            "train_size {train_size} is below k = {k}"
        )));
    }
    if e < 1.0 {
        return Err(config_err("eccentricity must be at least 1"));
    }
    let opts = EmOptions::default();
    let mut report = Report::new(config.experiment, &["n"], &EM_COMPARE_COLUMNS);
    let groups: Vec<_> = ns.iter().map(|&n| (vec![n.to_string()], n)).collect();
    run_trials(&mut report, config, &groups, |&n, seed| {
        let truth = make_mixture::<f64>(&MixtureSpec {
            n,
            k,
            c,
            eccentricity: e,
            covariance_mode: mode,
            seed: child_seed(seed, 0),
        })?;
        let train_set = truth.sample(train_size, child_seed(seed, 1));
        let test_set = truth.sample(test_size, child_seed(seed, 2));

        let regular = match run_em(&train_set, k, restriction, child_seed(seed, 3), &opts) {
            Ok(fit) => FitOutcome::scored(&fit.model, &truth, &test_set, fit.iterations),
            Err(err) => FitOutcome::failure(&err),
        };
        let (rp, low_iterations) =
            match rp_em_low(&train_set, k, d, restriction, child_seed(seed, 4), &opts) {
                Ok((_, low)) => {
                    let outcome = match rp_em_lift(&train_set, &low, restriction, &opts) {
                        Ok((_, high)) => {
                            FitOutcome::scored(&high.model, &truth, &test_set, high.iterations)
                        }
                        Err(err) => FitOutcome::failure(&err),
                    };
                    (outcome, low.iterations as f64)
                }
                Err(err) => {
                    // Failed in low dimension: no high-dimensional steps taken.
                    let mut outcome = FitOutcome::failure(&err);
                    let low_iterations = outcome.iterations;
                    outcome.iterations = 0.0;
                    (outcome, low_iterations)
                }
            };
        let (beat, matched, _) = compare_logliks(rp.test_loglik, regular.test_loglik);
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        Ok(vec![
            flag(regular.success),
            flag(rp.success),
            flag(regular.failed),
            flag(rp.failed),
            regular.iterations,
            low_iterations,
            rp.iterations,
            regular.test_loglik,
            rp.test_loglik,
            flag(beat),
            flag(matched),
        ])
    })?;
    Ok(report)
}

/// The symmetric arrangement in `R^{k/2}`: unit spherical Gaussians with
/// components `2j` and `2j+1` centered at `+(j+1) e_j` and `-(j+1) e_j`.
pub fn axis_pairs_mixture(k: usize) -> rpmix::Result<Mixture64> {
    if k < 4 || k % 2 == 1 {
        return Err(Error::BadDims(format!(
            "the axis arrangement needs an even k >= 4, got {k}"
        )));
    }
    let n = k / 2;
    let mut components = Vec::with_capacity(k);
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut mu = vec![0.0; n];
            mu[j] = sign * (j + 1) as f64;
            components.push(Gaussian64::spherical(mu, 1.0)?);
        }
    }
    Mixture64::new(components, vec![1.0 / k as f64; k])
}

fn pca_collapse(config: &ExperimentConfig) -> Result<Report> {
    let k = config.count("k", 10);
    let samples = config.count("train_size", 20_000);
    // Surface shape errors before any trial runs.
    let truth = axis_pairs_mixture(k)?;
    let n = k / 2;
    let rp_d = log_dim(k).min(n);
    let mut report = Report::new(
        Experiment::PcaCollapse,
        &["k"],
        &[
            "original_separation",
            "pca_low_separation",
            "pca_full_separation",
            "rp_separation",
            "rp_d",
        ],
    );
    let groups = vec![(vec![k.to_string()], ())];
    run_trials(&mut report, config, &groups, |_, seed| {
        let data = truth.sample(samples, child_seed(seed, 0));
        let low = Projection64::pca(&data, n - 1)?;
        let full = Projection64::pca(&data, n)?;
        let rp = Projection64::random_orthonormal(n, rp_d, child_seed(seed, 1))?;
        Ok(vec![
            truth.separation()?,
            low.project_mixture(&truth)?.separation()?,
            full.project_mixture(&truth)?.separation()?,
            rp.project_mixture(&truth)?.separation()?,
            rp_d as f64,
        ])
    })?;
    Ok(report)
}

/// Schema reminder used in missing-data errors.
pub const DIGIT_CSV_SCHEMA: &str =
    "label-first CSV without header: `label,x_1,...,x_n` per line, integer labels, n features";

fn load_labeled(path: &str) -> Result<LabeledDataset<f64>> {
    if !Path::new(path).exists() {
        return Err(ExpError::MissingData(format!(
            "{path} does not exist; expected {DIGIT_CSV_SCHEMA}"
        )));
    }
    Ok(ingest(path)?)
}

/// Synthetic stand-in for the digit data: well-packed classes of eccentric
/// Gaussians, one Gaussian per class.
pub fn surrogate_digits(
    classes: usize,
    n: usize,
    c: f64,
    e: f64,
    train_size: usize,
    test_size: usize,
    seed: u64,
) -> rpmix::Result<(LabeledDataset<f64>, LabeledDataset<f64>)> {
    let mix = make_mixture::<f64>(&MixtureSpec {
        n,
        k: classes,
        c,
        eccentricity: e,
        covariance_mode: CovarianceMode::RotatedDistinct,
        seed: child_seed(seed, 0),
    })?;
    let (train_pts, train_labels) = mix.sample_labeled(train_size, child_seed(seed, 1));
    let (test_pts, test_labels) = mix.sample_labeled(test_size, child_seed(seed, 2));
    Ok((
        LabeledDataset::new(train_pts, train_labels)?,
        LabeledDataset::new(test_pts, test_labels)?,
    ))
}

/// Every fifth point (indices 4, 9, ...) goes to the test side.
pub fn split_every_fifth(
    data: &LabeledDataset<f64>,
) -> rpmix::Result<(LabeledDataset<f64>, LabeledDataset<f64>)> {
    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|i| i % 5 == 4);
    let pick = |idx: &[usize]| {
        LabeledDataset::new(
            data.points().select(idx),
            idx.iter().map(|&i| data.labels()[i]).collect(),
        )
    };
    Ok((pick(&train_idx)?, pick(&test_idx)?))
}

fn fig9(config: &ExperimentConfig) -> Result<Report> {
    let ds = config.counts("d", &[20, 30, 40, 50, 60, 80, 100]);
    let per_class_k = config.count("k", 5);
    let (train_set, test_set) = match config.text("data_path") {
        Some(path) => {
            let all = load_labeled(path)?;
            match config.text("test_path") {
                Some(test_path) => (all, load_labeled(test_path)?),
                None => split_every_fifth(&all)?,
            }
        }
        None => surrogate_digits(
            config.count("classes", 10),
            config.count("n", 256),
            config.real("c", 0.63),
            config.real("E", 1e4),
            config.count("train_size", 9709),
            config.count("test_size", 2007),
            config.base_seed,
        )?,
    };
    let n = train_set.dim();
    if test_set.dim() != n {
        return Err(config_err(format!(
            "train data has {n} features but test data has {}",
            test_set.dim()
        )));
    }
    if let Some(&d) = ds.iter().find(|&&d| d > n) {
        return Err(config_err(format!(
            "d = {d} exceeds the data dimension {n}"
        )));
    }
    let opts = EmOptions::default();
    let mut report = Report::new(Experiment::Fig9DigitSweep, &["d"], &["accuracy"]);
    let groups: Vec<_> = ds.iter().map(|&d| (vec![d.to_string()], d)).collect();
    run_trials(&mut report, config, &groups, |&d, seed| {
        let model = train(
            &train_set,
            d,
            per_class_k,
            child_seed(seed, d as u64),
            &opts,
        )?;
        Ok(vec![model.evaluate(&test_set)?])
    })?;

    // Cluster diagnostics in the raw space and after one projection.
    let analysis_d = if ds.contains(&40) || n < 40 {
        40.min(n)
    } else {
        ds[0]
    };
    let raw = cluster_analysis(&train_set, None)?;
    let p = Projection64::random_orthonormal(n, analysis_d, child_seed(config.base_seed, 40))?;
    let projected = cluster_analysis(&train_set, Some(&p))?;
    report
        .tables
        .push(("fig9_clusters_raw.csv".into(), raw.to_csv()));
    report.tables.push((
        format!("fig9_clusters_d{analysis_d}.csv"),
        projected.to_csv(),
    ));
    Ok(report)
}
