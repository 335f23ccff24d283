//! Acceptance checks, one line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reproduced faithfully but do not
//! meet their target; they are reported as FAIL without failing the run.
//! Any other FAIL exits nonzero.
//!
//! Set `RPMIX_DIGITS_TRAIN` (and optionally `RPMIX_DIGITS_TEST`) to a
//! label-first CSV to run criterion 8 on real digit data instead of the
//! synthetic surrogate.

use std::time::Instant;

use rpmix::classifier::cluster_analysis;
use rpmix::em::{centers_recovered, e_step, run_em, CovarianceRestriction, EmOptions};
use rpmix::random::{child_seed, normal, rng, uniform};
use rpmix::synthesis::{make_mixture, CovarianceMode, MixtureSpec};
use rpmix::{norm_tail_bound, Dataset64, Gaussian64, Matrix64, Mixture64, Projection64};
use rpmix_exp::config::Value;
use rpmix_exp::experiments::split_every_fifth;
use rpmix_exp::{run, Experiment, ExperimentConfig, Report};

const KNOWN_FAILURES: [u32; 3] = [2, 3, 8];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn config(e: Experiment, trials: usize, overrides: &[(&str, Value)]) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(e);
    c.trials = Some(trials);
    for (k, v) in overrides {
        c.overrides.insert(k.to_string(), v.clone());
    }
    c
}

fn list(values: &[f64]) -> Value {
    Value::List(values.to_vec())
}

fn run_ok(c: &ExperimentConfig) -> Report {
    run(c).unwrap_or_else(|e| panic!("{} failed: {e}", c.experiment))
}

fn fig5_table() -> Outcome {
    // (E, n, paper mean, paper sd)
    let cells = [
        (50.0, 50, 3.4, 0.62),
        (100.0, 100, 2.2, 0.19),
        (200.0, 200, 1.7, 0.06),
        (100.0, 25, 13.1, 5.79),
    ];
    let report = run_ok(&config(
        Experiment::Fig5EccTable,
        40,
        &[
            ("E", list(&[50.0, 100.0, 200.0])),
            ("n", list(&[25.0, 50.0, 100.0, 200.0])),
            ("d", Value::Number(20.0)),
        ],
    ));
    let mut pass = true;
    let mut parts = Vec::new();
    for (e, n, mean, sd) in cells {
        let got = report.mean(&[&e.to_string(), &n.to_string()], "projected_eccentricity");
        let ok = (got - mean).abs() <= 3.0 * sd;
        pass &= ok;
        parts.push(format!("(E={e},n={n}) {got:.3} vs {mean}±{sd}"));
    }
    Outcome {
        id: 1,
        title: "projected eccentricity table",
        pass,
        detail: parts.join("; "),
    }
}

fn fig7_tables() -> Outcome {
    let report = run_ok(&config(Experiment::Fig7PcaVsRp, 10, &[]));
    let extreme = |method: &str, measure: &str, stat: &str| report.stat(&[method], measure, stat);
    let pca_max = extreme("pca", "max_separation", "max");
    let rp_min = extreme("rp", "min_separation", "min");
    let rp_max = extreme("rp", "max_separation", "max");
    let pca_ok = pca_max <= 0.1;
    let rp_ok = rp_min >= 0.25 && rp_max <= 0.9;
    Outcome {
        id: 2,
        title: "PCA vs RP separation tables",
        pass: pca_ok && rp_ok,
        detail: format!(
            "PCA off-diagonals in [{:.3}, {pca_max:.3}] (need <= 0.1: {}); RP in [{rp_min:.3}, {rp_max:.3}] (need [0.25, 0.9]: {})",
            extreme("pca", "min_separation", "min"),
            verdict(pca_ok),
            verdict(rp_ok)
        ),
    }
}

fn fig8_comparison() -> Outcome {
    let report = run_ok(&config(
        Experiment::Fig8EmCompare,
        150,
        &[("n", list(&[50.0, 200.0]))],
    ));
    let pct = |n: &str, m: &str| 100.0 * report.mean(&[n], m);
    let (reg50, reg200) = (pct("50", "regular_success"), pct("200", "regular_success"));
    let (rp50, rp200) = (pct("50", "rp_success"), pct("200", "rp_success"));
    let beat200 = pct("200", "rp_beat");
    let a = reg50 - reg200 >= 15.0;
    let b = (rp50 - rp200).abs() <= 10.0;
    let c = beat200 > 50.0;
    Outcome {
        id: 3,
        title: "EM vs RP+EM, shared covariance",
        pass: a && b && c,
        detail: format!(
            "(a) regular {reg50:.1}% -> {reg200:.1}%, drop {:.1} (need >= 15: {}); (b) RP+EM {rp50:.1}% vs {rp200:.1}% (spread <= 10: {}); (c) beat at n=200 {beat200:.1}% (need > 50: {})",
            reg50 - reg200,
            verdict(a),
            verdict(b),
            verdict(c)
        ),
    }
}

fn second_em() -> Outcome {
    let report = run_ok(&config(Experiment::SecondEmCompare, 100, &[]));
    let pct = |m: &str| 100.0 * report.mean(&["100"], m);
    let (reg, rp, beat) = (pct("regular_success"), pct("rp_success"), pct("rp_beat"));
    let ok = rp >= reg + 20.0 && beat >= 55.0;
    Outcome {
        id: 4,
        title: "EM vs RP+EM, distinct covariances",
        pass: ok,
        detail: format!(
            "success RP+EM {rp:.1}% vs regular {reg:.1}% (need gap >= 20); beat {beat:.1}% (need >= 55); low-dim iterations {:.2}, regular {:.2}",
            report.mean(&["100"], "rp_low_iterations"),
            report.mean(&["100"], "regular_iterations")
        ),
    }
}

fn norm_concentration() -> Outcome {
    let n = 1000;
    let samples = 100_000;
    let eps = [0.2, 0.3, 0.5];
    let mut exceed = [0usize; 3];
    let mut r = rng(20_240_501);
    for _ in 0..samples {
        let sq: f64 = (0..n).map(|_| normal::<f64, _>(&mut r).powi(2)).sum();
        let dev = (sq / n as f64 - 1.0).abs();
        for (count, &e) in exceed.iter_mut().zip(&eps) {
            if dev > e {
                *count += 1;
            }
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (count, &e) in exceed.iter().zip(&eps) {
        let freq = *count as f64 / samples as f64;
        let bound = norm_tail_bound(n, e);
        pass &= freq <= bound;
        parts.push(format!("eps={e}: {freq:.2e} <= {bound:.2e}"));
    }
    Outcome {
        id: 5,
        title: "norm concentration",
        pass,
        detail: parts.join("; "),
    }
}

fn pca_collapse() -> Outcome {
    let report = run_ok(&config(
        Experiment::PcaCollapse,
        10,
        &[("k", Value::Number(10.0))],
    ));
    let low_max = report.stat(&["10"], "pca_low_separation", "max");
    let full_min = report.stat(&["10"], "pca_full_separation", "min");
    let original = report.mean(&["10"], "original_separation");
    let ok = low_max < 0.05 && full_min >= 0.5 * original;
    Outcome {
        id: 6,
        title: "PCA collapse vs RP",
        pass: ok,
        detail: format!(
            "PCA to 4 dims: max {low_max:.4} (need < 0.05); PCA to 5 dims: min {full_min:.4} vs original {original:.4}; RP {:.4}",
            report.mean(&["10"], "rp_separation")
        ),
    }
}

fn random_small_mixture(seed: u64) -> Mixture64 {
    let mut r = rng(seed);
    let n = 2 + (seed % 3) as usize;
    let k = 2 + (seed % 2) as usize;
    let modes = [
        CovarianceMode::SphericalShared,
        CovarianceMode::RotatedDistinct,
        CovarianceMode::FullShared,
    ];
    let mode = modes[(seed / 2 % 3) as usize];
    let e = if mode == CovarianceMode::SphericalShared {
        1.0
    } else {
        uniform(&mut r, 1.0, 5.0)
    };
    make_mixture(&MixtureSpec {
        n,
        k,
        c: uniform(&mut r, 0.5, 3.0),
        eccentricity: e,
        covariance_mode: mode,
        seed,
    })
    .expect("valid small mixture")
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();

    // EM monotonicity and responsibility normalization.
    let mut checked = 0;
    let mut worst_drop = 0.0f64;
    let mut worst_row = 0.0f64;
    for seed in 0..400u64 {
        if checked == 50 {
            break;
        }
        let truth = random_small_mixture(seed);
        let data = truth.sample(80 + (seed % 5) as usize * 20, child_seed(seed, 7));
        let restriction = if seed % 2 == 0 {
            CovarianceRestriction::FullDistinct
        } else {
            CovarianceRestriction::SharedFull
        };
        let Ok(fit) = run_em(&data, truth.k(), restriction, seed, &EmOptions::default()) else {
            continue;
        };
        if fit.rescues > 0 {
            continue;
        }
        checked += 1;
        for w in fit.loglik_trace.windows(2) {
            worst_drop = worst_drop.max((w[0] - w[1]) / w[0].abs().max(1.0));
        }
        for row in fit.responsibilities.matrix().rows_iter() {
            worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    if checked < 50 {
        failures.push(format!("only {checked} EM instances ran cleanly"));
    }
    if worst_drop > 1e-7 {
        failures.push(format!("log-likelihood dropped by {worst_drop:e}"));
    }
    if worst_row > 1e-12 {
        failures.push(format!("responsibility row sum off by {worst_row:e}"));
    }

    // Orthonormality of random projections.
    let mut worst_orth = 0.0f64;
    for seed in 0..100u64 {
        let n = 2 + (seed * 7 % 59) as usize;
        let d = 1 + (seed * 13 % n as u64) as usize;
        let p = Projection64::random_orthonormal(n, d, seed).expect("projection");
        worst_orth = worst_orth.max(p.orthonormality_error());
    }
    if worst_orth > 1e-9 {
        failures.push(format!("orthonormality error {worst_orth:e}"));
    }

    // Posterior on three 1-d points against the scalar formula.
    let mut worst_post = 0.0f64;
    for seed in 0..200u64 {
        let mut r = rng(seed);
        let k = 2 + (seed % 2) as usize;
        let mut w: Vec<f64> = (0..k).map(|_| uniform(&mut r, 0.1, 1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let mu: Vec<f64> = (0..k).map(|_| uniform(&mut r, -3.0, 3.0)).collect();
        let var: Vec<f64> = (0..k).map(|_| uniform(&mut r, 0.2, 3.0)).collect();
        let xs: Vec<f64> = (0..3).map(|_| uniform(&mut r, -4.0, 4.0)).collect();
        let model = Mixture64::new(
            (0..k)
                .map(|i| Gaussian64::spherical(vec![mu[i]], var[i]).unwrap())
                .collect(),
            w.clone(),
        )
        .unwrap();
        let data = Dataset64::new(Matrix64::from_vec(3, 1, xs.clone()));
        let (resp, _) = e_step(&model, &data).unwrap();
        for (row, &x) in xs.iter().enumerate() {
            let joint: Vec<f64> = (0..k)
                .map(|i| {
                    w[i] * (-(x - mu[i]).powi(2) / (2.0 * var[i])).exp()
                        / (2.0 * std::f64::consts::PI * var[i]).sqrt()
                })
                .collect();
            let z: f64 = joint.iter().sum();
            for (got, j) in resp.row(row).iter().zip(&joint) {
                worst_post = worst_post.max((got - j / z).abs());
            }
        }
    }
    if worst_post > 1e-12 {
        failures.push(format!(
            "posterior differs from the scalar formula by {worst_post:e}"
        ));
    }

    // Center matching against brute force over every permutation.
    let mut cases = 0;
    let mut disagreements = 0;
    for k in 1..=4usize {
        let n = 6;
        let truth = Mixture64::new(
            (0..k)
                .map(|i| {
                    let mut m = vec![0.0; n];
                    m[i] = 4.0;
                    Gaussian64::spherical(m, 1.0 + i as f64 * 0.5).unwrap()
                })
                .collect(),
            vec![1.0 / k as f64; k],
        )
        .unwrap();
        for (pi, perm) in permutations(k).into_iter().enumerate() {
            for trial in 0..8u64 {
                let mut r = rng(1000 * k as u64 + 10 * pi as u64 + trial);
                let scale = [0.05, 0.2, 0.3, 0.34, 0.4, 0.6, 1.0, 2.0][trial as usize];
                let comps: Vec<Gaussian64> = perm
                    .iter()
                    .map(|&j| {
                        let g = truth.component(j);
                        let noise: Vec<f64> = (0..n).map(|_| normal::<f64, _>(&mut r)).collect();
                        let len = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let mean: Vec<f64> = g
                            .mean()
                            .iter()
                            .zip(&noise)
                            .map(|(m, e)| {
                                m + e / len
                                    * scale
                                    * g.radius()
                                    * uniform::<f64, _>(&mut r, 0.5, 1.2)
                            })
                            .collect();
                        Gaussian64::new(mean, g.covariance().clone()).unwrap()
                    })
                    .collect();
                let model = Mixture64::new(comps, vec![1.0 / k as f64; k]).unwrap();
                let (got, _) = centers_recovered(&model, &truth).unwrap();
                let brute = permutations(k).iter().any(|sigma| {
                    (0..k).all(|j| {
                        let est = model.component(sigma[j]).mean();
                        let tru = truth.component(j);
                        rpmix::linalg::dist(est, tru.mean()) <= tru.radius() / 3.0
                    })
                });
                cases += 1;
                if got != brute {
                    disagreements += 1;
                }
            }
        }
    }
    if disagreements > 0 {
        failures.push(format!(
            "{disagreements} of {cases} matching cases disagree with brute force"
        ));
    }

    Outcome {
        id: 7,
        title: "property suites",
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "{checked} EM runs (max relative drop {worst_drop:.1e}, row-sum error {worst_row:.1e}); orthonormality {worst_orth:.1e}; posterior {worst_post:.1e}; {cases} matching cases agree"
            )
        } else {
            failures.join("; ")
        },
    }
}

fn digits() -> Outcome {
    let external = std::env::var("RPMIX_DIGITS_TRAIN").ok();
    let mut c = config(
        Experiment::Fig9DigitSweep,
        5,
        &[("d", list(&[40.0, 100.0]))],
    );
    if let Some(path) = &external {
        c.overrides
            .insert("data_path".into(), Value::Text(path.clone()));
        if let Ok(test) = std::env::var("RPMIX_DIGITS_TEST") {
            c.overrides.insert("test_path".into(), Value::Text(test));
        }
    }
    let report = run_ok(&c);
    let acc40 = 100.0 * report.mean(&["40"], "accuracy");
    let acc100 = 100.0 * report.mean(&["100"], "accuracy");
    match external {
        Some(path) => {
            let all = rpmix::classifier::ingest::<f64>(&path).expect("digit data");
            let train_set = match std::env::var("RPMIX_DIGITS_TEST") {
                Ok(_) => all,
                Err(_) => split_every_fifth(&all).expect("split").0,
            };
            let p = Projection64::random_orthonormal(train_set.dim(), 40, 40).expect("projection");
            let projected = cluster_analysis(&train_set, Some(&p)).expect("cluster analysis");
            let max_ecc = projected.eccentricities.iter().copied().fold(0.0, f64::max);
            let ok = (acc40 - 94.0).abs() <= 2.0 && max_ecc < 100.0;
            Outcome {
                id: 8,
                title: "digit classifier (external data)",
                pass: ok,
                detail: format!(
                    "d=40 accuracy {acc40:.2}% (need 94±2); projected max eccentricity {max_ecc:.2} (need < 100); d=100 {acc100:.2}%"
                ),
            }
        }
        None => {
            let gain = acc100 - acc40;
            Outcome {
                id: 8,
                title: "digit classifier (synthetic surrogate, no external data)",
                pass: gain < 2.0,
                detail: format!("accuracy d=40 {acc40:.2}%, d=100 {acc100:.2}%, gain {gain:.2} points (need < 2)"),
            }
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "not met"
    }
}

fn main() {
    let checks: [fn() -> Outcome; 8] = [
        fig5_table,
        fig7_tables,
        fig8_comparison,
        second_em,
        norm_concentration,
        pca_collapse,
        property_suites,
        digits,
    ];
    let mut unexpected = Vec::new();
    println!("\nacceptance criteria");
    for check in checks {
        let start = Instant::now();
        let o = check();
        let status = match (o.pass, KNOWN_FAILURES.contains(&o.id)) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as a known failure; update the list)",
            (false, true) => "FAIL (known, see decisions ledger)",
            (false, false) => {
                unexpected.push(o.id);
                "FAIL"
            }
        };
        println!(
            "criterion {} [{}]: {status} | {} | {:.1}s",
            o.id,
            o.title,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
