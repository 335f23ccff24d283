use rpmix::random::rng;
use rpmix::synthesis::{eccentric_covariance, make_mixture, CovarianceMode, MixtureSpec};
use rpmix::{Gaussian64, Mixture64};

/// CDF of the chi-square distribution with an even number of degrees of freedom.
fn chi2_cdf_even(x: f64, dof: usize) -> f64 {
    let h = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..dof / 2 {
        term *= h / i as f64;
        sum += term;
    }
    1.0 - (-h).exp() * sum
}

fn rotated_gaussian(n: usize, seed: u64) -> Gaussian64 {
    let cov = eccentric_covariance(n, 5.0, CovarianceMode::RotatedDistinct, seed).unwrap();
    Gaussian64::new((0..n).map(|i| i as f64 - 1.5).collect(), cov).unwrap()
}

#[test]
fn mahalanobis_radii_follow_chi_square() {
    let g = rotated_gaussian(4, 11);
    let mut r = rng(5);
    let m = 20_000;
    let mut radii: Vec<f64> = (0..m)
        .map(|_| g.mahalanobis_sq(&g.draw(&mut r)).unwrap())
        .collect();
    radii.sort_by(f64::total_cmp);
    let ks = radii
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = chi2_cdf_even(x, 4);
            (f - i as f64 / m as f64)
                .abs()
                .max((f - (i + 1) as f64 / m as f64).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic.
    assert!(ks < 1.63 / (m as f64).sqrt(), "KS statistic {ks}");
}

#[test]
fn sample_moments_match_parameters() {
    let g = rotated_gaussian(3, 2);
    let mix = Mixture64::new(vec![g.clone()], vec![1.0]).unwrap();
    let data = mix.sample(50_000, 9);
    for (got, want) in data.mean().iter().zip(g.mean()) {
        assert!((got - want).abs() < 0.05, "{got} vs {want}");
    }
    let cov = data.covariance();
    let scale = g.covariance().max_abs();
    assert!(cov.max_abs_diff(g.covariance()) < 0.05 * scale);
}

#[test]
fn labeled_sample_frequencies_follow_weights() {
    let mix: Mixture64 = make_mixture(&MixtureSpec {
        n: 5,
        k: 3,
        c: 2.0,
        eccentricity: 1.0,
        covariance_mode: CovarianceMode::SphericalShared,
        seed: 4,
    })
    .unwrap();
    let m = 30_000;
    let (_, labels) = mix.sample_labeled(m, 8);
    for (i, &w) in mix.weights().iter().enumerate() {
        let freq = labels.iter().filter(|&&l| l == i).count() as f64 / m as f64;
        assert!(
            (freq - w).abs() < 4.0 * (w * (1.0 - w) / m as f64).sqrt(),
            "{freq} vs {w}"
        );
    }
}

#[test]
fn sampling_is_reproducible() {
    let g = rotated_gaussian(3, 1);
    let mix = Mixture64::new(vec![g], vec![1.0]).unwrap();
    assert_eq!(mix.sample(20, 3), mix.sample(20, 3));
    assert_ne!(mix.sample(20, 3), mix.sample(20, 4));
}
