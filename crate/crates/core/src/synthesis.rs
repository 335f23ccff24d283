//! Synthetic test mixtures with controlled eccentricity and separation.
//!
//! Covariances of eccentricity `E` get eigenvalue square roots drawn uniformly
//! from `[1, E]` with both endpoints always present. Centers sit on a simplex
//! so that every pair of components is exactly `c`-separated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, Mixture};
use crate::linalg::{dist, householder_qr, symmetric_eigen, Matrix};
use crate::projection::ProjectionMatrix;
use crate::random::{child_seed, normal, rng, uniform};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovarianceMode {
    /// One identity covariance shared by every component (requires `E = 1`).
    SphericalShared,
    /// Per-component axis-aligned covariances.
    DiagonalDistinct,
    /// Per-component covariances in independent random orientations.
    RotatedDistinct,
    /// One randomly oriented covariance shared by every component.
    FullShared,
}

impl CovarianceMode {
    pub fn is_shared(self) -> bool {
        matches!(
            self,
            CovarianceMode::SphericalShared | CovarianceMode::FullShared
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub eccentricity: f64,
    pub covariance_mode: CovarianceMode,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::BadSpec(format!("need k >= 2, got {}", self.k)));
        }
        if !(self.c > 0.0) {
            return Err(Error::BadSeparation(self.c));
        }
        if !(self.eccentricity >= 1.0) || !self.eccentricity.is_finite() {
            return Err(Error::BadSpec(format!(
                "eccentricity must be >= 1, got {}",
                self.eccentricity
            )));
        }
        if self.covariance_mode == CovarianceMode::SphericalShared && self.eccentricity != 1.0 {
            return Err(Error::BadSpec(
                "spherical covariances have eccentricity 1".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::BadDims("dimension must be positive".into()));
        }
        Ok(())
    }
}

/// A covariance whose eigenvalue square roots are `1`, `E`, and `n - 2`
/// uniform draws from `[1, E]`. The two pinned endpoints go to uniformly
/// chosen positions.
pub fn eccentric_covariance<T: Scalar>(
    n: usize,
    eccentricity: f64,
    mode: CovarianceMode,
    seed: u64,
) -> Result<Matrix<T>> {
    if n == 0 {
        return Err(Error::BadDims("dimension must be positive".into()));
    }
    if !(eccentricity >= 1.0) {
        return Err(Error::BadSpec(format!(
            "eccentricity must be >= 1, got {eccentricity}"
        )));
    }
    if eccentricity == 1.0 || mode == CovarianceMode::SphericalShared {
        if eccentricity != 1.0 {
            return Err(Error::BadSpec(
                "spherical covariances have eccentricity 1".into(),
            ));
        }
        return Ok(Matrix::identity(n));
    }
    if n < 2 {
        return Err(Error::BadDims(
            "eccentricity above 1 needs at least two dimensions".into(),
        ));
    }
    let mut r = rng(seed);
    let lo_pos = r.random_range(0..n);
    let mut hi_pos = r.random_range(0..n - 1);
    if hi_pos >= lo_pos {
        hi_pos += 1;
    }
    let roots: Vec<f64> = (0..n)
        .map(|i| {
            if i == lo_pos {
                1.0
            } else if i == hi_pos {
                eccentricity
            } else {
                r.random_range(1.0..=eccentricity)
            }
        })
        .collect();
    let eigenvalues: Vec<T> = roots.iter().map(|s| T::lit(s * s)).collect();
    let diag = Matrix::from_diag(&eigenvalues);
    match mode {
        CovarianceMode::DiagonalDistinct => Ok(diag),
        _ => {
            let q = random_orthogonal(n, &mut r)?;
            crate::linalg::congruence(&q, &diag)
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal made positive.
fn random_orthogonal<T: Scalar, R: Rng>(n: usize, r: &mut R) -> Result<Matrix<T>> {
    let g = Matrix::from_vec(n, n, (0..n * n).map(|_| normal::<T, R>(r)).collect());
    let (mut q, rr) = householder_qr(&g)?;
    for j in 0..n {
        if rr[(j, j)] < T::zero() {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

const REPAIR_ROUNDS: usize = 200;

/// Places `k` centers in `R^n` so that every pair `(i, j)` is exactly
/// `c * max(radius_i, radius_j)` apart.
///
/// The target distances form an ultrametric, so they embed exactly as a
/// simplex; the embedding is computed by classical scaling, polished by
/// pairwise repair, verified, and finally rotated into a uniformly random
/// `(k-1)`-dimensional subspace.
pub fn packed_centers<T: Scalar>(
    k: usize,
    n: usize,
    c: f64,
    radii: &[T],
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    if !(c > 0.0) {
        return Err(Error::BadSeparation(c));
    }
    if k == 0 || radii.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "{} radii for {k} centers",
            radii.len()
        )));
    }
    if k > n + 1 {
        return Err(Error::TooManyComponents { k, n });
    }
    if k == 1 {
        return Ok(vec![vec![T::zero(); n]]);
    }
    let c = T::lit(c);
    let target = |i: usize, j: usize| c * radii[i].max(radii[j]);

    // Classical scaling: B = -1/2 J D^2 J.
    let mut d2 = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let t = target(i, j);
                d2[(i, j)] = t * t;
            }
        }
    }
    let kf = T::from_usize(k).unwrap();
    let row_means: Vec<T> = (0..k)
        .map(|i| d2.row(i).iter().copied().sum::<T>() / kf)
        .collect();
    let grand = row_means.iter().copied().sum::<T>() / kf;
    let mut b = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            b[(i, j)] = -T::lit(0.5) * (d2[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    let eig = symmetric_eigen(&b)?;
    let dim = k - 1;
    // Largest k-1 eigenpairs; the smallest belongs to the all-ones direction.
    let mut coords = Matrix::zeros(k, dim);
    for a in 0..dim {
        let idx = k - 1 - a;
        let scale = eig.values[idx].max(T::zero()).sqrt();
        for i in 0..k {
            coords[(i, a)] = eig.vectors[(idx, i)] * scale;
        }
    }

    let rel_violation = |coords: &Matrix<T>| {
        let mut worst = T::zero();
        for i in 0..k {
            for j in (i + 1)..k {
                let t = target(i, j);
                worst = worst.max((dist(coords.row(i), coords.row(j)) - t).abs() / t);
            }
        }
        worst
    };
    for _ in 0..REPAIR_ROUNDS {
        if rel_violation(&coords) <= T::epsilon() * T::lit(64.0) {
            break;
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let cur = dist(coords.row(i), coords.row(j));
                if cur == T::zero() {
                    continue;
                }
                let shift = (target(i, j) - cur) / (T::lit(2.0) * cur);
                for a in 0..dim {
                    let delta = (coords[(i, a)] - coords[(j, a)]) * shift;
                    coords[(i, a)] += delta;
                    coords[(j, a)] -= delta;
                }
            }
        }
    }
    let worst = rel_violation(&coords);
    if worst > T::lit(1e-6) {
        return Err(Error::PackingFailed(worst.to_f64_lossy()));
    }

    let basis = ProjectionMatrix::<T>::random_orthonormal(n, dim, seed)?;
    Ok((0..k)
        .map(|i| {
            let mut center = vec![T::zero(); n];
            for a in 0..dim {
                let w = coords[(i, a)];
                for (x, &e) in center.iter_mut().zip(basis.matrix().row(a)) {
                    *x += w * e;
                }
            }
            center
        })
        .collect())
}

/// Weights drawn uniformly from `[1/(2k), 3/(2k)]` and renormalized.
pub fn mixing_weights<T: Scalar>(k: usize, seed: u64) -> Vec<T> {
    if k == 1 {
        return vec![T::one()];
    }
    let mut r = rng(seed);
    let kf = k as f64;
    let raw: Vec<T> = (0..k)
        .map(|_| uniform(&mut r, 1.0 / (2.0 * kf), 3.0 / (2.0 * kf)))
        .collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Builds the mixture described by `spec`: covariances per mode, simplex
/// centers at separation `c` measured with each component's trace-radius,
/// and near-uniform weights.
pub fn make_mixture<T: Scalar>(spec: &MixtureSpec) -> Result<Mixture<T>> {
    spec.validate()?;
    let MixtureSpec {
        n,
        k,
        c,
        eccentricity,
        covariance_mode: mode,
        seed,
    } = *spec;
    let covariances: Vec<Matrix<T>> = if mode.is_shared() {
        let shared = eccentric_covariance(n, eccentricity, mode, child_seed(seed, 1))?;
        vec![shared; k]
    } else {
        (0..k)
            .map(|i| eccentric_covariance(n, eccentricity, mode, child_seed(seed, 100 + i as u64)))
            .collect::<Result<_>>()?
    };
    let radii: Vec<T> = covariances.iter().map(|cov| cov.trace().sqrt()).collect();
    let centers = packed_centers(k, n, c, &radii, child_seed(seed, 2))?;
    let weights = mixing_weights(k, child_seed(seed, 3));
    let components = centers
        .into_iter()
        .zip(covariances)
        .map(|(mu, cov)| Gaussian::new(mu, cov))
        .collect::<Result<Vec<_>>>()?;
    Mixture::new(components, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::spectral_summary;

    #[test]
    fn unit_eccentricity_is_identity() {
        for mode in [
            CovarianceMode::SphericalShared,
            CovarianceMode::DiagonalDistinct,
            CovarianceMode::RotatedDistinct,
        ] {
            let c: Matrix<f64> = eccentric_covariance(4, 1.0, mode, 9).unwrap();
            assert_eq!(c, Matrix::identity(4));
        }
    }

    #[test]
    fn diagonal_hits_requested_eccentricity() {
        let c: Matrix<f64> =
            eccentric_covariance(50, 1000.0, CovarianceMode::DiagonalDistinct, 1).unwrap();
        let s = spectral_summary(&c).unwrap();
        assert!((s.eccentricity - 1000.0).abs() < 1e-3);
        assert_eq!(c.asymmetry(), 0.0);
    }

    #[test]
    fn rotation_keeps_spectrum() {
        let d: Matrix<f64> =
            eccentric_covariance(12, 25.0, CovarianceMode::DiagonalDistinct, 77).unwrap();
        let r: Matrix<f64> =
            eccentric_covariance(12, 25.0, CovarianceMode::RotatedDistinct, 77).unwrap();
        let mut expected = d.diag();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got = spectral_summary(&r).unwrap().eigenvalues;
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
        assert!(r[(0, 1)].abs() > 0.0);
    }

    #[test]
    fn endpoint_positions_vary_with_seed() {
        let positions: std::collections::HashSet<usize> = (0..20)
            .map(|s| {
                let c: Matrix<f64> =
                    eccentric_covariance(10, 5.0, CovarianceMode::DiagonalDistinct, s).unwrap();
                c.diag().iter().position(|&v| v == 25.0).unwrap()
            })
            .collect();
        assert!(positions.len() > 3);
    }

    #[test]
    fn eccentric_needs_two_dims() {
        assert!(matches!(
            eccentric_covariance::<f64>(1, 2.0, CovarianceMode::DiagonalDistinct, 0),
            Err(Error::BadDims(_))
        ));
    }

    #[test]
    fn two_centers_at_exact_distance() {
        let r = 3.5f64;
        let centers = packed_centers(2, 7, 0.8, &[r, r], 4).unwrap();
        assert!((dist(&centers[0], &centers[1]) - 0.8 * r).abs() < 1e-12);
    }

    #[test]
    fn unequal_radii_pair_constraints() {
        let centers = packed_centers(3, 5, 1.0, &[1.0f64, 1.0, 2.0], 8).unwrap();
        let d = |i: usize, j: usize| dist(&centers[i], &centers[j]);
        assert!((d(0, 1) - 1.0).abs() < 1e-9);
        assert!((d(0, 2) - 2.0).abs() < 1e-9);
        assert!((d(1, 2) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn packing_errors() {
        assert_eq!(
            packed_centers(5, 3, 1.0, &[1.0f64; 5], 0),
            Err(Error::TooManyComponents { k: 5, n: 3 })
        );
        assert_eq!(
            packed_centers(2, 3, 0.0, &[1.0f64; 2], 0),
            Err(Error::BadSeparation(0.0))
        );
    }

    #[test]
    fn weights_examples() {
        assert_eq!(mixing_weights::<f64>(1, 3), vec![1.0]);
        for seed in 0..50 {
            let w: Vec<f64> = mixing_weights(5, seed);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| x > 0.05 && x < 0.4));
        }
    }

    #[test]
    fn weights_average_to_uniform() {
        let mut sums = [0.0f64; 5];
        for seed in 0..10_000 {
            for (s, w) in sums.iter_mut().zip(mixing_weights::<f64>(5, seed)) {
                *s += w;
            }
        }
        for s in sums {
            assert!((s / 10_000.0 - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn spherical_experiment_mixture() {
        let spec = MixtureSpec {
            n: 50,
            k: 5,
            c: 1.0,
            eccentricity: 1.0,
            covariance_mode: CovarianceMode::SphericalShared,
            seed: 12,
        };
        let m: Mixture<f64> = make_mixture(&spec).unwrap();
        let table = m.separation_table();
        for i in 0..5 {
            assert_eq!(m.component(i).covariance(), &Matrix::identity(50));
            for j in 0..5 {
                if i != j {
                    assert!((table[(i, j)] - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rotated_distinct_mixture() {
        let spec = MixtureSpec {
            n: 100,
            k: 3,
            c: 0.8,
            eccentricity: 25.0,
            covariance_mode: CovarianceMode::RotatedDistinct,
            seed: 5,
        };
        let m: Mixture<f64> = make_mixture(&spec).unwrap();
        assert!((m.separation().unwrap() - 0.8).abs() < 1e-6);
        for g in m.components() {
            assert!((g.eccentricity().unwrap() / 25.0 - 1.0).abs() < 1e-6);
        }
        assert_ne!(m.component(0).covariance(), m.component(1).covariance());
    }

    #[test]
    fn zero_separation_rejected() {
        let spec = MixtureSpec {
            n: 10,
            k: 2,
            c: 0.0,
            eccentricity: 1.0,
            covariance_mode: CovarianceMode::SphericalShared,
            seed: 0,
        };
        assert_eq!(make_mixture::<f64>(&spec), Err(Error::BadSeparation(0.0)));
    }
}
