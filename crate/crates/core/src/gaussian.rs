//! Multivariate Gaussians, mixtures, and the geometric quantities used to
//! describe them: trace-radius, eccentricity, and c-separation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dist, symmetric_eigen, Cholesky, Matrix};
use crate::random::{normal, rng};
use crate::scalar::Scalar;

/// `N(mean, covariance)` with a cached Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian<T> {
    mean: Vec<T>,
    covariance: Matrix<T>,
    factor: Cholesky<T>,
}

impl<T: Scalar> Gaussian<T> {
    /// Validates symmetry (then symmetrizes) and positive definiteness.
    pub fn new(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: covariance.nrows(),
            });
        }
        if !covariance.is_finite() || mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let covariance = covariance.symmetrized()?;
        let factor = Cholesky::new(&covariance)?;
        Ok(Gaussian {
            mean,
            covariance,
            factor,
        })
    }

    /// `N(mean, variance * I)`.
    pub fn spherical(mean: Vec<T>, variance: T) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, Matrix::identity(n).scale(variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn factor(&self) -> &Cholesky<T> {
        &self.factor
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_conditioning(&self) -> Result<()> {
        let cond = self.factor.condition_estimate();
        if !(cond < T::max_condition()) {
            return Err(Error::IllConditioned(cond.to_f64_lossy()));
        }
        Ok(())
    }

    /// `(x - mean)^T Σ^{-1} (x - mean)`.
    pub fn mahalanobis_sq(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        self.check_conditioning()?;
        let diff: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        Ok(self.factor.quad_form_inv(&diff))
    }

    pub fn mahalanobis(&self, x: &[T]) -> Result<T> {
        self.mahalanobis_sq(x).map(T::sqrt)
    }

    /// Normalizing constant of the log-density,
    /// `-(n/2) ln(2π) - (1/2) ln|Σ|`.
    pub fn log_norm_const(&self) -> T {
        let n = T::from_usize(self.dim()).unwrap();
        let half = T::lit(0.5);
        -half * n * (T::TAU()).ln() - half * self.factor.log_det()
    }

    pub fn log_density(&self, x: &[T]) -> Result<T> {
        let q = self.mahalanobis_sq(x)?;
        Ok(self.log_norm_const() - T::lit(0.5) * q)
    }

    /// Trace-radius `sqrt(trace Σ)`.
    pub fn radius(&self) -> T {
        self.covariance.trace().sqrt()
    }

    pub fn eccentricity(&self) -> Result<T> {
        spectral_summary(&self.covariance).map(|s| s.eccentricity)
    }

    /// Draws one point given a source of randomness.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let z: Vec<T> = (0..self.dim()).map(|_| normal(rng)).collect();
        self.factor
            .mul_lower(&z)
            .into_iter()
            .zip(&self.mean)
            .map(|(a, &m)| a + m)
            .collect()
    }
}

/// Sorted spectrum of a covariance together with its eccentricity and trace.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSummary<T> {
    /// Ascending.
    pub eigenvalues: Vec<T>,
    /// `sqrt(λ_max / λ_min)`.
    pub eccentricity: T,
    pub trace: T,
}

pub fn spectral_summary<T: Scalar>(cov: &Matrix<T>) -> Result<SpectralSummary<T>> {
    let eig = symmetric_eigen(cov)?;
    let lo = *eig.values.first().ok_or(Error::NotPositiveDefinite)?;
    let hi = *eig.values.last().unwrap();
    if !(lo > T::zero()) {
        return Err(Error::NotPositiveDefinite);
    }
    let trace = eig.values.iter().copied().sum();
    Ok(SpectralSummary {
        eccentricity: (hi / lo).sqrt(),
        eigenvalues: eig.values,
        trace,
    })
}

/// `‖μ₁ − μ₂‖ / sqrt(max(trace Σ₁, trace Σ₂))`: the largest `c` for which the
/// pair is c-separated.
pub fn pairwise_separation<T: Scalar>(a: &Gaussian<T>, b: &Gaussian<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(separation_from_parts(
        a.mean(),
        a.covariance().trace(),
        b.mean(),
        b.covariance().trace(),
    ))
}

/// Separation from means and covariance traces; also used where no valid
/// [`Gaussian`] exists (rank-deficient class covariances).
pub fn separation_from_parts<T: Scalar>(mean_a: &[T], trace_a: T, mean_b: &[T], trace_b: T) -> T {
    dist(mean_a, mean_b) / trace_a.max(trace_b).sqrt()
}

/// Probability bound `2 exp(-n ε² / 24)` on `|‖X‖²/n − 1| > ε` for
/// `X ~ N(0, I_n)`.
pub fn norm_tail_bound(n: usize, eps: f64) -> f64 {
    2.0 * (-(n as f64) * eps * eps / 24.0).exp()
}

/// A finite mixture of Gaussians in a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture<T> {
    components: Vec<Gaussian<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> Mixture<T> {
    pub fn new(components: Vec<Gaussian<T>>, weights: Vec<T>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("no components".into()));
        }
        if components.len() != weights.len() {
            return Err(Error::InvalidMixture(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        let n = components[0].dim();
        if let Some(bad) = components.iter().find(|g| g.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::InvalidMixture("weights must be positive".into()));
        }
        let total: T = weights.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Mixture {
            components,
            weights,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[Gaussian<T>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Gaussian<T> {
        &self.components[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Minimum pairwise separation over all unordered component pairs.
    pub fn separation(&self) -> Result<T> {
        if self.k() < 2 {
            return Err(Error::TooFewComponents);
        }
        let mut best = T::infinity();
        for i in 0..self.k() {
            for j in (i + 1)..self.k() {
                best = best.min(pairwise_separation(
                    &self.components[i],
                    &self.components[j],
                )?);
            }
        }
        Ok(best)
    }

    /// `k x k` table of pairwise separations with a zero diagonal.
    pub fn separation_table(&self) -> Matrix<T> {
        let k = self.k();
        let mut t = Matrix::zeros(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                let s = pairwise_separation(&self.components[i], &self.components[j])
                    .expect("components share a dimension");
                t[(i, j)] = s;
                t[(j, i)] = s;
            }
        }
        t
    }

    /// Draws `count` i.i.d. points; returns the points and the component
    /// index each was drawn from.
    pub fn sample_labeled(&self, count: usize, seed: u64) -> (Dataset<T>, Vec<usize>) {
        let mut r = rng(seed);
        let mut cumulative = Vec::with_capacity(self.k());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w.to_f64_lossy();
            cumulative.push(acc);
        }
        let mut data = Vec::with_capacity(count * self.dim());
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let u: f64 = r.random::<f64>() * acc;
            let i = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(self.k() - 1);
            data.extend(self.components[i].draw(&mut r));
            labels.push(i);
        }
        (
            Dataset::new(Matrix::from_vec(count, self.dim(), data)),
            labels,
        )
    }

    pub fn sample(&self, count: usize, seed: u64) -> Dataset<T> {
        self.sample_labeled(count, seed).0
    }
}

/// Serialized form of a [`Mixture`]: covariances are flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureDoc {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

impl<T: Scalar> Mixture<T> {
    pub fn to_doc(&self) -> MixtureDoc {
        MixtureDoc {
            dim: self.dim(),
            weights: self.weights.iter().map(|w| w.to_f64_lossy()).collect(),
            means: self
                .components
                .iter()
                .map(|g| g.mean().iter().map(|x| x.to_f64_lossy()).collect())
                .collect(),
            covariances: self
                .components
                .iter()
                .map(|g| {
                    g.covariance()
                        .as_slice()
                        .iter()
                        .map(|x| x.to_f64_lossy())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &MixtureDoc) -> Result<Self> {
        if doc.means.len() != doc.covariances.len() {
            return Err(Error::InvalidMixture(
                "means and covariances differ in count".into(),
            ));
        }
        let n = doc.dim;
        let components = doc
            .means
            .iter()
            .zip(&doc.covariances)
            .map(|(m, c)| {
                if m.len() != n || c.len() != n * n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: m.len(),
                    });
                }
                Gaussian::new(
                    m.iter().map(|&x| T::lit(x)).collect(),
                    Matrix::from_vec(n, n, c.iter().map(|&x| T::lit(x)).collect()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(components, doc.weights.iter().map(|&w| T::lit(w)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("mixture document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MixtureDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }
}
