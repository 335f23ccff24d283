//! Linear maps from `R^n` to `R^d`: random projections (orthonormalized
//! Gaussian or scaled uniform entries) and PCA, plus their action on points,
//! Gaussians and mixtures.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, Mixture};
use crate::linalg::{congruence, gram_schmidt_rows, right_svd, Matrix};
use crate::random::{normal, rng, uniform};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectionKind {
    OrthonormalRP,
    UniformRP,
    PCA,
}

/// A `d x n` projection matrix tagged with how it was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix<T> {
    rows: Matrix<T>,
    kind: ProjectionKind,
}

/// How many times a degenerate Gaussian draw is redrawn before giving up.
const MAX_REDRAWS: usize = 3;

fn check_dims(n: usize, d: usize) -> Result<()> {
    if d == 0 || d > n {
        return Err(Error::BadDims(format!(
            "target dimension {d} must be in 1..={n}"
        )));
    }
    Ok(())
}

impl<T: Scalar> ProjectionMatrix<T> {
    /// Wraps an explicit matrix. Orthonormal kinds are checked for
    /// `A A^T = I` within `1e-9`.
    pub fn from_matrix(rows: Matrix<T>, kind: ProjectionKind) -> Result<Self> {
        check_dims(rows.ncols(), rows.nrows())?;
        let p = ProjectionMatrix { rows, kind };
        if kind != ProjectionKind::UniformRP {
            let err = p.orthonormality_error();
            if err > T::lit(1e-9).max(T::epsilon() * T::lit(64.0)) {
                return Err(Error::BadDims(format!(
                    "rows are not orthonormal (error {err})"
                )));
            }
        }
        Ok(p)
    }

    /// Gaussian entries whose rows are then orthonormalized by modified
    /// Gram-Schmidt: a uniformly random `d`-dimensional subspace.
    pub fn random_orthonormal(n: usize, d: usize, seed: u64) -> Result<Self> {
        check_dims(n, d)?;
        let mut r = rng(seed);
        for _ in 0..=MAX_REDRAWS {
            let raw = Matrix::from_vec(d, n, (0..d * n).map(|_| normal(&mut r)).collect());
            match gram_schmidt_rows(&raw) {
                Ok(rows) => {
                    return Ok(ProjectionMatrix {
                        rows,
                        kind: ProjectionKind::OrthonormalRP,
                    })
                }
                Err(Error::DegenerateDraw) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DegenerateDraw)
    }

    /// Entries i.i.d. uniform on `[-1, 1]`, scaled by `sqrt(3/n)` so that
    /// `E‖Av‖² = d/n` for unit `v`, as for the orthonormal generator.
    pub fn random_uniform(n: usize, d: usize, seed: u64) -> Result<Self> {
        check_dims(n, d)?;
        let mut r = rng(seed);
        let scale = T::lit((3.0 / n as f64).sqrt());
        let data = (0..d * n)
            .map(|_| uniform::<T, _>(&mut r, -1.0, 1.0) * scale)
            .collect();
        Ok(ProjectionMatrix {
            rows: Matrix::from_vec(d, n, data),
            kind: ProjectionKind::UniformRP,
        })
    }

    /// Top-`d` principal directions of `data`, from the SVD of the centered
    /// data matrix. Rows are ordered by decreasing variance and each row's
    /// first nonzero coordinate is positive.
    pub fn pca(data: &Dataset<T>, d: usize) -> Result<Self> {
        let n = data.dim();
        check_dims(n, d)?;
        if data.len() < d + 1 {
            return Err(Error::NotEnoughData {
                needed: d + 1,
                have: data.len(),
            });
        }
        let mean = data.mean();
        let mut centered = data.matrix().clone();
        for i in 0..centered.nrows() {
            for (x, &m) in centered.row_mut(i).iter_mut().zip(&mean) {
                *x -= m;
            }
        }
        let svd = right_svd(&centered)?;
        let mut rows = Matrix::zeros(d, n);
        for i in 0..d {
            let v = svd.vectors.row(i);
            let flip = v
                .iter()
                .find(|x| **x != T::zero())
                .is_some_and(|&x| x < T::zero());
            for (dst, &x) in rows.row_mut(i).iter_mut().zip(v) {
                *dst = if flip { -x } else { x };
            }
        }
        Ok(ProjectionMatrix {
            rows,
            kind: ProjectionKind::PCA,
        })
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn source_dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.rows.nrows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.rows
    }

    /// `max |A A^T − I_d|`.
    pub fn orthonormality_error(&self) -> T {
        let gram = self.rows.matmul_t(&self.rows).expect("shapes agree");
        gram.max_abs_diff(&Matrix::identity(self.target_dim()))
    }

    fn check_source(&self, n: usize) -> Result<()> {
        if n != self.source_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.source_dim(),
                found: n,
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_source(x.len())?;
        self.rows.mul_vec(x)
    }

    pub fn project_data(&self, data: &Dataset<T>) -> Result<Dataset<T>> {
        self.check_source(data.dim())?;
        Ok(Dataset::new(data.matrix().matmul_t(&self.rows)?))
    }

    /// `N(Aμ, AΣA^T)`.
    pub fn project_gaussian(&self, g: &Gaussian<T>) -> Result<Gaussian<T>> {
        self.check_source(g.dim())?;
        let mean = self.rows.mul_vec(g.mean())?;
        let cov = congruence(&self.rows, g.covariance())?;
        Gaussian::new(mean, cov)
    }

    pub fn project_mixture(&self, m: &Mixture<T>) -> Result<Mixture<T>> {
        let comps = m
            .components()
            .iter()
            .map(|g| self.project_gaussian(g))
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(comps, m.weights().to_vec())
    }

    /// `Σ_i ‖A x_i − A μ‖²`, the variance captured by the map.
    pub fn captured_variance(&self, data: &Dataset<T>) -> Result<T> {
        let projected = self.project_data(data)?;
        let mean = projected.mean();
        Ok(projected
            .iter()
            .map(|p| crate::linalg::sq_dist(p, &mean))
            .sum())
    }

    pub fn to_doc(&self) -> ProjectionDoc {
        ProjectionDoc {
            kind: self.kind,
            source_dim: self.source_dim(),
            target_dim: self.target_dim(),
            entries: self
                .rows
                .as_slice()
                .iter()
                .map(|x| x.to_f64_lossy())
                .collect(),
        }
    }

    pub fn from_doc(doc: &ProjectionDoc) -> Result<Self> {
        if doc.entries.len() != doc.source_dim * doc.target_dim {
            return Err(Error::DimensionMismatch {
                expected: doc.source_dim * doc.target_dim,
                found: doc.entries.len(),
            });
        }
        let rows = Matrix::from_vec(
            doc.target_dim,
            doc.source_dim,
            doc.entries.iter().map(|&x| T::lit(x)).collect(),
        );
        Self::from_matrix(rows, doc.kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("projection document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProjectionDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }
}

/// Serialized [`ProjectionMatrix`] with row-major entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDoc {
    pub kind: ProjectionKind,
    pub source_dim: usize,
    pub target_dim: usize,
    pub entries: Vec<f64>,
}
