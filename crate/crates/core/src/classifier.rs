//! Generative classifier built from one Gaussian mixture per class, fitted in
//! a shared randomly projected space, plus per-class cluster diagnostics
//! (separation table and eccentricities).

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{parse_scalar, write_row, Dataset};
use crate::em::{run_em, weighted_log_densities, CovarianceRestriction, EmOptions};
use crate::error::{Error, Result};
use crate::gaussian::{separation_from_parts, Mixture, MixtureDoc};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::projection::{ProjectionDoc, ProjectionMatrix};
use crate::random::child_seed;
use crate::scalar::Scalar;

/// Points with a non-negative integer class label each.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    points: Dataset<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(points: Dataset<T>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if !points.matrix().is_finite() {
            return Err(Error::InvalidMixture("non-finite coordinate".into()));
        }
        Ok(LabeledDataset { points, labels })
    }

    pub fn points(&self) -> &Dataset<T> {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Distinct labels in increasing order.
    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Points carrying `label`, in dataset order.
    pub fn class_points(&self, label: usize) -> Dataset<T> {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.labels[i] == label)
            .collect();
        self.points.select(&idx)
    }

    /// Same points with labels replaced.
    pub fn relabeled(&self, labels: Vec<usize>) -> Result<Self> {
        LabeledDataset::new(self.points.clone(), labels)
    }

    /// Label-first CSV, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (p, &label) in self.points.iter().zip(&self.labels) {
            write!(out, "{label},").unwrap();
            write_row(&mut out, p);
        }
        out
    }

    /// Parses `label,x_1,...,x_n` lines. The width is fixed by the first
    /// line; blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut values: Vec<T> = Vec::new();
        let mut labels = Vec::new();
        let mut width: Option<usize> = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let label_field = fields.next().unwrap_or("");
            let label = label_field.parse::<usize>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad label {label_field:?}: {e}"),
            })?;
            let before = values.len();
            for f in fields {
                values.push(parse_scalar(f).map_err(|msg| Error::Parse { line: line_no, msg })?);
            }
            let found = values.len() - before;
            let expected = *width.get_or_insert(found);
            if found != expected {
                return Err(Error::InconsistentWidth {
                    line: line_no,
                    expected,
                    found,
                });
            }
            labels.push(label);
        }
        let width = width.ok_or(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        })?;
        if width == 0 {
            return Err(Error::Parse {
                line: 1,
                msg: "no feature columns".into(),
            });
        }
        let points = Dataset::new(Matrix::from_vec(labels.len(), width, values));
        LabeledDataset::new(points, labels)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Reads a label-first CSV file.
pub fn ingest<T: Scalar>(path: impl AsRef<Path>) -> Result<LabeledDataset<T>> {
    LabeledDataset::from_csv(&std::fs::read_to_string(path)?)
}

/// One projection, one shared-covariance mixture per class, and class priors.
#[derive(Clone, Debug)]
pub struct ClassMixtureModel<T> {
    projection: ProjectionMatrix<T>,
    classes: Vec<usize>,
    per_class: Vec<Mixture<T>>,
    class_priors: Vec<T>,
}

impl<T: Scalar> ClassMixtureModel<T> {
    pub fn new(
        projection: ProjectionMatrix<T>,
        classes: Vec<usize>,
        per_class: Vec<Mixture<T>>,
        class_priors: Vec<T>,
    ) -> Result<Self> {
        let c = classes.len();
        if c == 0 || per_class.len() != c || class_priors.len() != c {
            return Err(Error::ShapeMismatch(format!(
                "{c} classes, {} mixtures, {} priors",
                per_class.len(),
                class_priors.len()
            )));
        }
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::ShapeMismatch(
                "class labels must be strictly increasing".into(),
            ));
        }
        for m in &per_class {
            if m.dim() != projection.target_dim() {
                return Err(Error::DimensionMismatch {
                    expected: projection.target_dim(),
                    found: m.dim(),
                });
            }
        }
        let total: T = class_priors.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        if class_priors.iter().any(|&p| !(p > T::zero())) || (total - T::one()).abs() > tol {
            return Err(Error::InvalidMixture(format!(
                "class priors sum to {total}"
            )));
        }
        Ok(ClassMixtureModel {
            projection,
            classes,
            per_class,
            class_priors,
        })
    }

    pub fn projection(&self) -> &ProjectionMatrix<T> {
        &self.projection
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn per_class(&self) -> &[Mixture<T>] {
        &self.per_class
    }

    pub fn class_priors(&self) -> &[T] {
        &self.class_priors
    }

    /// Best per-Gaussian log score for every (point, class): the maximum over
    /// that class's components of `log w + log N(Px)`, plus `log prior` when
    /// `use_priors` is set. Shape `m x classes`.
    pub fn class_scores(&self, data: &Dataset<T>, use_priors: bool) -> Result<Matrix<T>> {
        if data.dim() != self.projection.source_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.projection.source_dim(),
                found: data.dim(),
            });
        }
        let low = self.projection.project_data(data)?;
        let mut scores = Matrix::zeros(data.len(), self.classes.len());
        for (c, mixture) in self.per_class.iter().enumerate() {
            let logp = weighted_log_densities(mixture, &low)?;
            let offset = if use_priors {
                self.class_priors[c].ln()
            } else {
                T::zero()
            };
            for r in 0..data.len() {
                let best = logp.row(r).iter().copied().fold(T::neg_infinity(), T::max);
                scores[(r, c)] = best + offset;
            }
        }
        Ok(scores)
    }

    /// Class label of the highest-scoring Gaussian, with priors.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        self.predict_with(x, true)
    }

    pub fn predict_with(&self, x: &[T], use_priors: bool) -> Result<usize> {
        let data = Dataset::new(Matrix::from_vec(1, x.len(), x.to_vec()));
        Ok(self.predict_all(&data, use_priors)?[0])
    }

    pub fn predict_all(&self, data: &Dataset<T>, use_priors: bool) -> Result<Vec<usize>> {
        let scores = self.class_scores(data, use_priors)?;
        Ok(scores
            .rows_iter()
            .map(|row| self.classes[argmax_first(row)])
            .collect())
    }

    /// Fraction of correctly labeled test points (priors on).
    pub fn evaluate(&self, test: &LabeledDataset<T>) -> Result<f64> {
        self.evaluate_with(test, true)
    }

    pub fn evaluate_with(&self, test: &LabeledDataset<T>, use_priors: bool) -> Result<f64> {
        if test.is_empty() {
            return Ok(0.0);
        }
        let predicted = self.predict_all(test.points(), use_priors)?;
        let hits = predicted
            .iter()
            .zip(test.labels())
            .filter(|(a, b)| a == b)
            .count();
        Ok(hits as f64 / test.len() as f64)
    }

    pub fn to_doc(&self) -> ClassModelDoc {
        ClassModelDoc {
            projection: self.projection.to_doc(),
            classes: self.classes.clone(),
            class_priors: self.class_priors.iter().map(|p| p.to_f64_lossy()).collect(),
            per_class: self.per_class.iter().map(Mixture::to_doc).collect(),
        }
    }

    pub fn from_doc(doc: &ClassModelDoc) -> Result<Self> {
        ClassMixtureModel::new(
            ProjectionMatrix::from_doc(&doc.projection)?,
            doc.classes.clone(),
            doc.per_class
                .iter()
                .map(Mixture::from_doc)
                .collect::<Result<Vec<_>>>()?,
            doc.class_priors.iter().map(|&p| T::lit(p)).collect(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ClassModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }
}

/// Serialized [`ClassMixtureModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassModelDoc {
    pub projection: ProjectionDoc,
    pub classes: Vec<usize>,
    pub class_priors: Vec<f64>,
    pub per_class: Vec<MixtureDoc>,
}

/// Index of the first maximum; NaN never wins.
fn argmax_first<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] || row[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Projects the data with a fresh orthonormal map of dimension `d` and fits
/// `per_class_k` shared-covariance Gaussians to each class independently.
/// Priors are class frequencies.
pub fn train<T: Scalar>(
    data: &LabeledDataset<T>,
    d: usize,
    per_class_k: usize,
    seed: u64,
    opts: &EmOptions,
) -> Result<ClassMixtureModel<T>> {
    let classes = data.classes();
    if classes.is_empty() {
        return Err(Error::NotEnoughData { needed: 1, have: 0 });
    }
    for &c in &classes {
        let count = data.labels().iter().filter(|&&l| l == c).count();
        if count < per_class_k {
            return Err(Error::ClassTooSmall {
                class: c,
                count,
                needed: per_class_k,
            });
        }
    }
    let projection = ProjectionMatrix::random_orthonormal(data.dim(), d, seed)?;
    let low = LabeledDataset::new(
        projection.project_data(data.points())?,
        data.labels().to_vec(),
    )?;
    let per_class = classes
        .par_iter()
        .map(|&c| {
            let points = low.class_points(c);
            run_em(
                &points,
                per_class_k,
                CovarianceRestriction::SharedFull,
                child_seed(seed, 1 + c as u64),
                opts,
            )
            .map(|fit| fit.model)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = T::from_usize(data.len()).unwrap();
    let priors = classes
        .iter()
        .map(|&c| T::from_usize(data.labels().iter().filter(|&&l| l == c).count()).unwrap() / m)
        .collect();
    ClassMixtureModel::new(projection, classes, per_class, priors)
}

/// Per-class Gaussian diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAnalysis<T> {
    pub classes: Vec<usize>,
    /// Symmetric, zero diagonal.
    pub separation: Matrix<T>,
    /// `sqrt(λ_max / λ_min)`; for rank-deficient classes `λ_min` is the
    /// smallest eigenvalue above the numerical-rank cutoff.
    pub eccentricities: Vec<T>,
    /// True when the class covariance is singular to working precision or
    /// the class has no more points than dimensions.
    pub rank_deficient: Vec<bool>,
}

impl<T: Scalar> ClusterAnalysis<T> {
    /// Class-by-class separation table with a trailing eccentricity column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for c in &self.classes {
            write!(out, ",{c}").unwrap();
        }
        out.push_str(",eccentricity\n");
        for (i, c) in self.classes.iter().enumerate() {
            write!(out, "{c},").unwrap();
            let mut row = self.separation.row(i).to_vec();
            row.push(self.eccentricities[i]);
            write_row(&mut out, &row);
        }
        out
    }

    /// Smallest off-diagonal separation.
    pub fn min_separation(&self) -> T {
        let k = self.classes.len();
        let mut best = T::infinity();
        for i in 0..k {
            for j in (i + 1)..k {
                best = best.min(self.separation[(i, j)]);
            }
        }
        best
    }
}

/// Fits one Gaussian (sample mean, ML covariance) per class, optionally
/// after projecting, and tabulates pairwise separations and eccentricities.
/// Singular class covariances are flagged rather than rejected.
pub fn cluster_analysis<T: Scalar>(
    data: &LabeledDataset<T>,
    projection: Option<&ProjectionMatrix<T>>,
) -> Result<ClusterAnalysis<T>> {
    let points = match projection {
        Some(p) => p.project_data(data.points())?,
        None => data.points().clone(),
    };
    let data = LabeledDataset::new(points, data.labels().to_vec())?;
    let classes = data.classes();
    let n = data.dim();
    let stats: Vec<(Vec<T>, T, T, bool)> = classes
        .par_iter()
        .map(|&c| {
            let pts = data.class_points(c);
            let cov = pts.covariance();
            let eig = symmetric_eigen(&cov)?;
            let hi = eig.values.last().copied().unwrap_or(T::zero());
            let cutoff = hi * T::epsilon() * T::from_usize(n.max(1)).unwrap();
            let lo = eig.values.iter().copied().find(|&v| v > cutoff);
            let singular = eig.values.first().is_none_or(|&v| v <= cutoff);
            let ecc = match lo {
                Some(lo) => (hi / lo).sqrt(),
                None => T::infinity(),
            };
            Ok((pts.mean(), cov.trace(), ecc, singular || pts.len() <= n))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = classes.len();
    let mut separation = Matrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let s = separation_from_parts(&stats[i].0, stats[i].1, &stats[j].0, stats[j].1);
            separation[(i, j)] = s;
            separation[(j, i)] = s;
        }
    }
    Ok(ClusterAnalysis {
        classes,
        separation,
        eccentricities: stats.iter().map(|s| s.2).collect(),
        rank_deficient: stats.iter().map(|s| s.3).collect(),
    })
}
