//! Point collections and their CSV form.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! value read back is bit-identical to the value written.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Row-major point cloud: one point per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    points: Matrix<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(points: Matrix<T>) -> Self {
        Dataset { points }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Matrix::from_rows(rows).map(Dataset::new)
    }

    /// An empty dataset that still remembers its dimension.
    pub fn empty(dim: usize) -> Self {
        Dataset::new(Matrix::zeros(0, dim))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> &[T] {
        self.points.row(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.points.rows_iter()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.points
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.points
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        Dataset::new(Matrix::from_vec(indices.len(), self.dim(), data))
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &Dataset<T>) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let mut data = self.points.as_slice().to_vec();
        data.extend_from_slice(other.points.as_slice());
        Ok(Dataset::new(Matrix::from_vec(
            self.len() + other.len(),
            self.dim(),
            data,
        )))
    }

    pub fn mean(&self) -> Vec<T> {
        let mut mean = vec![T::zero(); self.dim()];
        for p in self.iter() {
            for (m, &x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        let m = T::from_usize(self.len().max(1)).unwrap();
        mean.iter_mut().for_each(|x| *x /= m);
        mean
    }

    /// Maximum-likelihood (divide-by-count) covariance.
    pub fn covariance(&self) -> Matrix<T> {
        let n = self.dim();
        let mean = self.mean();
        let mut cov = Matrix::zeros(n, n);
        let mut centered = vec![T::zero(); n];
        for p in self.iter() {
            for ((c, &x), &m) in centered.iter_mut().zip(p).zip(&mean) {
                *c = x - m;
            }
            for i in 0..n {
                let ci = centered[i];
                let row = cov.row_mut(i);
                for j in 0..=i {
                    row[j] += ci * centered[j];
                }
            }
        }
        let m = T::from_usize(self.len().max(1)).unwrap();
        for i in 0..n {
            for j in 0..=i {
                let v = cov[(i, j)] / m;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    pub fn to_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            let names: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
            out.push_str(&names.join(","));
            out.push('\n');
        }
        for p in self.iter() {
            write_row(&mut out, p);
        }
        out
    }

    /// Parses headerless or headed numeric CSV. A first line that does not
    /// parse as numbers is treated as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<T>> = Vec::new();
        let mut width = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<T>, _> =
                line.split(',').map(|f| parse_scalar(f.trim())).collect();
            let row = match parsed {
                Ok(r) => r,
                Err(_) if rows.is_empty() && width.is_none() => {
                    width = Some(line.split(',').count());
                    continue;
                }
                Err(msg) => return Err(Error::Parse { line: line_no, msg }),
            };
            let expected = *width.get_or_insert(row.len());
            if row.len() != expected {
                return Err(Error::InconsistentWidth {
                    line: line_no,
                    expected,
                    found: row.len(),
                });
            }
            rows.push(row);
        }
        match width {
            None => Err(Error::Parse {
                line: 1,
                msg: "no data rows".into(),
            }),
            Some(w) if rows.is_empty() => Ok(Dataset::empty(w)),
            Some(_) => Dataset::from_rows(&rows),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(header))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn write_row<T: Scalar>(out: &mut String, values: &[T]) {
    for (j, v) in values.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        write!(out, "{}", v).unwrap();
    }
    out.push('\n');
}

pub(crate) fn parse_scalar<T: Scalar>(field: &str) -> std::result::Result<T, String> {
    let v = f64::from_str(field).map_err(|e| format!("bad number {field:?}: {e}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value {field:?}"));
    }
    Ok(T::lit(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let rows = vec![
            vec![0.1f64, -1.0 / 3.0, 1e-300],
            vec![std::f64::consts::PI, 2.0f64.sqrt(), -0.0],
        ];
        let ds = Dataset::from_rows(&rows).unwrap();
        for header in [false, true] {
            let back: Dataset<f64> = Dataset::from_csv(&ds.to_csv(header)).unwrap();
            assert_eq!(back, ds);
        }
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = Dataset::<f64>::from_csv("1,2\n3,4,5\n").unwrap_err();
        assert_eq!(
            err,
            Error::InconsistentWidth {
                line: 2,
                expected: 2,
                found: 3
            }
        );
        let err = Dataset::<f64>::from_csv("1,2\n3,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(Dataset::<f64>::from_csv("").is_err());
    }

    #[test]
    fn covariance_is_ml_estimate() {
        let ds = Dataset::from_rows(&[vec![0.0f64, 0.0], vec![2.0, 4.0]]).unwrap();
        let c = ds.covariance();
        assert_eq!(ds.mean(), vec![1.0, 2.0]);
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(1, 1)], 4.0);
        assert_eq!(c[(0, 1)], 2.0);
    }
}
