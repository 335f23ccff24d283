//! Per-trial result tables with grouped aggregates, written as CSV.
//!
//! Layout: `kind,<group columns>,trial,seed,<measure columns>`. Trial rows
//! have `kind = trial`; aggregate rows follow with `kind` one of `mean`,
//! `sd`, `min`, `median`, `max` and empty `trial` and `seed` fields.
//! Floats use shortest round-trip formatting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::Experiment;
use crate::error::Result;

pub const STATS: [&str; 5] = ["mean", "sd", "min", "median", "max"];

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    /// Values of the group columns, e.g. the swept dimension.
    pub group: Vec<String>,
    pub trial: usize,
    pub seed: u64,
    pub measures: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub group_columns: Vec<String>,
    pub measure_columns: Vec<String>,
    /// Ordered by group, then trial index.
    pub rows: Vec<TrialRow>,
    /// Supplementary CSV files as `(file name, contents)`.
    pub tables: Vec<(String, String)>,
}

/// One aggregate row.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub stat: &'static str,
    pub group: Vec<String>,
    pub values: Vec<f64>,
}

impl Report {
    pub fn new(experiment: Experiment, group_columns: &[&str], measure_columns: &[&str]) -> Self {
        Report {
            experiment,
            group_columns: group_columns.iter().map(|s| s.to_string()).collect(),
            measure_columns: measure_columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn measure_index(&self, name: &str) -> usize {
        self.measure_columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no measure column {name}"))
    }

    /// Distinct groups in first-appearance order.
    pub fn groups(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.group) {
                out.push(r.group.clone());
            }
        }
        out
    }

    /// Values of one measure for one group, in trial order.
    pub fn column(&self, group: &[String], measure: &str) -> Vec<f64> {
        let j = self.measure_index(measure);
        self.rows
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.measures[j])
            .collect()
    }

    /// A statistic of one measure within the group whose columns match `group`.
    pub fn stat(&self, group: &[&str], measure: &str, stat: &str) -> f64 {
        let group: Vec<String> = group.iter().map(|s| s.to_string()).collect();
        let values = self.column(&group, measure);
        assert!(!values.is_empty(), "no rows for group {group:?}");
        summarize(&values)[STATS
            .iter()
            .position(|&s| s == stat)
            .expect("known statistic")]
    }

    pub fn mean(&self, group: &[&str], measure: &str) -> f64 {
        self.stat(group, measure, "mean")
    }

    pub fn aggregates(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for group in self.groups() {
            let per_measure: Vec<[f64; 5]> = (0..self.measure_columns.len())
                .map(|j| {
                    let values: Vec<f64> = self
                        .rows
                        .iter()
                        .filter(|r| r.group == group)
                        .map(|r| r.measures[j])
                        .collect();
                    summarize(&values)
                })
                .collect();
            for (s, stat) in STATS.iter().enumerate() {
                out.push(AggregateRow {
                    stat,
                    group: group.clone(),
                    values: per_measure.iter().map(|m| m[s]).collect(),
                });
            }
        }
        out
    }

    pub fn header(&self) -> String {
        let mut cols = vec!["kind".to_string()];
        cols.extend(self.group_columns.iter().cloned());
        cols.push("trial".into());
        cols.push("seed".into());
        cols.extend(self.measure_columns.iter().cloned());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.rows {
            out.push_str("trial");
            for g in &r.group {
                write!(out, ",{g}").unwrap();
            }
            write!(out, ",{},{}", r.trial, r.seed).unwrap();
            for v in &r.measures {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        for a in self.aggregates() {
            out.push_str(a.stat);
            for g in &a.group {
                write!(out, ",{g}").unwrap();
            }
            out.push_str(",,");
            for v in &a.values {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable per-group means.
    pub fn summary(&self) -> String {
        let mut out = format!("{} ({} trial rows)\n", self.experiment, self.rows.len());
        for a in self.aggregates().into_iter().filter(|a| a.stat == "mean") {
            let label: Vec<String> = self
                .group_columns
                .iter()
                .zip(&a.group)
                .map(|(c, g)| format!("{c}={g}"))
                .collect();
            let values: Vec<String> = self
                .measure_columns
                .iter()
                .zip(&a.values)
                .map(|(c, v)| format!("{c}={}", short(*v)))
                .collect();
            if label.is_empty() {
                writeln!(out, "  mean: {}", values.join(" ")).unwrap();
            } else {
                writeln!(out, "  {}: {}", label.join(" "), values.join(" ")).unwrap();
            }
        }
        out
    }

    /// Writes `<name>.csv` and the supplementary tables into `dir`; returns
    /// the paths written.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let main = dir.join(format!("{}.csv", self.experiment));
        std::fs::write(&main, self.to_csv())?;
        let mut written = vec![main];
        for (name, body) in &self.tables {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            written.push(p);
        }
        Ok(written)
    }
}

fn short(v: f64) -> String {
    if v.is_finite() && v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.4e}")
    } else if v.is_finite() {
        format!("{v:.4}")
    } else {
        format!("{v}")
    }
}

/// `[mean, sd, min, median, max]`, with the sample (n - 1) standard
/// deviation; `sd` is zero for a single value.
pub fn summarize(values: &[f64]) -> [f64; 5] {
    let n = values.len();
    if n == 0 {
        return [f64::NAN; 5];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    [mean, sd, sorted[0], median, sorted[n - 1]]
}

/// Square table as CSV with row and column labels.
pub fn table_csv(corner: &str, labels: &[String], values: &[Vec<f64>]) -> String {
    let mut out = corner.to_string();
    for l in labels {
        write!(out, ",{l}").unwrap();
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(values) {
        out.push_str(l);
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}
