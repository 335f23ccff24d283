//! Experiment selection and parameter overrides.
//!
//! A config file is TOML:
//!
//! ```toml
//! experiment = "fig5"
//! trials = 40
//! base_seed = 7
//!
//! [overrides]
//! E = [50, 100]
//! n = [25, 100]
//! d = 20
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rpmix::CovarianceRestriction;
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Experiment {
    Fig3SepVsN,
    Fig4SepVsK,
    Fig5EccTable,
    Fig6EccVsD,
    Fig7PcaVsRp,
    Fig8EmCompare,
    SecondEmCompare,
    Fig9DigitSweep,
    PcaCollapse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyKind {
    /// Positive integer.
    Count,
    /// Positive integer or list of them.
    Counts,
    /// Positive real.
    Real,
    /// Positive real or list of them.
    Reals,
    /// `full-distinct` or `shared-full`.
    Restriction,
    /// File path.
    Path,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fig3SepVsN,
        Experiment::Fig4SepVsK,
        Experiment::Fig5EccTable,
        Experiment::Fig6EccVsD,
        Experiment::Fig7PcaVsRp,
        Experiment::Fig8EmCompare,
        Experiment::SecondEmCompare,
        Experiment::Fig9DigitSweep,
        Experiment::PcaCollapse,
    ];

    /// Short command-line name.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig3SepVsN => "fig3",
            Experiment::Fig4SepVsK => "fig4",
            Experiment::Fig5EccTable => "fig5",
            Experiment::Fig6EccVsD => "fig6",
            Experiment::Fig7PcaVsRp => "fig7",
            Experiment::Fig8EmCompare => "fig8",
            Experiment::SecondEmCompare => "second-em",
            Experiment::Fig9DigitSweep => "fig9",
            Experiment::PcaCollapse => "pca-collapse",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Experiment::Fig7PcaVsRp | Experiment::PcaCollapse => 10,
            Experiment::Fig8EmCompare => 150,
            Experiment::SecondEmCompare => 100,
            Experiment::Fig9DigitSweep => 5,
            _ => 40,
        }
    }

    /// Override keys this experiment accepts.
    pub fn keys(self) -> &'static [(&'static str, KeyKind)] {
        use KeyKind::*;
        match self {
            Experiment::Fig3SepVsN => &[("n", Counts), ("d", Count), ("c", Real)],
            Experiment::Fig4SepVsK => &[("k", Counts), ("n", Count), ("c", Real), ("d", Count)],
            Experiment::Fig5EccTable => &[("E", Reals), ("n", Counts), ("d", Count)],
            Experiment::Fig6EccVsD => &[("n", Count), ("E", Real), ("d", Counts)],
            Experiment::Fig7PcaVsRp => &[
                ("n", Count),
                ("k", Count),
                ("c", Real),
                ("E", Real),
                ("d", Count),
                ("train_size", Count),
            ],
            Experiment::Fig8EmCompare | Experiment::SecondEmCompare => &[
                ("n", Counts),
                ("k", Count),
                ("c", Real),
                ("E", Real),
                ("d", Count),
                ("train_size", Count),
                ("test_size", Count),
                ("restriction", Restriction),
            ],
            Experiment::Fig9DigitSweep => &[
                ("d", Counts),
                ("k", Count),
                ("n", Count),
                ("c", Real),
                ("E", Real),
                ("classes", Count),
                ("train_size", Count),
                ("test_size", Count),
                ("data_path", Path),
                ("test_path", Path),
            ],
            Experiment::PcaCollapse => &[("k", Count), ("train_size", Count)],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExpError;

    /// Accepts the short name (`fig5`) or the variant name (`Fig5EccTable`),
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == wanted || format!("{e:?}").to_ascii_lowercase() == wanted)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                ExpError::Config(format!(
                    "unknown experiment {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

impl TryFrom<String> for Experiment {
    type Error = ExpError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Experiment> for String {
    fn from(e: Experiment) -> String {
        e.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

impl FromStr for Value {
    type Err = ExpError;

    /// `3`, `0.5`, `1,2,3` or free text.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(v) = s.parse::<f64>() {
            return Ok(Value::Number(v));
        }
        if s.contains(',') {
            let parts: std::result::Result<Vec<f64>, _> =
                s.split(',').map(|p| p.trim().parse::<f64>()).collect();
            if let Ok(list) = parts {
                return Ok(Value::List(list));
            }
        }
        Ok(Value::Text(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            trials: None,
            base_seed: 0,
            overrides: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(self.experiment.default_trials())
    }

    pub fn with_override(mut self, key: &str, value: Value) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }

    /// Checks the trial count and every override against the experiment's
    /// key schema.
    pub fn validate(&self) -> Result<()> {
        if self.trials == Some(0) {
            return Err(ExpError::Config("trials must be at least 1".into()));
        }
        let schema = self.experiment.keys();
        for (key, value) in &self.overrides {
            let Some(&(_, kind)) = schema.iter().find(|(k, _)| k == key) else {
                let allowed: Vec<&str> = schema.iter().map(|(k, _)| *k).collect();
                return Err(ExpError::Config(format!(
                    "{} does not take override {key:?}; allowed: {}",
                    self.experiment,
                    allowed.join(", ")
                )));
            };
            check_value(key, kind, value)?;
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.overrides.get(key)
    }

    pub fn count(&self, key: &str, default: usize) -> usize {
        match self.get(key) {
            Some(Value::Number(v)) => *v as usize,
            _ => default,
        }
    }

    pub fn counts(&self, key: &str, default: &[usize]) -> Vec<usize> {
        match self.get(key) {
            Some(Value::Number(v)) => vec![*v as usize],
            Some(Value::List(vs)) => vs.iter().map(|&v| v as usize).collect(),
            _ => default.to_vec(),
        }
    }

    pub fn has(&self, key: &str) -> bool {
        self.overrides.contains_key(key)
    }

    pub fn real(&self, key: &str, default: f64) -> f64 {
        match self.get(key) {
            Some(Value::Number(v)) => *v,
            _ => default,
        }
    }

    pub fn reals(&self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.get(key) {
            Some(Value::Number(v)) => vec![*v],
            Some(Value::List(vs)) => vs.clone(),
            _ => default.to_vec(),
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.get(key) {
            Some(Value::Text(s)) => Some(s),
            _ => None,
        }
    }

    pub fn restriction(&self, default: CovarianceRestriction) -> CovarianceRestriction {
        self.text("restriction")
            .and_then(parse_restriction)
            .unwrap_or(default)
    }
}

pub fn parse_restriction(s: &str) -> Option<CovarianceRestriction> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "full-distinct" | "fulldistinct" | "full" => Some(CovarianceRestriction::FullDistinct),
        "shared-full" | "sharedfull" | "shared" => Some(CovarianceRestriction::SharedFull),
        _ => None,
    }
}

fn check_value(key: &str, kind: KeyKind, value: &Value) -> Result<()> {
    let bad = |what: &str| {
        Err(ExpError::Config(format!(
            "override {key}: expected {what}, got {value:?}"
        )))
    };
    let count_ok = |v: f64| v >= 1.0 && v.fract() == 0.0 && v < 1e9;
    let real_ok = |v: f64| v > 0.0 && v.is_finite();
    match (kind, value) {
        (KeyKind::Count, Value::Number(v)) if count_ok(*v) => Ok(()),
        (KeyKind::Count, _) => bad("a positive integer"),
        (KeyKind::Counts, Value::Number(v)) if count_ok(*v) => Ok(()),
        (KeyKind::Counts, Value::List(vs)) if !vs.is_empty() && vs.iter().all(|&v| count_ok(v)) => {
            Ok(())
        }
        (KeyKind::Counts, _) => bad("a positive integer or a non-empty list of them"),
        (KeyKind::Real, Value::Number(v)) if real_ok(*v) => Ok(()),
        (KeyKind::Real, _) => bad("a positive number"),
        (KeyKind::Reals, Value::Number(v)) if real_ok(*v) => Ok(()),
        (KeyKind::Reals, Value::List(vs)) if !vs.is_empty() && vs.iter().all(|&v| real_ok(v)) => {
            Ok(())
        }
        (KeyKind::Reals, _) => bad("a positive number or a non-empty list of them"),
        (KeyKind::Restriction, Value::Text(s)) if parse_restriction(s).is_some() => Ok(()),
        (KeyKind::Restriction, _) => bad("full-distinct or shared-full"),
        (KeyKind::Path, Value::Text(_)) => Ok(()),
        (KeyKind::Path, _) => bad("a file path"),
    }
}
