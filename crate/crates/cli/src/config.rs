use std::fmt;
use std::path::PathBuf;

use rowsplit::partitioners::SearchMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_BUDGET: usize = 256;
pub const DEFAULT_K: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    CheckConditions,
    BestPartition,
    SignPartition,
    BalancedPartition,
    Verify,
    Counterexample,
    EnsembleSweep,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::CheckConditions,
        Task::BestPartition,
        Task::SignPartition,
        Task::BalancedPartition,
        Task::Verify,
        Task::Counterexample,
        Task::EnsembleSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::CheckConditions => "check-conditions",
            Task::BestPartition => "best-partition",
            Task::SignPartition => "sign-partition",
            Task::BalancedPartition => "balanced-partition",
            Task::Verify => "verify",
            Task::Counterexample => "counterexample",
            Task::EnsembleSweep => "ensemble-sweep",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// Independent standard normal entries.
    Gaussian,
    /// `Q` factor of a Gaussian matrix.
    OrthonormalColumns,
    /// `±1` coin flips scaled to unit `q`-norm columns.
    Sign,
    /// The extremal family with `k = N / 2`.
    Theorem4,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub rows: usize,
    pub cols: usize,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Input { path: PathBuf, format: Format },
    Ensemble(EnsembleSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub q: f64,
    /// Domain exponent of the `(p, q)` norms; `inf` allowed.
    #[serde(with = "exponent")]
    pub p: f64,
    pub source: Source,
    pub method: SearchMode,
    /// Balanced-partition target fraction; defaults to `(1 + nεᵠ) / 2`.
    pub target: Option<f64>,
    /// Random probes for estimated norms and ratios.
    pub budget: usize,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(task: Task, q: f64, source: Source) -> Self {
        let seed = match &source {
            Source::Ensemble(e) => Some(e.seed),
            Source::Input { .. } => None,
        };
        ExperimentConfig {
            task,
            q,
            p: 2.0,
            source,
            method: SearchMode::Exact,
            target: None,
            budget: DEFAULT_BUDGET,
            seed,
            out: None,
        }
    }

    /// The theorem-4 matrix `2k × 2^{2k-1}` as a one-matrix ensemble.
    pub fn counterexample(k: usize, q: f64) -> Self {
        let spec = EnsembleSpec {
            kind: EnsembleKind::Theorem4,
            rows: 2 * k,
            cols: 1 << (2 * k).saturating_sub(1),
            count: 1,
            seed: 0,
        };
        ExperimentConfig::new(Task::Counterexample, q, Source::Ensemble(spec))
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(&self.source, Source::Ensemble(e) if e.kind != EnsembleKind::Theorem4)
            || matches!(self.task, Task::Verify | Task::EnsembleSweep)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(CliError::Config(format!("--q must be a finite number >= 1, got {}", self.q)));
        }
        if self.p.is_nan() || self.p < 1.0 {
            return Err(CliError::Config(format!("--p must be >= 1 or inf, got {}", self.p)));
        }
        if let Some(t) = self.target {
            if !(0.5..=1.0).contains(&t) {
                return Err(CliError::Config(format!("--target must lie in [0.5, 1], got {t}")));
            }
        }
        if self.is_stochastic() && self.seed.is_none() {
            return Err(CliError::Config(format!("task {} needs --seed", self.task)));
        }
        let theorem4 = matches!(&self.source, Source::Ensemble(e) if e.kind == EnsembleKind::Theorem4);
        if self.task == Task::Counterexample && !theorem4 {
            return Err(CliError::Config("task counterexample builds its own matrix; use --k instead of --input/--ensemble".into()));
        }
        if let Source::Ensemble(e) = &self.source {
            if e.kind == EnsembleKind::Theorem4 {
                if e.rows == 0 || e.rows % 2 == 1 {
                    return Err(CliError::Config(format!(
                        "theorem4 ensemble needs an even positive --N, got {}",
                        e.rows
                    )));
                }
            } else if e.count > 0 && (e.rows == 0 || e.cols == 0) {
                return Err(CliError::Config("--N and --n must be positive".into()));
            }
            if e.kind == EnsembleKind::OrthonormalColumns && e.cols > e.rows {
                return Err(CliError::Config(format!(
                    "orthonormal-columns needs --n <= --N, got {}x{}",
                    e.rows, e.cols
                )));
            }
        }
        Ok(())
    }
}

/// `f64` exponents with `∞` written as the string `"inf"`.
mod exponent {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => super::parse_exponent(&s).map_err(de::Error::custom),
        }
    }
}

/// Parses `1`, `2.5`, `inf`, `infinity` or `∞`.
pub fn parse_exponent(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") || t == "∞" {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>().map_err(|_| format!("not an exponent: {s:?}"))
}
