use std::collections::BTreeMap;
use std::fmt::Write as _;

use rowsplit::bounds::{Bound, BoundSet};
use rowsplit::conditions::ConditionReport;
use rowsplit::partitioners::{Evaluator, PartitionResult};
use rowsplit::verifiers::{Claim, VerificationReport};
use rowsplit::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Every check passed on an exact path.
    Ok,
    /// Nothing failed, but some check only searched for violations.
    Estimated,
    /// A verification disproved an applicable claim.
    Failed,
    /// A step could not run.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub index: usize,
    pub label: String,
    pub matrix: Matrix,
    pub rank: usize,
    pub conditions: Option<ConditionReport>,
    pub bounds: Option<BoundSet>,
    pub partitions: Vec<PartitionResult>,
    pub verifications: Vec<VerificationReport>,
    pub extras: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub errors: Vec<String>,
    pub status: Status,
}

impl MatrixEntry {
    pub fn new(index: usize, label: String, matrix: Matrix) -> Self {
        MatrixEntry {
            index,
            label,
            rank: matrix.rank(),
            matrix,
            conditions: None,
            bounds: None,
            partitions: Vec::new(),
            verifications: Vec::new(),
            extras: BTreeMap::new(),
            notes: Vec::new(),
            errors: Vec::new(),
            status: Status::Ok,
        }
    }

    pub fn failed(&self) -> bool {
        self.verifications.iter().any(VerificationReport::failed)
    }

    pub(crate) fn settle(&mut self) {
        self.status = if self.failed() {
            Status::Failed
        } else if !self.errors.is_empty() {
            Status::Error
        } else if self.verifications.iter().any(|v| !v.certified()) {
            Status::Estimated
        } else {
            Status::Ok
        };
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub matrices: usize,
    pub ok: usize,
    pub estimated: usize,
    pub failed: usize,
    pub errors: usize,
}

impl Summary {
    fn of(entries: &[MatrixEntry]) -> Self {
        let count = |s| entries.iter().filter(|e| e.status == s).count();
        Summary {
            matrices: entries.len(),
            ok: count(Status::Ok),
            estimated: count(Status::Estimated),
            failed: count(Status::Failed),
            errors: count(Status::Error),
        }
    }
}

/// Wall-clock milliseconds. The only part of a report that varies between runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    pub per_matrix_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub version: String,
    pub config: ExperimentConfig,
    pub entries: Vec<MatrixEntry>,
    pub summary: Summary,
    pub timings: Timings,
}

impl RunReport {
    pub fn new(config: ExperimentConfig, mut entries: Vec<MatrixEntry>, timings: Timings) -> Self {
        entries.iter_mut().for_each(MatrixEntry::settle);
        RunReport {
            schema_version: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            summary: Summary::of(&entries),
            entries,
            timings,
        }
    }

    pub fn any_failed(&self) -> bool {
        self.entries.iter().any(MatrixEntry::failed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The report without its `timings` block: equal for equal configs.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        v.as_object_mut()
            .expect("report is an object")
            .remove("timings");
        serde_json::to_string_pretty(&v).expect("values serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let report: RunReport =
            serde_json::from_str(text).map_err(|e| CliError::Report(e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(CliError::Report(format!(
                "unsupported schema_version {}",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Re-evaluates every stored partition with its stored objective. Returns
    /// one message per mismatch.
    pub fn reverify(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.entries {
            for (k, p) in e.partitions.iter().enumerate() {
                if p.partition.len() != e.matrix.nrows() {
                    out.push(format!("entry {} partition {k}: wrong length", e.index));
                    continue;
                }
                match Evaluator::new(&e.matrix, p.q, p.kind) {
                    Ok(ev) => {
                        let v = ev.eval(&p.partition);
                        if v != p.objective {
                            out.push(format!(
                                "entry {} partition {k}: stored {} but re-evaluated {v}",
                                e.index, p.objective
                            ));
                        }
                    }
                    Err(err) => out.push(format!("entry {} partition {k}: {err}", e.index)),
                }
            }
        }
        out
    }

    /// One CSV line per matrix, with a header.
    pub fn summary_table(&self) -> String {
        let mut s = String::from(
            "index,label,rows,cols,rank,eps_entry,eps_row,gamma,psi,bound_a,bound_b,bound_c,checks,status\n",
        );
        for e in &self.entries {
            let cond = e.conditions.as_ref();
            let eps_entry = cond.and_then(|c| c.entry.as_ref()).map(|c| c.eps_entry_min);
            let eps_row = cond.and_then(|c| c.row.as_ref()).map(|c| c.eps_row_min);
            let b = e.bounds.as_ref();
            let bound = |f: fn(&BoundSet) -> Option<Bound>| num(b.and_then(f).map(|x| x.value));
            let checks: Vec<String> = e.verifications.iter().map(check_cell).collect();
            let status = serde_json::to_value(e.status).expect("status serializes");
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                e.index,
                e.label,
                e.matrix.nrows(),
                e.matrix.ncols(),
                e.rank,
                num(eps_entry),
                num(eps_row),
                bound(|b| b.gamma),
                bound(|b| b.psi),
                bound(|b| b.bound_a),
                bound(|b| b.bound_b),
                bound(|b| b.bound_c),
                checks.join("|"),
                status.as_str().unwrap_or_default(),
            )
            .unwrap();
        }
        s
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn claim_name(c: Claim) -> String {
    serde_json::to_value(c)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn check_cell(v: &VerificationReport) -> String {
    let verdict = if v.failed() {
        "FAIL"
    } else if !v.pass {
        "exceeds-inapplicable"
    } else if v.certified() {
        "pass"
    } else {
        "no-violation-found"
    };
    format!("{}={:.6}<={:.6}:{verdict}", claim_name(v.claim), v.achieved, v.claimed)
}
