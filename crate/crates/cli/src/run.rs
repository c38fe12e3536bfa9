use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use rowsplit::bounds::{Bound, BoundSet};
use rowsplit::conditions::condition_report;
use rowsplit::counterexamples::{entry_eps_pow, verify_theorem4, SubsetFamily};
use rowsplit::partitioners::{
    balanced_column_partition, exhaustive_best_partition, sign_discrepancy_partition, Objective,
    PartitionResult, SearchMode, TildeColumns, EXHAUSTIVE_MAX_ROWS,
};
use rowsplit::verifiers::{
    estimate_pointwise_ratio, verify_discrepancy_chain, verify_one_q, verify_pointwise_q2,
    verify_qinf_invariance, verify_two_sided, verify_xq_norm, VerificationReport,
};
use rowsplit::{Matrix, Partition};

use crate::config::{ExperimentConfig, Source, Task};
use crate::ensemble::generate;
use crate::io::load_matrix;
use crate::report::{MatrixEntry, RunReport, Timings};
use crate::CliError;

/// Loads or generates the matrices, runs the task on each (concurrently), and
/// assembles the report in matrix order.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let start = Instant::now();
    let inputs = matrices(config)?;
    let done: Vec<(MatrixEntry, f64)> = inputs
        .into_par_iter()
        .enumerate()
        .map(|(i, (label, a))| {
            let t = Instant::now();
            let entry = process(config, i, label, a);
            (entry, t.elapsed().as_secs_f64() * 1e3)
        })
        .collect();
    let (entries, per_matrix_ms): (Vec<_>, Vec<_>) = done.into_iter().unzip();
    let timings = Timings {
        total_ms: start.elapsed().as_secs_f64() * 1e3,
        per_matrix_ms,
    };
    Ok(RunReport::new(config.clone(), entries, timings))
}

fn matrices(config: &ExperimentConfig) -> Result<Vec<(String, Matrix)>, CliError> {
    Ok(match &config.source {
        Source::Input { path, format } => {
            let label = Path::new(path)
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            vec![(label, load_matrix(path, *format)?)]
        }
        Source::Ensemble(spec) => {
            let kind = serde_json::to_value(spec.kind).expect("kind serializes");
            let kind = kind.as_str().unwrap_or_default().to_owned();
            generate(spec, config.q)?
                .into_iter()
                .enumerate()
                .map(|(i, a)| (format!("{kind}#{i}"), a))
                .collect()
        }
    })
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    a: &'a Matrix,
    seed: u64,
    entry: MatrixEntry,
}

impl Ctx<'_> {
    fn record<T>(&mut self, step: &str, r: rowsplit::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.entry.errors.push(format!("{step}: {e}"));
                None
            }
        }
    }

    fn q(&self) -> f64 {
        self.config.q
    }

    fn bounds(&self) -> Option<&BoundSet> {
        self.entry.bounds.as_ref()
    }

    fn eps_entry(&self) -> Option<f64> {
        self.bounds().and_then(|b| b.eps_entry)
    }

    fn exhaustive_ok(&mut self, step: &str) -> bool {
        if self.a.nrows() > EXHAUSTIVE_MAX_ROWS {
            self.entry.notes.push(format!(
                "{step}: skipped, {} rows exceed the exhaustive limit of {EXHAUSTIVE_MAX_ROWS}",
                self.a.nrows()
            ));
            return false;
        }
        true
    }

    fn push(&mut self, v: Option<VerificationReport>) {
        if let Some(v) = v {
            self.entry.verifications.push(v);
        }
    }
}

fn process(config: &ExperimentConfig, index: usize, label: String, a: Matrix) -> MatrixEntry {
    let entry = MatrixEntry::new(index, label, a.clone());
    let mut cx = Ctx {
        config,
        a: &a,
        seed: config.seed.unwrap_or(0).wrapping_add(index as u64),
        entry,
    };
    conditions(&mut cx);
    match config.task {
        Task::CheckConditions => {}
        Task::BestPartition => best(&mut cx),
        Task::SignPartition => sign(&mut cx),
        Task::BalancedPartition => balanced(&mut cx),
        Task::Verify => verify(&mut cx),
        Task::Counterexample => counterexample(&mut cx),
        Task::EnsembleSweep => {
            best(&mut cx);
            sign(&mut cx);
            balanced(&mut cx);
        }
    }
    cx.entry
}

fn conditions(cx: &mut Ctx) {
    let q = cx.q();
    let Some(rep) = cx.record("conditions", condition_report(cx.a, q)) else {
        return;
    };
    cx.entry.errors.extend(rep.errors.iter().cloned());
    let eps_row = rep.row.as_ref().map(|r| r.eps_row_min);
    let eps_entry = rep.entry.as_ref().map(|e| e.eps_entry_min);
    if rep.row.as_ref().is_some_and(|r| !r.certified) {
        cx.entry
            .notes
            .push(format!("row condition at q = {q} is a solver estimate"));
    }
    cx.entry.conditions = Some(rep);
    let (rows, cols, rank) = (cx.a.nrows(), cx.a.ncols(), cx.entry.rank);
    let set = BoundSet::evaluate(q, rows, cols, rank, eps_row, eps_entry);
    cx.entry.bounds = cx.record("bounds", set);
}

/// Smallest applicable column bound, else `bound_c` marked inapplicable.
fn column_claim(b: &BoundSet) -> Option<Bound> {
    let all = [b.bound_a, b.bound_b, b.bound_c];
    all.iter()
        .flatten()
        .filter(|x| x.applicable)
        .copied()
        .min_by(|x, y| x.value.total_cmp(&y.value))
        .or(b.bound_c)
}

fn one_q_check(cx: &mut Ctx, p: &Partition, claim: Option<Bound>, applicable: bool) {
    let Some(claim) = claim else {
        cx.entry
            .notes
            .push("no column bound: entrywise condition unavailable".into());
        return;
    };
    let r = verify_one_q(cx.a, p, cx.q(), claim.value)
        .map(|v| v.with_applicability(applicable && claim.applicable));
    let v = cx.record("verify one-q", r);
    cx.push(v);
}

fn exhaustive(cx: &mut Ctx, kind: Objective) -> Option<PartitionResult> {
    let r = exhaustive_best_partition(cx.a, cx.q(), kind);
    let r = cx.record("exhaustive search", r)?;
    cx.entry.partitions.push(r.clone());
    Some(r)
}

fn best(cx: &mut Ctx) {
    if !cx.exhaustive_ok("best-partition") {
        return;
    }
    if cx.config.method == SearchMode::Heuristic {
        cx.entry
            .notes
            .push("best-partition always enumerates; --method applies to sign-partition".into());
    }
    if cx.q() == 2.0 {
        if let Some(r) = exhaustive(cx, Objective::PointwiseRatio) {
            let applicable = cx.bounds().and_then(|b| b.gamma).is_some_and(|g| g.applicable);
            let v = verify_pointwise_q2(cx.a, &r.partition).map(|v| v.with_applicability(applicable));
            let v = cx.record("verify pointwise", v);
            cx.push(v);
        }
    }
    if let Some(r) = exhaustive(cx, Objective::OneQRatio) {
        let claim = cx.bounds().and_then(column_claim);
        one_q_check(cx, &r.partition, claim, true);
    }
}

fn sign(cx: &mut Ctx) {
    let mode = cx.config.method;
    if mode == SearchMode::Exact && !cx.exhaustive_ok("sign-partition") {
        return;
    }
    let Some(r) = cx.record("sign search", sign_discrepancy_partition(cx.a, cx.q(), mode)) else {
        return;
    };
    cx.entry.partitions.push(r.clone());
    let chain = cx.record("verify discrepancy chain", verify_discrepancy_chain(cx.a, &r.partition, cx.q()));
    cx.push(chain);
    let (Some(eps), Some(b)) = (cx.eps_entry(), cx.bounds().and_then(|b| b.bound_b)) else {
        return;
    };
    // bound_b follows from the chain once D is within the discrepancy budget
    let t = TildeColumns::new(cx.a, cx.q());
    let full_pow = t.totals().into_iter().fold(0.0_f64, f64::max);
    let budget = eps.powf(cx.q()) * cx.bounds().map_or(0.0, |b| b.theta) * full_pow;
    cx.entry.extras.insert("discrepancy".into(), r.objective);
    cx.entry.extras.insert("discrepancy_budget".into(), budget);
    one_q_check(cx, &r.partition, Some(b), r.objective <= budget);
}

fn balanced(cx: &mut Ctx) {
    let q = cx.q();
    let Some(eps) = cx.eps_entry() else {
        cx.entry
            .notes
            .push("balanced-partition: entrywise condition unavailable".into());
        return;
    };
    let n = cx.a.ncols() as f64;
    let default = ((1.0 + n * eps.powf(q)) / 2.0).min(1.0);
    let target = cx.config.target.unwrap_or(default);
    let Some(r) = cx.record("balanced search", balanced_column_partition(cx.a, q, target)) else {
        return;
    };
    cx.entry.partitions.push(r.clone());
    let achieved = r.achieved == Some(true);
    let exhaustive = cx.a.nrows() <= EXHAUSTIVE_MAX_ROWS;
    if !achieved {
        cx.entry
            .notes
            .push(format!("no partition found with every column fraction <= {target}"));
    }
    // Meeting the per-column target caps the (1,q) ratio at target^{1/q}.
    let claim = Bound {
        value: target.powf(1.0 / q),
        applicable: eps < 1.0 || cx.config.target.is_some(),
        useful: target < 1.0,
    };
    one_q_check(cx, &r.partition, Some(claim), achieved || exhaustive);
}

fn verify(cx: &mut Ctx) {
    let q = cx.q();
    let gamma = cx.bounds().and_then(|b| b.gamma);
    let psi = cx.bounds().and_then(|b| b.psi);

    // the pointwise claims use the partition that minimizes them
    let main = if cx.a.nrows() <= EXHAUSTIVE_MAX_ROWS {
        let kind = if q == 2.0 {
            Objective::PointwiseRatio
        } else {
            Objective::OneQRatio
        };
        exhaustive(cx, kind)
    } else {
        cx.entry
            .notes
            .push("too many rows to enumerate; checking the heuristic sign partition".into());
        let r = cx.record("sign search", sign_discrepancy_partition(cx.a, q, SearchMode::Heuristic));
        if let Some(r) = &r {
            cx.entry.partitions.push(r.clone());
        }
        r
    };
    let Some(main) = main else { return };
    let optimal = main.method == rowsplit::partitioners::Method::Exhaustive;
    let p = &main.partition;

    let t1 = if q == 2.0 {
        verify_pointwise_q2(cx.a, p)
    } else {
        estimate_pointwise_ratio(cx.a, p, q, cx.config.budget, cx.seed)
    };
    let t1_applicable = gamma.is_some_and(|g| g.applicable) && q == 2.0 && optimal;
    let t1 = cx.record("verify pointwise", t1.map(|v| v.with_applicability(t1_applicable)));
    let t1_certified = t1.as_ref().is_some_and(|v| v.certified());
    cx.push(t1);

    if let Some(g) = gamma {
        let v = verify_xq_norm(cx.a, p, cx.config.p, q, g.value, cx.config.budget, cx.seed)
            .map(|v| v.with_applicability(g.applicable && t1_certified));
        let v = cx.record("verify (X,q) norm", v);
        cx.push(v);
    }
    if let Some(s) = psi {
        let v = verify_two_sided(cx.a, p, q, s.value, cx.seed)
            .map(|v| v.with_applicability(s.applicable && s.value < 0.5 && q == 2.0 && optimal));
        let v = cx.record("verify two-sided", v);
        cx.push(v);
    }
    let v = cx.record("verify (p,inf) invariance", verify_qinf_invariance(cx.a, p, cx.config.p));
    cx.push(v);

    let one_q = if q != 2.0 {
        Some(main.clone())
    } else if optimal {
        exhaustive(cx, Objective::OneQRatio)
    } else {
        None
    };
    if let Some(r) = one_q {
        let claim = cx.bounds().and_then(column_claim);
        one_q_check(cx, &r.partition, claim, optimal);
    }
    let v = cx.record("verify discrepancy chain", verify_discrepancy_chain(cx.a, p, q));
    cx.push(v);
}

fn counterexample(cx: &mut Ctx) {
    let k = cx.a.nrows() / 2;
    let q = cx.q();
    if let Some(v) = cx.record("verify theorem 4", verify_theorem4(k, q)) {
        cx.entry.verifications.push(v);
    }
    if let Some(fam) = cx.record("subset family", SubsetFamily::new(k)) {
        let eps_pow = entry_eps_pow(&fam);
        let log2_2n = (2 * k) as f64;
        let exact = *eps_pow.numer() as f64 / *eps_pow.denom() as f64;
        cx.entry.extras.insert("k".into(), k as f64);
        cx.entry.extras.insert("min_subset_size".into(), *eps_pow.denom() as f64);
        cx.entry.extras.insert("eps_pow_q".into(), exact);
        cx.entry.extras.insert("eps_pow_q_log2_2n".into(), exact * log2_2n);
        if k == 1 {
            cx.entry
                .notes
                .push("k = 1: minimal entrywise eps is 1, outside the eps < 1 regime".into());
        }
    }
}
