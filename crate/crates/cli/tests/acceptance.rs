//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rowsplit::bounds::{bound_a, bound_b, bound_c, gamma, psi, Bound};
use rowsplit::conditions::{entry_condition_eps, full_row_report};
use rowsplit::counterexamples::{entry_eps_pow, theorem4_matrix, verify_theorem4, SubsetFamily};
use rowsplit::norms::{exact_pq_norm, one_q_norm, pq_norm_lower_bound};
use rowsplit::partitioners::{
    balanced_column_partition, random_partition, sign_discrepancy_partition, Objective, SearchMode,
    TildeColumns,
};
use rowsplit::verifiers::{
    estimate_pointwise_ratio, verify_discrepancy_chain, verify_pointwise_q2,
    verify_qinf_invariance, Claim,
};
use rowsplit::Matrix;
use rowsplit_cli::io::to_csv;
use rowsplit_cli::{
    run, EnsembleKind, EnsembleSpec, ExperimentConfig, Format, RunReport, Source, Task,
};

type Outcome = Result<String, String>;

fn check(cond: bool, failures: &mut Vec<String>, msg: impl FnOnce() -> String) {
    if !cond {
        failures.push(msg());
    }
}

fn verdict(failures: Vec<String>, ok: String) -> Outcome {
    if failures.is_empty() {
        Ok(ok)
    } else {
        let shown: Vec<_> = failures.iter().take(6).cloned().collect();
        Err(format!("{} problem(s): {}", failures.len(), shown.join("; ")))
    }
}

fn within(elapsed: Duration, limit: f64, failures: &mut Vec<String>) {
    let s = elapsed.as_secs_f64();
    check(s < limit, failures, || format!("took {s:.2} s, limit {limit} s"));
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    for k in 1..=3usize {
        let fam = SubsetFamily::new(k).unwrap();
        let n = fam.len();
        check(n == 1 << (2 * k - 1), &mut f, || format!("k={k}: {n} columns"));
        // log₂(2n) = 2k exactly
        let product = entry_eps_pow(&fam) * Ratio::from_integer(2 * k as u64);
        if k >= 2 {
            check(product >= Ratio::from_integer(2), &mut f, || format!("k={k}: eps^q log2(2n) = {product}"));
        }
        if k == 2 {
            check(product == Ratio::from_integer(2), &mut f, || format!("k=2: eps^q log2(2n) = {product}"));
        }
        for q in [1.0, 2.0] {
            let a = theorem4_matrix(k, q).unwrap();
            let eps = entry_condition_eps(&a, q).unwrap().eps_entry_min;
            let float_product = eps.powf(q) * (2.0 * n as f64).log2();
            let exact = *product.numer() as f64 / *product.denom() as f64;
            check((float_product - exact).abs() < 1e-12, &mut f, || {
                format!("k={k} q={q}: float eps^q log2(2n) {float_product} vs {exact}")
            });
            let r = verify_theorem4(k, q).unwrap();
            check(r.pass, &mut f, || format!("k={k} q={q}: verify_theorem4 failed"));
            let checked = r.details["partitions_checked"];
            check(checked == (1u64 << (2 * k - 1)) as f64, &mut f, || {
                format!("k={k} q={q}: checked {checked} partitions")
            });
        }
    }
    within(start.elapsed(), 5.0, &mut f);
    verdict(f, format!("k=1..3, q=1,2 exact; {:.2} s", start.elapsed().as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let spec = EnsembleSpec {
        kind: EnsembleKind::OrthonormalColumns,
        rows: 12,
        cols: 2,
        count: 20,
        seed: 20_240_601,
    };
    let report = run(&ExperimentConfig::new(Task::BestPartition, 2.0, Source::Ensemble(spec))).unwrap();
    let (mut eligible, mut valid) = (0, 0);
    for e in &report.entries {
        let rows = e.conditions.as_ref().and_then(|c| c.row.as_ref()).unwrap();
        if rows.eps_row_min > (e.rank as f64).powf(-0.5) {
            continue;
        }
        eligible += 1;
        let g = gamma(2.0, e.rank, rows.eps_row_min).unwrap();
        let best = e
            .partitions
            .iter()
            .find(|p| p.kind == Objective::PointwiseRatio)
            .unwrap();
        // AᵀA = I, so r_k² is the top eigenvalue of the 2×2 Gram of the block rows.
        let oracle = (0..2)
            .map(|k| {
                let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
                for &i in best.partition.block(k) {
                    let (x, y) = (e.matrix.get(i, 0), e.matrix.get(i, 1));
                    s11 += x * x;
                    s12 += x * y;
                    s22 += y * y;
                }
                let m = (s11 + s22) / 2.0;
                (m + (((s11 - s22) / 2.0).powi(2) + s12 * s12).sqrt()).sqrt()
            })
            .fold(0.0_f64, f64::max);
        check((oracle - best.objective).abs() < 1e-9, &mut f, || {
            format!("entry {}: optimum {} vs Gram oracle {oracle}", e.index, best.objective)
        });
        if g.applicable {
            valid += 1;
            check(best.objective <= g.value, &mut f, || {
                format!("entry {}: max r = {} > gamma = {}", e.index, best.objective, g.value)
            });
        }
        let t1 = e.verifications.iter().find(|v| v.claim == Claim::T1Pointwise).unwrap();
        check(!t1.failed(), &mut f, || format!("entry {}: pointwise verification failed", e.index));
    }
    check(eligible > 0, &mut f, || "no matrix met eps_row_min <= rank^(-1/2)".into());
    within(start.elapsed(), 60.0, &mut f);
    verdict(
        f,
        format!(
            "{eligible}/20 eligible, {valid} with gamma valid, 0 failures; {:.2} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

/// The 50 instances shared by criteria 3 and 4.
fn nonnegative_instances() -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    (0..50).map(|_| uniform(&mut rng, 10, 3, 0.0, 1.0)).collect()
}

fn column_fractions_ok(a: &Matrix, labels: &[bool], target: f64) -> bool {
    (0..a.ncols()).all(|j| {
        let total: f64 = (0..a.nrows()).map(|i| a.get(i, j)).sum();
        [false, true].iter().all(|&side| {
            let s: f64 = (0..a.nrows()).filter(|&i| labels[i] == side).map(|i| a.get(i, j)).sum();
            s <= target * total
        })
    })
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut f = Vec::new();
    let mut capped = 0;
    for (idx, a) in nonnegative_instances().iter().enumerate() {
        let eps = entry_condition_eps(a, 1.0).unwrap().eps_entry_min;
        let raw = (1.0 + 3.0 * eps) / 2.0;
        if raw > 1.0 {
            capped += 1;
        }
        let target = raw.min(1.0);
        let exists = (0..1u64 << 9).any(|m| {
            let labels: Vec<bool> = (0..10).map(|i| i > 0 && (m >> (i - 1)) & 1 == 1).collect();
            column_fractions_ok(a, &labels, target)
        });
        check(exists, &mut f, || format!("instance {idx}: no partition meets target {target}"));
        let r = balanced_column_partition(a, 1.0, target).unwrap();
        check(r.achieved == Some(true), &mut f, || format!("instance {idx}: search did not reach target"));
        check(column_fractions_ok(a, &r.partition.labels(), target), &mut f, || {
            format!("instance {idx}: returned partition misses target")
        });
    }
    within(start.elapsed(), 60.0, &mut f);
    verdict(
        f,
        format!(
            "50/50 found; {capped} targets capped at 1; {:.2} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut f = Vec::new();
    let mut worst: f64 = f64::INFINITY;
    for (idx, a) in nonnegative_instances().iter().enumerate() {
        let full = one_q_norm(a, 1.0).unwrap().value;
        for mode in [SearchMode::Exact, SearchMode::Heuristic] {
            let r = sign_discrepancy_partition(a, 1.0, mode).unwrap();
            let d = r.objective;
            let t = TildeColumns::new(a, 1.0);
            let labels = r.partition.labels();
            check((t.discrepancy(|i| labels[i]) - d).abs() == 0.0, &mut f, || {
                format!("instance {idx}: stored D differs from recomputed")
            });
            let rhs = 0.5 * (full + d);
            for k in 0..2 {
                if r.partition.block(k).is_empty() {
                    continue;
                }
                let lhs = one_q_norm(&a.submatrix(r.partition.block(k)).unwrap(), 1.0).unwrap().value;
                worst = worst.min(rhs - lhs);
                check(lhs <= rhs + 1e-12, &mut f, || {
                    format!("instance {idx} {mode:?} block {k}: {lhs} > {rhs}")
                });
            }
            check(verify_discrepancy_chain(a, &r.partition, 1.0).unwrap().pass, &mut f, || {
                format!("instance {idx} {mode:?}: chain verifier failed")
            });
        }
    }
    verdict(f, format!("100 sign partitions, smallest slack {worst:.3e}"))
}

fn criterion_5() -> Outcome {
    let mut f = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for idx in 0..20 {
        let a = uniform(&mut rng, 8, 3, -1.0, 1.0);
        check(a.rank() == 3, &mut f, || format!("matrix {idx} not full rank"));
        let r = full_row_report(&a, 2.0).unwrap();
        let closed: f64 = r.per_row_eps.iter().map(|e| e * e).sum();
        let solver: f64 = r.solver_eps.iter().map(|e| e * e).sum();
        worst = worst.max((closed - 3.0).abs()).max((solver - 3.0).abs());
        check((closed - 3.0).abs() <= 1e-6, &mut f, || format!("matrix {idx}: closed form sum {closed}"));
        check((solver - 3.0).abs() <= 1e-6, &mut f, || format!("matrix {idx}: solver sum {solver}"));
    }
    verdict(f, format!("20 matrices, max |sum - 3| = {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut f = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for idx in 0..100 {
        let rows = rng.random_range(2..=9);
        let cols = rng.random_range(1..=5);
        let a = uniform(&mut rng, rows, cols, -3.0, 3.0);
        let p = random_partition(rows, idx).unwrap();
        for px in [1.0, 2.0, f64::INFINITY] {
            let r = verify_qinf_invariance(&a, &p, px).unwrap();
            check(r.pass && r.achieved == r.claimed, &mut f, || {
                format!("pair {idx} p={px}: {} vs {}", r.achieved, r.claimed)
            });
        }
    }
    verdict(f, "300 exact equalities".into())
}

fn criterion_7() -> Outcome {
    let mut f = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inf = f64::INFINITY;
    let cases = [
        (1.0, 1.0),
        (1.0, 1.5),
        (1.0, 3.0),
        (1.0, inf),
        (1.5, inf),
        (2.0, inf),
        (inf, inf),
        (2.0, 2.0),
        (inf, 1.0),
        (inf, 2.0),
        (inf, 3.0),
    ];
    let mut sandwiches = 0;
    for idx in 0..30 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=4);
        let a = uniform(&mut rng, rows, cols, -2.0, 2.0);
        for (p, q) in cases {
            let exact = exact_pq_norm(&a, p, q).unwrap().unwrap().value;
            let lb = pq_norm_lower_bound(&a, p, q, 32, idx).unwrap().value;
            sandwiches += 1;
            check(lb <= exact * (1.0 + 1e-12), &mut f, || {
                format!("matrix {idx} (p,q)=({p},{q}): lower bound {lb} > exact {exact}")
            });
        }
    }
    let mut worst_gap: f64 = 0.0;
    for idx in 0..10u64 {
        let a = uniform(&mut rng, 6, 2, -1.0, 1.0);
        let part = random_partition(6, idx).unwrap();
        let exact = verify_pointwise_q2(&a, &part).unwrap();
        let est = estimate_pointwise_ratio(&a, &part, 2.0, 10_000, idx).unwrap();
        for k in 0..2 {
            let gap = exact.per_block[k] - est.per_block[k];
            worst_gap = worst_gap.max(gap);
            check(gap >= -1e-12, &mut f, || format!("6x2 #{idx} block {k}: estimate above exact by {}", -gap));
            check(gap <= 1e-4, &mut f, || format!("6x2 #{idx} block {k}: gap {gap}"));
        }
    }
    verdict(
        f,
        format!("{sandwiches} norm sandwiches; pointwise gap <= {worst_gap:.2e} on 10 6x2 instances"),
    )
}

fn criterion_8() -> Outcome {
    let mut f = Vec::new();
    let (rows, cols) = (8, 4);
    type Formula = Box<dyn Fn(f64, f64) -> Bound>;
    type Row = (&'static str, Formula, f64, fn(f64) -> f64);
    let formulas: Vec<Row> = vec![
        ("gamma", Box::new(|q, e| gamma(q, 1, e).unwrap()), 1.0, |q| 2f64.powf(-1.0 / q)),
        ("psi", Box::new(|q, e| psi(q, 1, e).unwrap()), 1.0, |_| 0.0),
        ("bound_a", Box::new(move |q, e| bound_a(q, cols, e).unwrap()), 1.0 - 1e-9, |q| 0.5f64.powf(1.0 / q)),
        ("bound_b", Box::new(move |q, e| bound_b(q, rows, cols, e).unwrap()), 1.0 - 1e-9, |q| 0.5f64.powf(1.0 / q)),
        ("bound_c", Box::new(move |q, e| bound_c(q, cols, e).unwrap()), 1.0 - 1e-9, |q| 0.5f64.powf(1.0 / q)),
    ];
    let mut deviations = Vec::new();
    for q in [1.0, 2.0, 3.0] {
        for (name, formula, eps_max, limit) in &formulas {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..=100 {
                let eps = eps_max * i as f64 / 100.0;
                let b = formula(q, eps);
                check(b.applicable, &mut f, || format!("{name} q={q}: eps={eps} outside validity"));
                check(b.value > prev, &mut f, || format!("{name} q={q}: not increasing at eps={eps}"));
                prev = b.value;
            }
            let v = formula(q, 1e-12).value;
            let dev = (v - limit(q)).abs();
            deviations.push(format!("{name}(q={q})={dev:.1e}"));
            check(dev <= 1e-6, &mut f, || {
                format!("{name} q={q}: |value - limit| = {dev:.3e} at eps=1e-12")
            });
        }
    }
    verdict(f, format!("monotone on all grids; limit deviations {}", deviations.join(" ")))
}

fn criterion_9() -> Outcome {
    let mut f = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let csv = dir.path().join("m.csv");
    std::fs::write(&csv, to_csv(&uniform(&mut rng, 7, 3, -1.0, 1.0))).unwrap();

    let ens = |task, kind, rows, cols, count, q| {
        let spec = EnsembleSpec {
            kind,
            rows,
            cols,
            count,
            seed: 99,
        };
        ExperimentConfig::new(task, q, Source::Ensemble(spec))
    };
    let mut file_cfg = ExperimentConfig::new(
        Task::Verify,
        1.5,
        Source::Input {
            path: csv,
            format: Format::Csv,
        },
    );
    file_cfg.seed = Some(4);
    file_cfg.p = f64::INFINITY;
    let configs = [
        ens(Task::EnsembleSweep, EnsembleKind::Gaussian, 10, 3, 5, 2.0),
        ens(Task::Verify, EnsembleKind::Sign, 8, 2, 4, 1.0),
        ens(Task::BalancedPartition, EnsembleKind::OrthonormalColumns, 12, 3, 3, 2.5),
        ens(Task::CheckConditions, EnsembleKind::Gaussian, 6, 2, 3, 3.0),
        ExperimentConfig::counterexample(2, 1.0),
        file_cfg,
    ];
    for (i, cfg) in configs.iter().enumerate() {
        let first = run(cfg).unwrap();
        let stored = RunReport::from_json(&first.to_json()).unwrap();
        let again = run(&stored.config).unwrap();
        check(again.deterministic_json() == first.deterministic_json(), &mut f, || {
            format!("config {i} ({}): regenerated report differs", cfg.task)
        });
        let text_a = first.to_json();
        let text_b = again.to_json();
        let cut = |t: &str| t[..t.find("\"timings\"").unwrap()].to_string();
        check(cut(&text_a) == cut(&text_b), &mut f, || format!("config {i}: bytes before timings differ"));
        let mismatches = stored.reverify();
        check(mismatches.is_empty(), &mut f, || format!("config {i}: {mismatches:?}"));
    }
    verdict(f, format!("{} configurations reproduced byte-for-byte", configs.len()))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("extremal family, exact", criterion_1),
        ("pointwise existence at q=2", criterion_2),
        ("balanced columns existence", criterion_3),
        ("sign-partition chain", criterion_4),
        ("leverage identity", criterion_5),
        ("(p,inf) invariance", criterion_6),
        ("oracle sandwiches", criterion_7),
        ("formula suite", criterion_8),
        ("report determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

