//! Partition construction.
//!
//! All objectives are "max over the two blocks" quantities that a good
//! partition makes small. Every stored [`PartitionResult::objective`] is
//! produced by [`Evaluator::eval`] on the stored partition, so re-evaluating
//! reproduces it bit for bit.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::norms::{check_finite_exponent, one_q_norm, rng, root};
use crate::range::RangeBasis;
use crate::{Error, Matrix, Partition, Result};

/// Largest `N` for which the `2^{N-1}` canonical partitions are enumerated.
pub const EXHAUSTIVE_MAX_ROWS: usize = 24;

const LOCAL_SEARCH_PASSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `max_k sup_x ‖A(Ω_k) x‖₂ / ‖A x‖₂` (only `q = 2`).
    PointwiseRatio,
    /// `max_k ‖A(Ω_k)‖_(1,q) / ‖A‖_(1,q)`.
    OneQRatio,
    /// `max_j |Σ_{Ω₁} |a_ij|^q − Σ_{Ω₂} |a_ij|^q|`.
    ColumnDiscrepancy,
    /// `max_{k,j} Σ_{Ω_k} |a_ij|^q / ‖w_j‖_q^q` over non-zero columns.
    ColumnFraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exhaustive,
    SignExact,
    SignHeuristic,
    BalancedExhaustive,
    BalancedHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub partition: Partition,
    pub objective: f64,
    pub kind: Objective,
    pub q: f64,
    pub method: Method,
    /// Partitions examined (enumeration) or flips tried (local search).
    pub work: u64,
    /// Balanced-column search only: the target and whether it was met.
    pub target: Option<f64>,
    pub achieved: Option<bool>,
}

/// `w̃_j = (|a_1j|^q, …, |a_Nj|^q)` for every column, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeColumns {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl TildeColumns {
    pub fn new(a: &Matrix, q: f64) -> Self {
        let data = a
            .data()
            .iter()
            .map(|v| if q == 1.0 { v.abs() } else { v.abs().powf(q) })
            .collect();
        TildeColumns {
            rows: a.nrows(),
            cols: a.ncols(),
            data,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// `‖w_j‖_q^q` for each column.
    pub fn totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (tj, v) in t.iter_mut().zip(self.row(i)) {
                *tj += v;
            }
        }
        t
    }

    /// Per-block column sums, accumulated in increasing row order.
    pub fn block_sums(&self, in_block2: impl Fn(usize) -> bool) -> [Vec<f64>; 2] {
        let mut s = [vec![0.0; self.cols], vec![0.0; self.cols]];
        for i in 0..self.rows {
            let k = usize::from(in_block2(i));
            for (sj, v) in s[k].iter_mut().zip(self.row(i)) {
                *sj += v;
            }
        }
        s
    }

    /// `max_j |⟨w̃_j, ξ⟩|` for the sign vector of the labelling.
    pub fn discrepancy(&self, in_block2: impl Fn(usize) -> bool) -> f64 {
        let [s1, s2] = self.block_sums(in_block2);
        s1.iter().zip(&s2).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Evaluates one objective on partitions of a fixed matrix.
pub struct Evaluator {
    kind: Objective,
    q: f64,
    tilde: TildeColumns,
    totals: Vec<f64>,
    /// `‖A‖_(1,q)` for [`Objective::OneQRatio`].
    norm: f64,
    basis: Option<RangeBasis>,
}

impl Evaluator {
    pub fn new(a: &Matrix, q: f64, kind: Objective) -> Result<Self> {
        check_finite_exponent(q)?;
        let tilde = TildeColumns::new(a, q);
        let totals = tilde.totals();
        let mut norm = 0.0;
        let mut basis = None;
        match kind {
            Objective::OneQRatio => {
                norm = one_q_norm(a, q)?.value;
                if norm == 0.0 {
                    return Err(Error::ZeroMatrix);
                }
            }
            Objective::PointwiseRatio => {
                if q != 2.0 {
                    return Err(Error::Unsupported(format!(
                        "exact pointwise ratio needs q = 2, got q = {q}"
                    )));
                }
                basis = Some(RangeBasis::new(a)?);
            }
            Objective::ColumnDiscrepancy | Objective::ColumnFraction => {}
        }
        Ok(Evaluator {
            kind,
            q,
            tilde,
            totals,
            norm,
            basis,
        })
    }

    pub fn kind(&self) -> Objective {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.tilde.rows
    }

    pub fn tilde(&self) -> &TildeColumns {
        &self.tilde
    }

    pub fn eval(&self, p: &Partition) -> f64 {
        let labels = p.labels();
        self.eval_labels(|i| labels[i])
    }

    pub fn eval_mask(&self, mask: u64) -> f64 {
        self.eval_labels(|i| mask >> i & 1 == 1)
    }

    pub fn eval_labels(&self, in_block2: impl Fn(usize) -> bool + Copy) -> f64 {
        match self.kind {
            Objective::OneQRatio => {
                let [s1, s2] = self.tilde.block_sums(in_block2);
                let m = s1.iter().chain(&s2).fold(0.0_f64, |m, &v| m.max(v));
                root(m, self.q) / self.norm
            }
            Objective::ColumnDiscrepancy => self.tilde.discrepancy(in_block2),
            Objective::ColumnFraction => {
                let [s1, s2] = self.tilde.block_sums(in_block2);
                let mut m = 0.0_f64;
                for j in 0..self.tilde.cols {
                    if self.totals[j] > 0.0 {
                        m = m.max(s1[j].max(s2[j]) / self.totals[j]);
                    }
                }
                m
            }
            Objective::PointwiseRatio => {
                let basis = self.basis.as_ref().expect("basis built for pointwise ratio");
                let (b1, b2): (Vec<usize>, Vec<usize>) =
                    (0..self.tilde.rows).partition(|&i| !in_block2(i));
                largest_eigenvalue(&basis.gram(&b1))
                    .max(largest_eigenvalue(&basis.gram(&b2)))
                    .max(0.0)
                    .sqrt()
            }
        }
    }
}

pub(crate) fn largest_eigenvalue(g: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(g.clone()).eigenvalues.max()
}

fn check_exhaustive(rows: usize) -> Result<()> {
    if rows > EXHAUSTIVE_MAX_ROWS {
        Err(Error::TooLarge {
            rows,
            max: EXHAUSTIVE_MAX_ROWS,
        })
    } else {
        Ok(())
    }
}

/// Canonical masks keep row 0 in block 1: `mask = m << 1`, `m < 2^{N-1}`.
fn canonical_count(rows: usize) -> u64 {
    1u64 << (rows - 1)
}

/// Minimum of `eval` over all canonical partitions, ties to the smallest mask.
fn enumerate_min(rows: usize, eval: impl Fn(u64) -> f64 + Sync) -> (u64, f64) {
    (0..canonical_count(rows))
        .into_par_iter()
        .map(|m| {
            let mask = m << 1;
            (mask, eval(mask))
        })
        .reduce(
            || (u64::MAX, f64::INFINITY),
            |a, b| match a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)) {
                std::cmp::Ordering::Greater => b,
                _ => a,
            },
        )
}

/// Exhaustive minimizer over all `2^{N-1}` canonical partitions (including the
/// trivial one with an empty second block).
pub fn exhaustive_best_partition(a: &Matrix, q: f64, kind: Objective) -> Result<PartitionResult> {
    check_exhaustive(a.nrows())?;
    let ev = Evaluator::new(a, q, kind)?;
    let method = match kind {
        Objective::ColumnDiscrepancy => Method::SignExact,
        _ => Method::Exhaustive,
    };
    Ok(exhaustive_with(&ev, q, method))
}

fn exhaustive_with(ev: &Evaluator, q: f64, method: Method) -> PartitionResult {
    let rows = ev.rows();
    let (mask, _) = enumerate_min(rows, |m| ev.eval_mask(m));
    let partition = Partition::from_mask(rows, mask);
    PartitionResult {
        objective: ev.eval(&partition),
        partition,
        kind: ev.kind(),
        q,
        method,
        work: canonical_count(rows),
        target: None,
        achieved: None,
    }
}

/// Sign vector `ξ` with small column discrepancy `max_j |⟨w̃_j, ξ⟩|`, and the
/// induced partition `Ω₁ = {i : ξ_i = +1}`.
pub fn sign_discrepancy_partition(a: &Matrix, q: f64, mode: SearchMode) -> Result<PartitionResult> {
    match mode {
        SearchMode::Exact => exhaustive_best_partition(a, q, Objective::ColumnDiscrepancy),
        SearchMode::Heuristic => {
            let ev = Evaluator::new(a, q, Objective::ColumnDiscrepancy)?;
            let (signs, work) = greedy_signs(ev.tilde(), None);
            let partition = Partition::from_signs(&signs).canonical();
            Ok(PartitionResult {
                objective: ev.eval(&partition),
                partition,
                kind: Objective::ColumnDiscrepancy,
                q,
                method: Method::SignHeuristic,
                work,
                target: None,
                achieved: None,
            })
        }
    }
}

/// Greedy assignment in decreasing row mass followed by single-flip local
/// search. With `scale`, column `j` is weighted by `1 / scale[j]`
/// (zero-scale columns ignored). Returns the signs and the number of flips tried.
fn greedy_signs(t: &TildeColumns, scale: Option<&[f64]>) -> (Vec<i8>, u64) {
    let (rows, cols) = (t.rows, t.cols);
    let w = |i: usize, j: usize| -> f64 {
        match scale {
            Some(s) if s[j] > 0.0 => t.get(i, j) / s[j],
            Some(_) => 0.0,
            None => t.get(i, j),
        }
    };
    let mass: Vec<f64> = (0..rows).map(|i| (0..cols).map(|j| w(i, j)).sum()).collect();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));

    let mut sums = vec![0.0; cols];
    let mut signs = vec![1i8; rows];
    let disc_with = |sums: &[f64], i: usize, s: f64| -> f64 {
        (0..cols).fold(0.0_f64, |m, j| m.max((sums[j] + s * w(i, j)).abs()))
    };
    for &i in &order {
        let plus = disc_with(&sums, i, 1.0);
        let minus = disc_with(&sums, i, -1.0);
        let s = if minus < plus { -1.0 } else { 1.0 };
        signs[i] = s as i8;
        for (j, sj) in sums.iter_mut().enumerate() {
            *sj += s * w(i, j);
        }
    }

    let current = |sums: &[f64]| sums.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut best = current(&sums);
    let mut work = 0;
    for _ in 0..LOCAL_SEARCH_PASSES {
        let mut improved = false;
        for i in 0..rows {
            work += 1;
            let s = f64::from(signs[i]);
            // flipping ξ_i moves the sums by −2 ξ_i w_i
            let d = disc_with(&sums, i, -2.0 * s);
            if d < best {
                for (j, sj) in sums.iter_mut().enumerate() {
                    *sj -= 2.0 * s * w(i, j);
                }
                signs[i] = -signs[i];
                best = d;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    (signs, work)
}

/// A partition putting at most `target` of every column's `q`-th power mass in
/// each block.
///
/// Exhaustive (smallest qualifying mask) for `N ≤ 24`, otherwise the sign
/// heuristic on mass-normalized columns. When nothing qualifies the best
/// partition found is returned with `achieved = Some(false)`.
pub fn balanced_column_partition(a: &Matrix, q: f64, target: f64) -> Result<PartitionResult> {
    if !(0.5..=1.0).contains(&target) {
        return Err(Error::InvalidTarget(target));
    }
    let ev = Evaluator::new(a, q, Objective::ColumnFraction)?;
    let rows = a.nrows();
    if rows <= EXHAUSTIVE_MAX_ROWS {
        let first = (0..canonical_count(rows))
            .into_par_iter()
            .map(|m| m << 1)
            .find_first(|&mask| ev.eval_mask(mask) <= target);
        let (mask, work) = match first {
            Some(mask) => (mask, (mask >> 1) + 1),
            None => (enumerate_min(rows, |m| ev.eval_mask(m)).0, canonical_count(rows)),
        };
        let partition = Partition::from_mask(rows, mask);
        let objective = ev.eval(&partition);
        return Ok(PartitionResult {
            partition,
            objective,
            kind: Objective::ColumnFraction,
            q,
            method: Method::BalancedExhaustive,
            work,
            target: Some(target),
            achieved: Some(objective <= target),
        });
    }
    let totals = ev.tilde().totals();
    let (signs, work) = greedy_signs(ev.tilde(), Some(&totals));
    let partition = Partition::from_signs(&signs).canonical();
    let objective = ev.eval(&partition);
    Ok(PartitionResult {
        partition,
        objective,
        kind: Objective::ColumnFraction,
        q,
        method: Method::BalancedHeuristic,
        work,
        target: Some(target),
        achieved: Some(objective <= target),
    })
}

/// Uniform over the `2^{N-1} − 1` canonical partitions with both blocks non-empty.
pub fn random_partition(rows: usize, seed: u64) -> Result<Partition> {
    if rows < 2 {
        return Err(Error::NoNontrivialPartition);
    }
    let mut rng = rng(seed);
    loop {
        let labels: Vec<bool> = (0..rows).map(|i| i > 0 && rng.random::<bool>()).collect();
        if labels.iter().any(|&b| b) {
            return Ok(Partition::from_labels(&labels));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexamples::theorem4_matrix;
    use approx::assert_relative_eq;

    fn m<const C: usize>(rows: &[[f64; C]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn two_equal_rows_split() {
        let a = m(&[[1.0], [1.0]]);
        let r = exhaustive_best_partition(&a, 1.0, Objective::OneQRatio).unwrap();
        assert_eq!(r.objective, 0.5);
        assert_eq!(r.partition.block1(), &[0]);
        let s = sign_discrepancy_partition(&a, 1.0, SearchMode::Heuristic).unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.partition.signs(), vec![1, -1]);
        let b = balanced_column_partition(&a, 1.0, 0.5).unwrap();
        assert_eq!(b.achieved, Some(true));
        assert_eq!(b.partition.block1(), &[0]);
    }

    #[test]
    fn counterexample_optimum_is_one() {
        let a = theorem4_matrix(2, 1.0).unwrap();
        let r = exhaustive_best_partition(&a, 1.0, Objective::OneQRatio).unwrap();
        assert_eq!(r.objective, 1.0);
        assert_eq!(r.work, 8);
    }

    #[test]
    fn counterexample_discrepancy_by_enumeration() {
        let a = theorem4_matrix(2, 1.0).unwrap();
        let t = TildeColumns::new(&a, 1.0);
        // brute force over the 8 sign patterns with ξ₁ = +1
        let mut best = f64::INFINITY;
        for m in 0..8u64 {
            let xi: Vec<f64> = (0..4).map(|i| if i > 0 && m >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let d = (0..8)
                .map(|j| (0..4).map(|i| xi[i] * t.get(i, j)).sum::<f64>().abs())
                .fold(0.0, f64::max);
            best = best.min(d);
        }
        let r = sign_discrepancy_partition(&a, 1.0, SearchMode::Exact).unwrap();
        assert_eq!(r.objective, best);
        assert!(r.objective > 0.0);
    }

    #[test]
    fn duplicated_rows_pointwise() {
        let a = m(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
        let r = exhaustive_best_partition(&a, 2.0, Objective::PointwiseRatio).unwrap();
        assert_relative_eq!(r.objective, 0.5f64.sqrt(), epsilon = 1e-12);
        for k in 0..2 {
            let b = r.partition.block(k);
            assert_eq!(b.len(), 2);
            assert!(b.iter().any(|&i| i < 2) && b.iter().any(|&i| i >= 2));
        }
        assert!(exhaustive_best_partition(&a, 1.5, Objective::PointwiseRatio).is_err());
    }

    #[test]
    fn duplicated_rows_cancel() {
        let a = m(&[[0.3, -1.0, 2.0], [0.3, -1.0, 2.0], [1.5, 0.2, 0.0], [1.5, 0.2, 0.0]]);
        for mode in [SearchMode::Exact, SearchMode::Heuristic] {
            assert_eq!(sign_discrepancy_partition(&a, 1.5, mode).unwrap().objective, 0.0);
        }
    }

    #[test]
    fn size_guard() {
        let a = Matrix::new(25, 1, vec![1.0; 25]).unwrap();
        assert!(matches!(
            exhaustive_best_partition(&a, 1.0, Objective::OneQRatio),
            Err(Error::TooLarge { rows: 25, .. })
        ));
        // large inputs fall back to the heuristic
        let b = balanced_column_partition(&a, 1.0, 0.5).unwrap();
        assert_eq!(b.method, Method::BalancedHeuristic);
        assert_eq!(b.achieved, Some(false));
        assert!(b.objective <= 13.0 / 25.0 + 1e-12);
    }

    #[test]
    fn balanced_targets() {
        let a = m(&[[1.0, 2.0], [0.5, 0.1], [0.2, 0.9]]);
        let r = balanced_column_partition(&a, 1.0, 1.0).unwrap();
        assert_eq!(r.achieved, Some(true));
        assert_eq!(r.partition.mask(), Some(0));
        assert_eq!(balanced_column_partition(&a, 1.0, 0.4), Err(Error::InvalidTarget(0.4)));
        let r = balanced_column_partition(&a, 1.0, 0.5).unwrap();
        assert_eq!(r.achieved, Some(false));
    }

    #[test]
    fn random_partition_contract() {
        assert_eq!(random_partition(1, 0), Err(Error::NoNontrivialPartition));
        for seed in 0..20 {
            let p = random_partition(2, seed).unwrap();
            assert_eq!((p.block1(), p.block2()), (&[0][..], &[1][..]));
        }
        let p = random_partition(10, 42).unwrap();
        assert_eq!(p, random_partition(10, 42).unwrap());
        assert!(p.is_canonical() && p.is_nontrivial());
    }

    #[test]
    fn stored_objective_reproduces() {
        let a = m(&[[1.0, 2.0], [0.5, -0.1], [0.2, 0.9], [-1.0, 0.3], [0.7, 0.7]]);
        for kind in [Objective::OneQRatio, Objective::PointwiseRatio, Objective::ColumnDiscrepancy, Objective::ColumnFraction] {
            let r = exhaustive_best_partition(&a, 2.0, kind).unwrap();
            let ev = Evaluator::new(&a, 2.0, kind).unwrap();
            assert_eq!(ev.eval(&r.partition), r.objective);
            assert_eq!(ev.eval(&r.partition.swapped()), r.objective);
        }
    }
}
