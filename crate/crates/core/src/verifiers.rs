//! Checks of a concrete `(A, partition)` pair against a claimed bound.
//!
//! Exact checks (`q = 2` pointwise ratio, `(1,q)` norms, `(p,∞)` norms) decide
//! pass/fail outright. Everything else searches for a violating direction: a
//! failure is then a genuine counterexample, a pass only means none was found.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::gamma;
use crate::conditions::{full_row_report, leverage_eps};
use crate::norms::{
    check_exponent, check_finite_exponent, exact_pq_norm, gaussian_vec, lp_norm, lp_power_sum,
    norm_subgradient, normalize, one_q_norm, p_infty_norm, pq_norm_lower_bound, rng, Exactness,
    ASCENT_STEPS,
};
use crate::partitioners::TildeColumns;
use crate::range::RangeBasis;
use crate::{Error, Matrix, Partition, Result};

/// Relative tolerance for exact comparisons.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Relative slack for probe-based comparisons of sums of the same terms.
pub const PROBE_TOLERANCE: f64 = 1e-12;
/// Random probe directions used by [`verify_two_sided`].
pub const TWO_SIDED_PROBES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Claim {
    /// `‖A(Ω_k) x‖_q ≤ γ ‖A x‖_q` for all `x`.
    #[serde(rename = "T1-pointwise")]
    T1Pointwise,
    /// `(1/2 − ψ) Σ_N ≤ Σ_{Ω_k} ≤ (1/2 + ψ) Σ_N` of `|(v_i, x)|^q`.
    #[serde(rename = "corollary-two-sided")]
    CorollaryTwoSided,
    /// `‖A(Ω_k)‖_(X,q) ≤ γ ‖A‖_(X,q)` with `X = l_p`.
    #[serde(rename = "T2-Xq-norm")]
    T2XqNorm,
    /// `‖A(Ω_k)‖_(1,q) ≤ c ‖A‖_(1,q)`.
    #[serde(rename = "T3-1q-norm")]
    T3OneQ,
    /// `‖A(Ω_k)‖_(1,q)^q ≤ (‖A‖_(1,q)^q + D) / 2` for sign discrepancy `D`.
    #[serde(rename = "T3-discrepancy-chain")]
    T3DiscrepancyChain,
    /// Some block keeps the full `(1,q)`-norm for every partition.
    #[serde(rename = "T4-full-norm")]
    T4FullNorm,
    /// Some block keeps the full `(p,∞)`-norm.
    #[serde(rename = "Qinf-invariance")]
    QinfInvariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub claim: Claim,
    pub exactness: Exactness,
    /// Headline value compared against `claimed` (the max over blocks).
    pub achieved: f64,
    pub per_block: Vec<f64>,
    pub claimed: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Whether the hypotheses behind `claimed` hold for this matrix.
    pub bound_applicable: bool,
    /// Whether a failed comparison is a proven violation.
    pub falsifying: bool,
    pub witnesses: Vec<Vec<f64>>,
    pub details: BTreeMap<String, f64>,
}

impl VerificationReport {
    /// A proven violation of an applicable claim.
    pub fn failed(&self) -> bool {
        !self.pass && self.bound_applicable && self.falsifying
    }

    /// Passed on an exact path.
    pub fn certified(&self) -> bool {
        self.pass && self.exactness == Exactness::Exact
    }

    pub fn with_applicability(mut self, applicable: bool) -> Self {
        self.bound_applicable = applicable;
        self
    }

    #[allow(clippy::too_many_arguments)]
    fn le(
        claim: Claim,
        exactness: Exactness,
        per_block: Vec<f64>,
        claimed: f64,
        rel_tol: f64,
        witnesses: Vec<Vec<f64>>,
        details: BTreeMap<String, f64>,
    ) -> Self {
        let achieved = per_block.iter().fold(0.0_f64, |m, &v| m.max(v));
        let tolerance = rel_tol * claimed.abs().max(1.0);
        VerificationReport {
            claim,
            exactness,
            achieved,
            per_block,
            claimed,
            tolerance,
            pass: achieved <= claimed + tolerance,
            bound_applicable: true,
            falsifying: true,
            witnesses,
            details,
        }
    }
}

fn check_partition(a: &Matrix, p: &Partition) -> Result<()> {
    if p.len() != a.nrows() {
        return Err(Error::InvalidPartition(format!(
            "partition of {} rows for a matrix with {} rows",
            p.len(),
            a.nrows()
        )));
    }
    Ok(())
}

/// Exact `r_k = sup_x ‖A(Ω_k) x‖₂ / ‖A x‖₂` compared with `γ(2, rank, ε)`,
/// `ε` the largest leverage-score row condition.
///
/// In orthonormal image coordinates `r_k²` is the largest eigenvalue of the
/// Gram matrix of the block's rows, which solves the generalized problem
/// `(A(Ω_k)ᵀA(Ω_k), AᵀA)` restricted to the row space.
pub fn verify_pointwise_q2(a: &Matrix, p: &Partition) -> Result<VerificationReport> {
    check_partition(a, p)?;
    let basis = RangeBasis::new(a)?;
    let mut per_block = Vec::with_capacity(2);
    let mut witnesses = Vec::with_capacity(2);
    for k in 0..2 {
        let g = basis.gram(p.block(k));
        let eig = nalgebra::SymmetricEigen::new(g);
        let top = eig.eigenvalues.imax();
        per_block.push(eig.eigenvalues[top].max(0.0).sqrt());
        let y: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        witnesses.push(basis.preimage(&y));
    }
    let eps = (0..a.nrows())
        .map(|i| leverage_eps(&basis, i))
        .fold(0.0_f64, f64::max);
    let rank = basis.rank();
    let bound = gamma(2.0, rank, eps)?;
    let mut details = BTreeMap::new();
    details.insert("eps_row_min".into(), eps);
    details.insert("rank".into(), rank as f64);
    details.insert(
        "sum_of_squares".into(),
        per_block.iter().map(|r| r * r).sum(),
    );
    Ok(VerificationReport::le(
        Claim::T1Pointwise,
        Exactness::Exact,
        per_block,
        bound.value,
        EXACT_TOLERANCE,
        witnesses,
        details,
    )
    .with_applicability(bound.applicable))
}

/// Best `‖U_k y‖_q / ‖U y‖_q` found from `budget` random directions, the top
/// 32 of which are refined by subgradient ascent on the log-ratio.
fn ratio_search(
    basis: &RangeBasis,
    block: &[usize],
    q: f64,
    budget: usize,
    rng: &mut impl Rng,
) -> (f64, Vec<f64>) {
    let r = basis.rank();
    let ratio = |y: &[f64]| -> f64 {
        let full = basis.image(y);
        let den = lp_norm(&full, q);
        if den == 0.0 {
            return 0.0;
        }
        let sub: Vec<f64> = block.iter().map(|&i| full[i]).collect();
        lp_norm(&sub, q) / den
    };
    let mut starts: Vec<(f64, Vec<f64>)> = (0..r)
        .map(|k| {
            let mut e = vec![0.0; r];
            e[k] = 1.0;
            (ratio(&e), e)
        })
        .collect();
    for _ in 0..budget {
        let mut y = gaussian_vec(rng, r);
        if normalize(&mut y, 2.0).is_some() {
            starts.push((ratio(&y), y));
        }
    }
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = starts[0].clone();
    for (v0, mut y) in starts.into_iter().take(32) {
        let mut v = v0;
        for t in 0..ASCENT_STEPS {
            let full = basis.image(&y);
            let den = lp_norm(&full, q);
            let sub: Vec<f64> = block.iter().map(|&i| full[i]).collect();
            let num = lp_norm(&sub, q);
            if den == 0.0 || num == 0.0 {
                break;
            }
            let s_full = norm_subgradient(&full, q);
            let s_sub = norm_subgradient(&sub, q);
            // ∇ log ratio = U_kᵀ s_k / num − Uᵀ s / den
            let mut g = vec![0.0; r];
            for (c, gc) in g.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (bi, &i) in block.iter().enumerate() {
                    acc += basis.u[(i, c)] * s_sub[bi] / num;
                }
                for (i, sf) in s_full.iter().enumerate() {
                    acc -= basis.u[(i, c)] * sf / den;
                }
                *gc = acc;
            }
            let gn = lp_norm(&g, 2.0);
            if gn == 0.0 {
                break;
            }
            let step = 0.5 / ((t + 1) as f64).sqrt() / gn;
            let mut cand: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            if normalize(&mut cand, 2.0).is_none() {
                break;
            }
            let vc = ratio(&cand);
            y = cand;
            v = vc;
            if v > best.0 {
                best = (v, y.clone());
            }
        }
        if v > best.0 {
            best = (v, y);
        }
    }
    best
}

/// Seeded lower bounds on the pointwise ratios for any `q`, against
/// `γ(q, rank, ε_row)`. Can only falsify a claimed `γ`.
pub fn estimate_pointwise_ratio(
    a: &Matrix,
    p: &Partition,
    q: f64,
    budget: usize,
    seed: u64,
) -> Result<VerificationReport> {
    check_finite_exponent(q)?;
    check_partition(a, p)?;
    let basis = RangeBasis::new(a)?;
    let mut rng = rng(seed);
    let mut per_block = Vec::with_capacity(2);
    let mut witnesses = Vec::with_capacity(2);
    for k in 0..2 {
        if p.block(k).is_empty() {
            per_block.push(0.0);
            witnesses.push(vec![0.0; a.ncols()]);
            continue;
        }
        let (v, y) = ratio_search(&basis, p.block(k), q, budget, &mut rng);
        per_block.push(v);
        witnesses.push(basis.preimage(&y));
    }
    let rows = full_row_report(a, q)?;
    let bound = gamma(q, basis.rank(), rows.eps_row_min)?;
    let mut details = BTreeMap::new();
    details.insert("eps_row_min".into(), rows.eps_row_min);
    details.insert("budget".into(), budget as f64);
    Ok(VerificationReport::le(
        Claim::T1Pointwise,
        Exactness::LowerBound,
        per_block,
        bound.value,
        PROBE_TOLERANCE,
        witnesses,
        details,
    )
    .with_applicability(bound.applicable))
}

/// Exact `max_k ‖A(Ω_k)‖_(1,q) / ‖A‖_(1,q)` against `claimed`. An empty block
/// contributes 0.
pub fn verify_one_q(a: &Matrix, p: &Partition, q: f64, claimed: f64) -> Result<VerificationReport> {
    check_exponent(q)?;
    check_partition(a, p)?;
    let full = one_q_norm(a, q)?;
    if full.value == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let mut per_block = Vec::with_capacity(2);
    let mut witnesses = Vec::with_capacity(2);
    for k in 0..2 {
        if p.block(k).is_empty() {
            per_block.push(0.0);
            witnesses.push(vec![0.0; a.ncols()]);
        } else {
            let sub = one_q_norm(&a.submatrix(p.block(k))?, q)?;
            per_block.push(sub.value / full.value);
            witnesses.push(sub.witness);
        }
    }
    let mut details = BTreeMap::new();
    details.insert("full_norm".into(), full.value);
    Ok(VerificationReport::le(
        Claim::T3OneQ,
        Exactness::Exact,
        per_block,
        claimed,
        EXACT_TOLERANCE,
        witnesses,
        details,
    ))
}

/// Checks `‖A(Ω_k)‖_(1,q)^q ≤ (‖A‖_(1,q)^q + D) / 2`, `D` the column
/// discrepancy of the partition's sign vector. Both sides use `q`-th powers.
pub fn verify_discrepancy_chain(a: &Matrix, p: &Partition, q: f64) -> Result<VerificationReport> {
    check_finite_exponent(q)?;
    check_partition(a, p)?;
    let t = TildeColumns::new(a, q);
    let labels = p.labels();
    let [s1, s2] = t.block_sums(|i| labels[i]);
    let d = t.discrepancy(|i| labels[i]);
    let full_pow = t.totals().into_iter().fold(0.0_f64, f64::max);
    let per_block = vec![
        s1.iter().copied().fold(0.0_f64, f64::max),
        s2.iter().copied().fold(0.0_f64, f64::max),
    ];
    let claimed = 0.5 * (full_pow + d);
    let mut details = BTreeMap::new();
    details.insert("discrepancy".into(), d);
    details.insert("full_norm_pow".into(), full_pow);
    Ok(VerificationReport::le(
        Claim::T3DiscrepancyChain,
        Exactness::Exact,
        per_block,
        claimed,
        PROBE_TOLERANCE,
        vec![],
        details,
    ))
}

/// Probes `(1/2 − ψ) Σ_N ≤ Σ_{Ω_k} ≤ (1/2 + ψ) Σ_N` (sums of `|(v_i, x)|^q`)
/// on every `e_j` and 1000 seeded random unit directions.
///
/// `achieved` is the worst relative deviation `|Σ_{Ω_k}/Σ_N − 1/2|`, compared
/// with `ψ`. The inequality with the block sum and the full sum exchanged is
/// evaluated too and reported as `raw_*` details.
pub fn verify_two_sided(
    a: &Matrix,
    p: &Partition,
    q: f64,
    psi: f64,
    seed: u64,
) -> Result<VerificationReport> {
    check_finite_exponent(q)?;
    check_partition(a, p)?;
    if psi.is_nan() || psi < 0.0 {
        return Err(Error::InvalidArgument(format!("psi must be non-negative, got {psi}")));
    }
    let n = a.ncols();
    let mut rng = rng(seed);
    let mut probes: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for _ in 0..TWO_SIDED_PROBES {
        let mut x = gaussian_vec(&mut rng, n);
        if normalize(&mut x, 2.0).is_some() {
            probes.push(x);
        }
    }
    let labels = p.labels();
    let mut dev = [0.0_f64; 2];
    let mut worst_x = vec![vec![0.0; n], vec![0.0; n]];
    let mut margin = f64::INFINITY;
    let mut raw_margin = f64::INFINITY;
    for x in &probes {
        let ax = a.mul_vec(x);
        let total = lp_power_sum(ax.iter().copied(), q);
        if total == 0.0 {
            continue;
        }
        let mut sums = [0.0; 2];
        for (i, v) in ax.iter().enumerate() {
            sums[usize::from(labels[i])] += lp_power_sum([*v], q);
        }
        for k in 0..2 {
            let frac = sums[k] / total;
            let d = (frac - 0.5).abs();
            if d > dev[k] {
                dev[k] = d;
                worst_x[k] = x.clone();
            }
            margin = margin.min((frac - (0.5 - psi)).min((0.5 + psi) - frac));
            raw_margin = raw_margin.min(
                (1.0 - (0.5 - psi) * frac).min((0.5 + psi) * frac - 1.0),
            );
        }
    }
    if !margin.is_finite() {
        return Err(Error::ZeroMatrix);
    }
    let mut details = BTreeMap::new();
    details.insert("worst_margin".into(), margin);
    details.insert("raw_worst_margin".into(), raw_margin);
    details.insert("raw_holds".into(), f64::from(u8::from(raw_margin >= -PROBE_TOLERANCE)));
    details.insert("probes".into(), probes.len() as f64);
    Ok(VerificationReport::le(
        Claim::CorollaryTwoSided,
        Exactness::LowerBound,
        dev.to_vec(),
        psi,
        PROBE_TOLERANCE,
        worst_x,
        details,
    )
    .with_applicability(psi < 0.5))
}

/// `max_k ‖A(Ω_k)‖_(p,∞) = ‖A‖_(p,∞)`, compared exactly: the block holding the
/// maximizing row keeps the full norm.
pub fn verify_qinf_invariance(a: &Matrix, p: &Partition, p_exp: f64) -> Result<VerificationReport> {
    check_exponent(p_exp)?;
    check_partition(a, p)?;
    let full = p_infty_norm(a, p_exp)?;
    let mut per_block = Vec::with_capacity(2);
    let mut witnesses = Vec::with_capacity(2);
    for k in 0..2 {
        if p.block(k).is_empty() {
            per_block.push(0.0);
            witnesses.push(vec![0.0; a.ncols()]);
        } else {
            let sub = p_infty_norm(&a.submatrix(p.block(k))?, p_exp)?;
            per_block.push(sub.value);
            witnesses.push(sub.witness);
        }
    }
    let achieved = per_block.iter().fold(0.0_f64, |m, &v| m.max(v));
    let mut details = BTreeMap::new();
    details.insert("maximizing_row".into(), full.witness_index.unwrap_or(0) as f64);
    Ok(VerificationReport {
        claim: Claim::QinfInvariance,
        exactness: Exactness::Exact,
        achieved,
        per_block,
        claimed: full.value,
        tolerance: 0.0,
        pass: achieved == full.value,
        bound_applicable: true,
        falsifying: true,
        witnesses,
        details,
    })
}

/// `max_k ‖A(Ω_k)‖_(p,q) / ‖A‖_(p,q)` against `claimed`.
///
/// Exact when [`exact_pq_norm`] covers `(p, q)` (`X = l₁`, `l_∞` with at most
/// 20 columns, `l₂` with `q = 2`). Otherwise both norms are search estimates,
/// the ratio is neither an upper nor a lower bound, and a failure does not
/// count as a violation.
pub fn verify_xq_norm(
    a: &Matrix,
    p: &Partition,
    p_exp: f64,
    q: f64,
    claimed: f64,
    budget: usize,
    seed: u64,
) -> Result<VerificationReport> {
    check_exponent(p_exp)?;
    check_exponent(q)?;
    check_partition(a, p)?;
    let norm = |m: &Matrix, s: u64| -> Result<(f64, Vec<f64>, bool)> {
        Ok(match exact_pq_norm(m, p_exp, q)? {
            Some(v) => (v.value, v.witness, true),
            None => {
                let v = pq_norm_lower_bound(m, p_exp, q, budget, s)?;
                (v.value, v.witness, false)
            }
        })
    };
    let (full, _, mut exact) = norm(a, seed)?;
    if full == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let mut per_block = Vec::with_capacity(2);
    let mut witnesses = Vec::with_capacity(2);
    for k in 0..2 {
        if p.block(k).is_empty() {
            per_block.push(0.0);
            witnesses.push(vec![0.0; a.ncols()]);
        } else {
            let (v, w, e) = norm(&a.submatrix(p.block(k))?, seed.wrapping_add(k as u64 + 1))?;
            exact &= e;
            per_block.push(v / full);
            witnesses.push(w);
        }
    }
    let mut details = BTreeMap::new();
    details.insert("full_norm".into(), full);
    let mut rep = VerificationReport::le(
        Claim::T2XqNorm,
        if exact {
            Exactness::Exact
        } else {
            Exactness::LowerBound
        },
        per_block,
        claimed,
        EXACT_TOLERANCE,
        witnesses,
        details,
    );
    rep.falsifying = exact;
    Ok(rep)
}
