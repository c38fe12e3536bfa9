//! Operator `(p,q)`-norms `‖A‖_(p,q) = sup_{‖x‖_p ≤ 1} ‖A x‖_q`.
//!
//! Exact routines cover the cases with closed forms: `(1,q)` (largest column
//! `q`-norm), `(p,∞)` (largest dual row norm) and `(2,2)` (spectral norm).
//! Everything else goes through [`pq_norm_lower_bound`].

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub exactness: Exactness,
    /// Unit-norm `x` attaining (or approaching) the value.
    pub witness: Vec<f64>,
    /// Maximizing column for `(1,q)`, maximizing row for `(p,∞)`.
    pub witness_index: Option<usize>,
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

pub(crate) fn check_finite_exponent(q: f64) -> Result<()> {
    check_exponent(q)?;
    if q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(q))
    }
}

/// `p'` with `1/p + 1/p' = 1`.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `Σ |x_i|^q` for finite `q`.
pub fn lp_power_sum(x: impl IntoIterator<Item = f64>, q: f64) -> f64 {
    if q == 1.0 {
        x.into_iter().map(f64::abs).sum()
    } else if q == 2.0 {
        x.into_iter().map(|v| v * v).sum()
    } else {
        x.into_iter().map(|v| v.abs().powf(q)).sum()
    }
}

/// `s^(1/q)`, with the common exponents special-cased.
pub fn root(s: f64, q: f64) -> f64 {
    if q == 1.0 {
        s
    } else if q == 2.0 {
        s.sqrt()
    } else {
        s.powf(1.0 / q)
    }
}

pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        root(lp_power_sum(x.iter().copied(), p), p)
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A subgradient of `‖·‖_q` at `y` (with `sign(0) = 0`), zero at `y = 0`.
pub(crate) fn norm_subgradient(y: &[f64], q: f64) -> Vec<f64> {
    if q == 1.0 {
        return y.iter().map(|&v| sign(v)).collect();
    }
    let mut s = vec![0.0; y.len()];
    if q.is_infinite() {
        let (i, m) = y
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
        if m > 0.0 {
            s[i] = sign(y[i]);
        }
        return s;
    }
    let nrm = lp_norm(y, q);
    if nrm == 0.0 {
        return s;
    }
    for (si, &v) in s.iter_mut().zip(y) {
        *si = sign(v) * (v.abs() / nrm).powf(q - 1.0);
    }
    s
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Rescales `x` onto the unit `l_p` sphere; `None` for the zero vector.
pub(crate) fn normalize(x: &mut [f64], p: f64) -> Option<()> {
    let n = lp_norm(x, p);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    x.iter_mut().for_each(|v| *v /= n);
    Some(())
}

/// `‖‖w_j‖_q‖` maximized over columns; ties go to the smallest `j`.
pub fn one_q_norm(a: &Matrix, q: f64) -> Result<NormValue> {
    check_exponent(q)?;
    let mut best = (0, -1.0);
    for j in 0..a.ncols() {
        let c = lp_norm(&a.column(j), q);
        if c > best.1 {
            best = (j, c);
        }
    }
    let mut witness = vec![0.0; a.ncols()];
    witness[best.0] = 1.0;
    Ok(NormValue {
        value: best.1,
        exactness: Exactness::Exact,
        witness,
        witness_index: Some(best.0),
    })
}

/// `‖A‖_(p,∞) = max_i ‖v_i‖_{p'}`; the witness is the dual vector of the
/// maximizing row.
pub fn p_infty_norm(a: &Matrix, p: f64) -> Result<NormValue> {
    check_exponent(p)?;
    let dual = dual_exponent(p);
    let mut best = (0, -1.0);
    for (i, r) in a.rows_iter().enumerate() {
        let v = lp_norm(r, dual);
        if v > best.1 {
            best = (i, v);
        }
    }
    let row = a.row(best.0);
    let mut witness = vec![0.0; a.ncols()];
    if best.1 > 0.0 {
        if p == 1.0 {
            let j = (0..row.len())
                .fold(0, |b, j| if row[j].abs() > row[b].abs() { j } else { b });
            witness[j] = sign(row[j]);
        } else if p.is_infinite() {
            for (w, &v) in witness.iter_mut().zip(row) {
                *w = sign(v);
            }
        } else {
            for (w, &v) in witness.iter_mut().zip(row) {
                *w = sign(v) * (v.abs() / best.1).powf(dual - 1.0);
            }
        }
    } else {
        witness[0] = 1.0;
    }
    Ok(NormValue {
        value: best.1,
        exactness: Exactness::Exact,
        witness,
        witness_index: Some(best.0),
    })
}

/// Spectral norm from the largest eigenpair of `AᵀA`.
pub fn two_two_norm(a: &Matrix) -> NormValue {
    let m = a.to_dmatrix();
    let eig = SymmetricEigen::new(m.transpose() * &m);
    let k = eig.eigenvalues.imax();
    let witness: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    NormValue {
        value: eig.eigenvalues[k].max(0.0).sqrt(),
        exactness: Exactness::Exact,
        witness,
        witness_index: None,
    }
}

/// Largest `n` for which [`infty_q_norm`] enumerates the cube vertices.
pub const CUBE_VERTEX_MAX_COLS: usize = 20;

/// `‖A‖_(∞,q)`: a convex function on the cube `[-1,1]^n` peaks at a vertex,
/// so the `2^{n-1}` sign vectors with `x_0 = +1` are enumerated.
pub fn infty_q_norm(a: &Matrix, q: f64) -> Result<NormValue> {
    check_exponent(q)?;
    let n = a.ncols();
    if n > CUBE_VERTEX_MAX_COLS {
        return Err(Error::TooLarge {
            rows: n,
            max: CUBE_VERTEX_MAX_COLS,
        });
    }
    let mut best = (0u64, -1.0);
    for m in 0..1u64 << (n - 1) {
        let x: Vec<f64> = (0..n)
            .map(|j| if j > 0 && m >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        let v = lp_norm(&a.mul_vec(&x), q);
        if v > best.1 {
            best = (m, v);
        }
    }
    let witness = (0..n)
        .map(|j| if j > 0 && best.0 >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 })
        .collect();
    Ok(NormValue {
        value: best.1,
        exactness: Exactness::Exact,
        witness,
        witness_index: None,
    })
}

/// Exact `(p,q)`-norm when a closed form applies: `p = 1`, `q = ∞`,
/// `p = q = 2`, or `p = ∞` with at most 20 columns.
pub fn exact_pq_norm(a: &Matrix, p: f64, q: f64) -> Result<Option<NormValue>> {
    check_exponent(p)?;
    check_exponent(q)?;
    Ok(if p == 1.0 {
        Some(one_q_norm(a, q)?)
    } else if q.is_infinite() {
        Some(p_infty_norm(a, p)?)
    } else if p == 2.0 && q == 2.0 {
        Some(two_two_norm(a))
    } else if p.is_infinite() && a.ncols() <= CUBE_VERTEX_MAX_COLS {
        Some(infty_q_norm(a, q)?)
    } else {
        None
    })
}

pub(crate) const ASCENT_STEPS: usize = 50;

/// Cap on the monotone refinement that follows the ascent.
const REFINE_STEPS: usize = 10_000;

/// Relative gain a candidate needs before it replaces the incumbent. Keeps
/// rounding noise on exactly attained maxima from overtaking the exact probe.
const IMPROVEMENT: f64 = 1e-12;

/// Seeded lower bound on `‖A‖_(p,q)`.
///
/// Evaluates every basis vector `e_j` and `budget` Gaussian directions scaled
/// to the unit `l_p` sphere, then runs 50 steps of subgradient ascent on
/// `x ↦ ‖A x‖_q` from each, stepping along the subgradient with step
/// `1/√(t+1)` (relative to `‖x‖₂`) and rescaling back onto the sphere.
/// Rescaling is a valid retraction because the maximum of a convex function
/// over the ball lies on its boundary.
///
/// The best point is then refined by `x ← argmax_{‖z‖_p ≤ 1} ⟨Aᵀ s(x), z⟩`
/// (`s` a subgradient of `‖·‖_q` at `Ax`), which never decreases `‖Ax‖_q`,
/// until it stalls. At `p = q = 2` this is power iteration on `AᵀA`.
pub fn pq_norm_lower_bound(
    a: &Matrix,
    p: f64,
    q: f64,
    budget: usize,
    seed: u64,
) -> Result<NormValue> {
    check_exponent(p)?;
    check_exponent(q)?;
    let n = a.ncols();
    let mut rng = rng(seed);
    let mut starts: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for _ in 0..budget {
        let mut x = gaussian_vec(&mut rng, n);
        if normalize(&mut x, p).is_some() {
            starts.push(x);
        }
    }

    let eval = |x: &[f64]| lp_norm(&a.mul_vec(x), q);
    let mut best_x = starts[0].clone();
    let mut best = eval(&best_x);
    let consider = |x: &[f64], v: f64, best: &mut f64, best_x: &mut Vec<f64>| {
        if v > *best + IMPROVEMENT * best.max(f64::MIN_POSITIVE) {
            *best = v;
            best_x.clear();
            best_x.extend_from_slice(x);
        }
    };
    for mut x in starts {
        let v = eval(&x);
        consider(&x, v, &mut best, &mut best_x);
        for t in 0..ASCENT_STEPS {
            let s = norm_subgradient(&a.mul_vec(&x), q);
            let g = a.tr_mul_vec(&s);
            let gn = lp_norm(&g, 2.0);
            if gn == 0.0 {
                break;
            }
            let scale = lp_norm(&x, 2.0) / gn / ((t + 1) as f64).sqrt();
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += scale * gi;
            }
            if normalize(&mut x, p).is_none() {
                break;
            }
            let v = eval(&x);
            consider(&x, v, &mut best, &mut best_x);
        }
    }
    for _ in 0..REFINE_STEPS {
        let s = norm_subgradient(&a.mul_vec(&best_x), q);
        let Some(x) = ball_maximizer(&a.tr_mul_vec(&s), p) else {
            break;
        };
        let v = eval(&x);
        if v.is_nan() || v <= best * (1.0 + f64::EPSILON) {
            break;
        }
        best = v;
        best_x = x;
    }
    Ok(NormValue {
        value: best,
        exactness: Exactness::LowerBound,
        witness: best_x,
        witness_index: None,
    })
}

/// `argmax ⟨g, x⟩` over the unit `l_p` ball; `None` when `g = 0`.
fn ball_maximizer(g: &[f64], p: f64) -> Option<Vec<f64>> {
    if g.iter().all(|&v| v == 0.0) {
        return None;
    }
    let x = if p == 1.0 {
        let (j, _) = g
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
        let mut e = vec![0.0; g.len()];
        e[j] = sign(g[j]);
        e
    } else if p.is_infinite() {
        g.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect()
    } else {
        let pd = dual_exponent(p);
        let mut x: Vec<f64> = g.iter().map(|&v| sign(v) * v.abs().powf(pd - 1.0)).collect();
        normalize(&mut x, p)?;
        x
    };
    Some(x)
}
