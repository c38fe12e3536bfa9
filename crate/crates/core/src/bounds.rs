//! Closed-form shrink factors for two-block partitions.
//!
//! Every function evaluates its formula even outside the region where the
//! guarantee is known to hold; [`Bound::applicable`] records whether the
//! hypotheses are met and [`Bound::useful`] whether the factor says anything
//! (is below 1, or below 1/2 for `ψ`).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub applicable: bool,
    pub useful: bool,
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(q))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")))
    }
}

/// `(t · ln(6q / t^{1/3}))^{1/3}` with `t = r εᵠ`; the real cube root keeps the
/// sign when the logarithm turns negative for very large `t`.
fn cube_root_term(q: f64, t: f64) -> f64 {
    if t == 0.0 {
        // εᵠ underflowed; the term tends to 0 with t
        return 0.0;
    }
    (t * (6.0 * q / t.cbrt()).ln()).cbrt()
}

fn pointwise_t(q: f64, rank: usize, eps: f64) -> Result<f64> {
    check_q(q)?;
    check_eps(eps)?;
    if rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    Ok(rank as f64 * eps.powf(q))
}

/// Pointwise shrink factor
/// `γ = 2^{-1/q} + ((2 + 3·2^{-1/q}) / q) · (t ln(6q / t^{1/3}))^{1/3}`, `t = r εᵠ`.
///
/// Applicable when `t ≤ 1`, i.e. `ε ≤ r^{-1/q}`.
pub fn gamma(q: f64, rank: usize, eps: f64) -> Result<Bound> {
    let t = pointwise_t(q, rank, eps)?;
    let h = 2f64.powf(-1.0 / q);
    let value = h + (2.0 + 3.0 * h) / q * cube_root_term(q, t);
    Ok(Bound {
        value,
        applicable: t <= 1.0,
        useful: value < 1.0,
    })
}

/// Two-sided deviation `ψ = 2^{q+1} (t ln(6q / t^{1/3}))^{1/3}`. Useful when `ψ < 1/2`.
pub fn psi(q: f64, rank: usize, eps: f64) -> Result<Bound> {
    let t = pointwise_t(q, rank, eps)?;
    let value = 2f64.powf(q + 1.0) * cube_root_term(q, t);
    Ok(Bound {
        value,
        applicable: t <= 1.0,
        useful: value < 0.5,
    })
}

/// `√N (1 + ln(n/N + 1))^{1/2}`, the sign-vector discrepancy budget.
///
/// The logarithm is natural; the base is not pinned down elsewhere, and the
/// natural one gives the larger (weaker) value for `n > N`.
pub fn theta(rows: usize, cols: usize) -> f64 {
    let (big_n, n) = (rows as f64, cols as f64);
    big_n.sqrt() * (1.0 + (n / big_n + 1.0).ln()).sqrt()
}

fn column_bound(q: f64, eps: f64, inner: f64) -> Bound {
    let value = inner.powf(1.0 / q);
    Bound {
        value,
        applicable: eps < 1.0,
        useful: value < 1.0,
    }
}

/// `(1/2 + (3/2) ε^{q/3} ln^{1/3}(4n))^{1/q}`.
pub fn bound_a(q: f64, cols: usize, eps: f64) -> Result<Bound> {
    check_q(q)?;
    check_eps(eps)?;
    let inner = 0.5 + 1.5 * eps.powf(q / 3.0) * (4.0 * cols as f64).ln().cbrt();
    Ok(column_bound(q, eps, inner))
}

/// `(1/2 + (1/2) εᵠ θ)^{1/q}` with `θ` from [`theta`].
pub fn bound_b(q: f64, rows: usize, cols: usize, eps: f64) -> Result<Bound> {
    check_q(q)?;
    check_eps(eps)?;
    let inner = 0.5 + 0.5 * eps.powf(q) * theta(rows, cols);
    Ok(column_bound(q, eps, inner))
}

/// `((1 + n εᵠ) / 2)^{1/q}`.
pub fn bound_c(q: f64, cols: usize, eps: f64) -> Result<Bound> {
    check_q(q)?;
    check_eps(eps)?;
    let inner = (1.0 + cols as f64 * eps.powf(q)) / 2.0;
    Ok(column_bound(q, eps, inner))
}

/// Every bound evaluated for one matrix.
///
/// `gamma`/`psi` use the row-condition `ε`, the three column bounds use the
/// entrywise `ε`; a bound is `None` when its `ε` is unavailable or zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub q: f64,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub eps_row: Option<f64>,
    pub eps_entry: Option<f64>,
    pub gamma: Option<Bound>,
    pub psi: Option<Bound>,
    pub bound_a: Option<Bound>,
    pub bound_b: Option<Bound>,
    pub bound_c: Option<Bound>,
    pub theta: f64,
}

impl BoundSet {
    pub fn evaluate(
        q: f64,
        rows: usize,
        cols: usize,
        rank: usize,
        eps_row: Option<f64>,
        eps_entry: Option<f64>,
    ) -> Result<Self> {
        check_q(q)?;
        let row = eps_row.filter(|&e| e > 0.0 && rank > 0);
        let entry = eps_entry.filter(|&e| e > 0.0);
        Ok(BoundSet {
            q,
            rows,
            cols,
            rank,
            eps_row,
            eps_entry,
            gamma: row.map(|e| gamma(q, rank, e)).transpose()?,
            psi: row.map(|e| psi(q, rank, e)).transpose()?,
            bound_a: entry.map(|e| bound_a(q, cols, e)).transpose()?,
            bound_b: entry.map(|e| bound_b(q, rows, cols, e)).transpose()?,
            bound_c: entry.map(|e| bound_c(q, cols, e)).transpose()?,
            theta: theta(rows, cols),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values below were evaluated with 40-digit arithmetic.

    #[test]
    fn gamma_values() {
        let g = gamma(1.0, 1, 1e-6).unwrap();
        assert_relative_eq!(g.value, 0.564_971_850_451_460_9, epsilon = 1e-12);
        assert!(g.applicable && g.useful);
        let g = gamma(2.0, 1, 1.0).unwrap();
        assert_relative_eq!(g.value, 3.498_213_249_912_925, epsilon = 1e-12);
        let closed = 0.5f64.sqrt() + (2.0 + 3.0 * 0.5f64.sqrt()) / 2.0 * 12f64.ln().cbrt();
        assert_relative_eq!(g.value, closed, epsilon = 1e-12);
        assert!(g.applicable && !g.useful);
        assert!(!gamma(2.0, 3, 0.9).unwrap().applicable);
    }

    #[test]
    fn psi_values() {
        assert_relative_eq!(psi(1.0, 1, 1e-6).unwrap().value, 0.074_253_543_373_098_15, epsilon = 1e-12);
        let p = psi(1.0, 1, 1.0).unwrap();
        assert_relative_eq!(p.value, 4.0 * 6f64.ln().cbrt(), epsilon = 1e-12);
        assert_relative_eq!(p.value, 4.858_324_966_378_778, epsilon = 1e-12);
        assert!(p.applicable && !p.useful);
    }

    #[test]
    fn theta_values() {
        for (big_n, want) in [(1, 1.301_209_891_047_537_8), (5, 2.909_593_769_377_39), (12, 4.507_523_285_210_998)] {
            assert_relative_eq!(theta(big_n, big_n), want, epsilon = 1e-12);
        }
        assert_relative_eq!(theta(4, 10), 3.001_841_413_862_743, epsilon = 1e-12);
    }

    #[test]
    fn column_bounds() {
        assert_relative_eq!(bound_c(1.0, 2, 0.1).unwrap().value, 0.6, epsilon = 1e-15);
        assert_relative_eq!(bound_a(2.0, 5, 0.3).unwrap().value, 1.212_037_815_188_955_4, epsilon = 1e-12);
        assert_relative_eq!(bound_b(2.0, 4, 5, 0.3).unwrap().value, 0.788_107_687_133_640_9, epsilon = 1e-12);
        assert_relative_eq!(bound_c(2.0, 5, 0.3).unwrap().value, 0.851_469_318_296_320_1, epsilon = 1e-12);
        let c = bound_c(1.0, 2, 1.0).unwrap();
        assert!(!c.applicable);
        assert_eq!(c.value, 1.5);
    }

    #[test]
    fn limits() {
        for q in [1.0, 2.0, 3.0] {
            assert!((bound_c(q, 4, 1e-12).unwrap().value - 0.5f64.powf(1.0 / q)).abs() < 1e-9);
            assert!(gamma(q, 2, 1e-300).unwrap().value - 2f64.powf(-1.0 / q) < 1e-20);
            assert!(psi(q, 2, 1e-300).unwrap().value < 1e-20);
        }
    }

    #[test]
    fn bound_c_useful_iff_small_mass() {
        for n in 1..8 {
            for k in 1..100 {
                let eps = k as f64 / 100.0;
                for q in [1.0, 1.5, 2.0] {
                    let b = bound_c(q, n, eps).unwrap();
                    assert_eq!(b.useful, (n as f64) * eps.powf(q) < 1.0, "n={n} eps={eps} q={q}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gamma(0.5, 1, 0.1).is_err());
        assert!(gamma(1.0, 0, 0.1).is_err());
        assert!(psi(1.0, 1, 0.0).is_err());
        assert!(bound_a(f64::INFINITY, 1, 0.1).is_err());
    }

    #[test]
    fn bound_set_uses_matching_eps() {
        let s = BoundSet::evaluate(2.0, 12, 2, 2, Some(0.5), Some(0.4)).unwrap();
        assert_eq!(s.gamma.unwrap(), gamma(2.0, 2, 0.5).unwrap());
        assert_eq!(s.bound_c.unwrap(), bound_c(2.0, 2, 0.4).unwrap());
        let s = BoundSet::evaluate(2.0, 12, 2, 2, None, Some(0.0)).unwrap();
        assert!(s.gamma.is_none() && s.bound_a.is_none());
    }
}
