//! Smallest `ε` for the row condition and the entrywise condition.
//!
//! Row condition: `|(v_i, x)| ≤ ε (Σ_k |(v_k, x)|^q)^{1/q}` for all `x` and all
//! rows `i`. For a single row the least such `ε` is
//!
//! ```text
//! ε_i = sup_x |(v_i, x)| / ‖A x‖_q = 1 / min { ‖A x‖_q : (v_i, x) = 1 }.
//! ```
//!
//! The minimization is convex and runs in the orthonormal image coordinates of
//! [`RangeBasis`], so a rank-deficient `A` needs no extra handling. For `q = 2`
//! the answer is the leverage score `ε_i = ‖U_r e_i‖₂`; the solver is still run
//! and must agree with it to `1e-6`. For `q = 1` the objective is polyhedral and
//! the descent result is polished to an optimal vertex by pivoting over the
//! active rows. Other `q` give an uncertified numerical estimate.
//!
//! Entrywise condition: `|a_ij| ≤ ε ‖w_j‖_q`, so `ε_ij = |a_ij| / ‖w_j‖_q`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::norms::{check_finite_exponent, lp_norm, lp_power_sum, rng};
use crate::range::RangeBasis;
use crate::{Error, Matrix, Result};

const MAX_ITERATIONS: usize = 5000;
const REL_TOL: f64 = 1e-9;
const RESTARTS: usize = 10;
/// Allowed disagreement between the convex solver and the `q = 2` closed form.
pub const SOLVER_AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCondition {
    pub q: f64,
    /// `per_entry_eps[i][j] = |a_ij| / ‖w_j‖_q`.
    pub per_entry_eps: Vec<Vec<f64>>,
    pub eps_entry_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    /// Descent iterations summed over rows and restarts.
    pub iterations: usize,
    /// Largest relative objective change at termination over all rows.
    pub final_gap: f64,
    /// `max_i |solver_i − closed_form_i|`, only for `q = 2`.
    pub closed_form_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCondition {
    pub q: f64,
    pub per_row_eps: Vec<f64>,
    pub eps_row_min: f64,
    /// Raw convex-solver values; equal to `per_row_eps` except at `q = 2`,
    /// where `per_row_eps` holds the closed form.
    pub solver_eps: Vec<f64>,
    /// `true` for `q ∈ {1, 2}`, where the value is exact up to rounding.
    pub certified: bool,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub q: f64,
    pub row: Option<RowCondition>,
    pub entry: Option<EntryCondition>,
    /// Why a part is missing.
    pub errors: Vec<String>,
}

pub fn entry_condition_eps(a: &Matrix, q: f64) -> Result<EntryCondition> {
    check_finite_exponent(q)?;
    let col_norms: Vec<f64> = (0..a.ncols())
        .map(|j| lp_norm(&a.column(j), q))
        .collect();
    if let Some(j) = col_norms.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let per_entry_eps: Vec<Vec<f64>> = a
        .rows_iter()
        .map(|r| r.iter().zip(&col_norms).map(|(v, c)| v.abs() / c).collect())
        .collect();
    let eps_entry_min = per_entry_eps.iter().flatten().fold(0.0_f64, |m, &v| m.max(v));
    Ok(EntryCondition {
        q,
        per_entry_eps,
        eps_entry_min,
    })
}

/// Minimal `ε` of the row condition for row `i0`.
pub fn row_condition_eps(a: &Matrix, q: f64, i0: usize) -> Result<f64> {
    check_finite_exponent(q)?;
    if i0 >= a.nrows() {
        return Err(Error::IndexOutOfRange {
            index: i0,
            len: a.nrows(),
        });
    }
    if a.row(i0).iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let basis = RangeBasis::new(a)?;
    let solve = solve_row(&basis, q, i0);
    if q == 2.0 {
        let closed = leverage_eps(&basis, i0);
        check_agreement(i0, solve.eps, closed)?;
        return Ok(closed);
    }
    Ok(solve.eps)
}

fn check_agreement(row: usize, solver: f64, closed_form: f64) -> Result<()> {
    if (solver - closed_form).abs() > SOLVER_AGREEMENT {
        return Err(Error::SolverDisagreement {
            row,
            solver,
            closed_form,
        });
    }
    Ok(())
}

/// Row condition for every row.
pub fn full_row_report(a: &Matrix, q: f64) -> Result<RowCondition> {
    check_finite_exponent(q)?;
    let basis = RangeBasis::new(a)?;
    let solves: Vec<RowSolve> = (0..a.nrows())
        .into_par_iter()
        .map(|i| {
            if a.row(i).iter().all(|&v| v == 0.0) {
                RowSolve::zero()
            } else {
                solve_row(&basis, q, i)
            }
        })
        .collect();
    let solver_eps: Vec<f64> = solves.iter().map(|s| s.eps).collect();
    let mut closed_form_gap = None;
    let per_row_eps = if q == 2.0 {
        let closed: Vec<f64> = (0..a.nrows())
            .map(|i| {
                if a.row(i).iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    leverage_eps(&basis, i)
                }
            })
            .collect();
        let mut gap = 0.0_f64;
        for (i, (&s, &c)) in solver_eps.iter().zip(&closed).enumerate() {
            check_agreement(i, s, c)?;
            gap = gap.max((s - c).abs());
        }
        closed_form_gap = Some(gap);
        closed
    } else {
        solver_eps.clone()
    };
    let eps_row_min = per_row_eps.iter().fold(0.0_f64, |m, &v| m.max(v));
    Ok(RowCondition {
        q,
        eps_row_min,
        per_row_eps,
        solver_eps,
        certified: q == 1.0 || q == 2.0,
        diagnostics: SolverDiagnostics {
            iterations: solves.iter().map(|s| s.iterations).sum(),
            final_gap: solves.iter().fold(0.0_f64, |m, s| m.max(s.rel_change)),
            closed_form_gap,
        },
    })
}

/// Row and entrywise parts together; a failing part is recorded, not raised.
pub fn condition_report(a: &Matrix, q: f64) -> Result<ConditionReport> {
    check_finite_exponent(q)?;
    let mut errors = Vec::new();
    let row = full_row_report(a, q)
        .map_err(|e| errors.push(format!("row condition: {e}")))
        .ok();
    let entry = entry_condition_eps(a, q)
        .map_err(|e| errors.push(format!("entry condition: {e}")))
        .ok();
    Ok(ConditionReport {
        q,
        row,
        entry,
        errors,
    })
}

/// Leverage score form of the `q = 2` row condition.
pub fn leverage_eps(basis: &RangeBasis, i0: usize) -> f64 {
    lp_norm(&basis.row(i0), 2.0)
}

#[derive(Debug, Clone, Copy)]
struct RowSolve {
    eps: f64,
    iterations: usize,
    rel_change: f64,
}

impl RowSolve {
    fn zero() -> Self {
        RowSolve {
            eps: 0.0,
            iterations: 0,
            rel_change: 0.0,
        }
    }
}

/// The affine problem `min_t Σ_i |c_i + (d_i, t)|^q` for one row, where
/// `c + D t` sweeps the image vectors `A x` with `(v_{i0}, x) = 1`.
struct AffineProblem {
    q: f64,
    c: Vec<f64>,
    /// `N × m` row-major, `m = r − 1`.
    d: Vec<f64>,
    m: usize,
}

impl AffineProblem {
    fn new(basis: &RangeBasis, q: f64, i0: usize) -> Self {
        let u = basis.row(i0);
        let r = u.len();
        let uu: f64 = u.iter().map(|v| v * v).sum();
        let y0: Vec<f64> = u.iter().map(|v| v / uu).collect();
        let z = complement_basis(&u);
        let c = basis.image(&y0);
        let big_n = basis.nrows();
        let m = r - 1;
        let mut d = vec![0.0; big_n * m];
        for k in 0..m {
            let col = basis.image(z.column(k).as_slice());
            for i in 0..big_n {
                d[i * m + k] = col[i];
            }
        }
        AffineProblem { q, c, d, m }
    }

    fn residuals(&self, t: &[f64]) -> Vec<f64> {
        self.c
            .iter()
            .enumerate()
            .map(|(i, &ci)| {
                ci + self.d[i * self.m..(i + 1) * self.m]
                    .iter()
                    .zip(t)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    fn phi(&self, t: &[f64]) -> f64 {
        lp_power_sum(self.residuals(t), self.q)
    }

    /// Gradient of `Σ|b_i|^q` (a subgradient with `sign(0) = 0` when `q = 1`).
    fn grad(&self, t: &[f64]) -> Vec<f64> {
        let b = self.residuals(t);
        let mut g = vec![0.0; self.m];
        for (i, &bi) in b.iter().enumerate() {
            let w = if bi == 0.0 {
                0.0
            } else if self.q == 1.0 {
                bi.signum()
            } else {
                self.q * bi.signum() * bi.abs().powf(self.q - 1.0)
            };
            if w != 0.0 {
                for (gk, dk) in g.iter_mut().zip(&self.d[i * self.m..(i + 1) * self.m]) {
                    *gk += w * dk;
                }
            }
        }
        g
    }

    /// Descent with Armijo backtracking from `t`; returns (t, φ, iterations, last relative change).
    fn descend(&self, mut t: Vec<f64>) -> (Vec<f64>, f64, usize, f64) {
        let mut f = self.phi(&t);
        let mut step = 1.0;
        let mut rel = f64::INFINITY;
        let mut it = 0;
        while it < MAX_ITERATIONS {
            it += 1;
            let g = self.grad(&t);
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg == 0.0 {
                rel = 0.0;
                break;
            }
            let mut accepted = None;
            while step > 1e-18 {
                let cand: Vec<f64> = t.iter().zip(&g).map(|(a, b)| a - step * b).collect();
                let fc = self.phi(&cand);
                if fc <= f - 1e-4 * step * gg {
                    accepted = Some((cand, fc));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, fc)) = accepted else {
                rel = 0.0;
                break;
            };
            rel = (f - fc) / f.max(f64::MIN_POSITIVE);
            t = cand;
            f = fc;
            step *= 2.0;
            if rel < REL_TOL {
                break;
            }
        }
        (t, f, it, rel)
    }

    /// Vertex pivoting for `q = 1`: starting from the `m` smallest residuals at
    /// `t`, swap one active row at a time while the objective improves.
    fn polish_vertex(&self, t: &[f64]) -> Option<(Vec<f64>, f64)> {
        let m = self.m;
        if m == 0 {
            return None;
        }
        let b = self.residuals(t);
        let mut order: Vec<usize> = (0..b.len()).collect();
        order.sort_by(|&i, &j| b[i].abs().total_cmp(&b[j].abs()));
        let mut active: Vec<usize> = Vec::with_capacity(m);
        for &i in &order {
            active.push(i);
            if !self.independent(&active) {
                active.pop();
            }
            if active.len() == m {
                break;
            }
        }
        let mut best_t = self.solve_active(&active)?;
        let mut best = self.phi(&best_t);
        let big_n = self.c.len();
        loop {
            let mut improved = false;
            'swap: for s in 0..m {
                for i in 0..big_n {
                    if active.contains(&i) {
                        continue;
                    }
                    let mut trial = active.clone();
                    trial[s] = i;
                    if let Some(tt) = self.solve_active(&trial) {
                        let f = self.phi(&tt);
                        if f < best * (1.0 - 1e-14) {
                            best = f;
                            best_t = tt;
                            active = trial;
                            improved = true;
                            break 'swap;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        Some((best_t, best))
    }

    fn independent(&self, rows: &[usize]) -> bool {
        let k = rows.len();
        let dm = DMatrix::from_fn(k, self.m, |a, b| self.d[rows[a] * self.m + b]);
        dm.rank(1e-10) == k
    }

    /// `t` zeroing the residuals on `rows` (exactly `m` of them).
    fn solve_active(&self, rows: &[usize]) -> Option<Vec<f64>> {
        if rows.len() != self.m {
            return None;
        }
        let dm = DMatrix::from_fn(self.m, self.m, |a, b| self.d[rows[a] * self.m + b]);
        let rhs = DVector::from_iterator(self.m, rows.iter().map(|&i| -self.c[i]));
        let lu = dm.lu();
        let sol = lu.solve(&rhs)?;
        sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
    }
}

/// Orthonormal basis (as columns) of the complement of `u` in `ℝ^r`, from a
/// Householder reflection taking `u/‖u‖` to `e₁`.
fn complement_basis(u: &[f64]) -> DMatrix<f64> {
    let r = u.len();
    let nrm = lp_norm(u, 2.0);
    let mut v: Vec<f64> = u.iter().map(|x| x / nrm).collect();
    v[0] -= 1.0;
    let vn = lp_norm(&v, 2.0);
    let mut h = DMatrix::<f64>::identity(r, r);
    if vn > 1e-14 {
        for a in 0..r {
            for b in 0..r {
                h[(a, b)] -= 2.0 * v[a] * v[b] / (vn * vn);
            }
        }
    }
    h.columns(1, r - 1).into_owned()
}

fn solve_row(basis: &RangeBasis, q: f64, i0: usize) -> RowSolve {
    let prob = AffineProblem::new(basis, q, i0);
    if prob.m == 0 {
        return RowSolve {
            eps: 1.0 / prob.phi(&[]).powf(1.0 / q),
            iterations: 0,
            rel_change: 0.0,
        };
    }
    let scale = lp_norm(&prob.c, 2.0);
    let mut rng = rng(0x5eed_0000 ^ i0 as u64);
    let mut best = f64::INFINITY;
    let mut best_t = vec![0.0; prob.m];
    let mut iterations = 0;
    let mut rel_change = 0.0_f64;
    for restart in 0..RESTARTS {
        let start = if restart == 0 {
            vec![0.0; prob.m]
        } else {
            (0..prob.m)
                .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
                .collect()
        };
        let (t, f, it, rel) = prob.descend(start);
        iterations += it;
        if f < best {
            best = f;
            best_t = t;
            rel_change = rel;
        }
    }
    if q == 1.0 {
        if let Some((_, f)) = prob.polish_vertex(&best_t) {
            if f < best {
                best = f;
                rel_change = 0.0;
            }
        }
    }
    RowSolve {
        eps: 1.0 / best.powf(1.0 / q),
        iterations,
        rel_change,
    }
}
