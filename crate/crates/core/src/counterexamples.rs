//! Matrices on which no two-block partition lowers the `(1,q)`-norm.
//!
//! For `N = 2k` rows pick, from every complementary pair `{S, S^c}` of row
//! subsets, the larger member `B_j` (equal sizes: the lexicographically smaller
//! index list). That gives `n = 2^{2k-1}` subsets. Column `j` is
//! `|B_j|^{-1/q}` on `B_j` and zero elsewhere, so every column has unit
//! `q`-norm. Any partition has one block containing some `B_j` entirely, and
//! that block keeps the full norm.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::norms::{one_q_norm, Exactness};
use crate::verifiers::{Claim, VerificationReport};
use crate::{Error, Matrix, Partition, Result};

pub const MAX_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetFamily {
    pub k: usize,
    /// Bit `i` set means row `i` is in the subset. Ordered by decreasing size,
    /// then lexicographically by sorted index list.
    pub subsets: Vec<u64>,
}

fn indices(mask: u64) -> Vec<u32> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

impl SubsetFamily {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_K {
            return Err(Error::InvalidArgument(format!("k must be in 1..={MAX_K}, got {k}")));
        }
        let rows = 2 * k;
        let full = (1u64 << rows) - 1;
        let mut subsets = Vec::with_capacity(1 << (rows - 1));
        for s in 0..=full {
            let c = full ^ s;
            if s > c {
                continue; // each pair once
            }
            let pick = match s.count_ones().cmp(&c.count_ones()) {
                std::cmp::Ordering::Greater => s,
                std::cmp::Ordering::Less => c,
                std::cmp::Ordering::Equal => {
                    if indices(s) <= indices(c) {
                        s
                    } else {
                        c
                    }
                }
            };
            subsets.push(pick);
        }
        subsets.sort_by(|&a, &b| {
            b.count_ones()
                .cmp(&a.count_ones())
                .then_with(|| indices(a).cmp(&indices(b)))
        });
        Ok(SubsetFamily { k, subsets })
    }

    pub fn rows(&self) -> usize {
        2 * self.k
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn sizes(&self) -> Vec<u32> {
        self.subsets.iter().map(|s| s.count_ones()).collect()
    }

    /// Column whose subset is one of the blocks of `mask`'s partition.
    pub fn column_of(&self, mask: u64) -> Option<usize> {
        let full = (1u64 << self.rows()) - 1;
        self.subsets
            .iter()
            .position(|&s| s == mask || s == full ^ mask)
    }
}

pub fn theorem4_matrix(k: usize, q: f64) -> Result<Matrix> {
    crate::norms::check_exponent(q)?;
    let fam = SubsetFamily::new(k)?;
    Ok(family_matrix(&fam, q))
}

pub fn family_matrix(fam: &SubsetFamily, q: f64) -> Matrix {
    let rows = fam.rows();
    let cols = fam.len();
    let mut data = vec![0.0; rows * cols];
    for (j, &s) in fam.subsets.iter().enumerate() {
        let size = f64::from(s.count_ones());
        let v = if q == 1.0 { 1.0 / size } else { size.powf(-1.0 / q) };
        for i in indices(s) {
            data[i as usize * cols + j] = v;
        }
    }
    Matrix::new(rows, cols, data).expect("family matrix is well formed")
}

/// Exact `εᵠ` of the entrywise condition: `1 / min_j |B_j|`.
pub fn entry_eps_pow(fam: &SubsetFamily) -> Ratio<u64> {
    let min = fam.sizes().into_iter().min().expect("family is non-empty");
    Ratio::new(1, u64::from(min))
}

/// Checks every canonical partition of the `2k` rows.
///
/// Equality of norms is decided on `q`-th powers: block `Ω` has
/// `‖A(Ω)‖^q = max_j |Ω ∩ B_j| / |B_j|` as an exact rational, against
/// `‖A‖^q = 1`. The floating-point ratio is reported alongside.
pub fn verify_theorem4(k: usize, q: f64) -> Result<VerificationReport> {
    let fam = SubsetFamily::new(k)?;
    let a = family_matrix(&fam, q);
    let full = one_q_norm(&a, q)?.value;
    let rows = fam.rows();
    let one = Ratio::from_integer(1u64);
    let mut all_equal = true;
    let mut worst_float: f64 = 1.0;
    let mut witnesses = Vec::new();
    let mut missing_witness = 0u64;
    let count = 1u64 << (rows - 1);
    for m in 0..count {
        let mask = m << 1;
        let part = Partition::from_mask(rows, mask);
        let mut block_max = [Ratio::from_integer(0u64); 2];
        for (kb, bm) in block_max.iter_mut().enumerate() {
            let bmask = part.block(kb).iter().fold(0u64, |acc, &i| acc | 1 << i);
            for &s in &fam.subsets {
                let r = Ratio::new(u64::from((s & bmask).count_ones()), u64::from(s.count_ones()));
                if r > *bm {
                    *bm = r;
                }
            }
        }
        let exact_max = block_max[0].max(block_max[1]);
        all_equal &= exact_max == one;

        let mut float_max: f64 = 0.0;
        for kb in 0..2 {
            if !part.block(kb).is_empty() {
                let sub = a.submatrix(part.block(kb))?;
                float_max = float_max.max(one_q_norm(&sub, q)?.value / full);
            }
        }
        worst_float = worst_float.min(float_max);

        match fam.column_of(mask) {
            Some(j) => {
                let mut e = vec![0.0; a.ncols()];
                e[j] = 1.0;
                if witnesses.len() < 8 {
                    witnesses.push(e);
                }
            }
            None => missing_witness += 1,
        }
    }
    let mut details = BTreeMap::new();
    details.insert("partitions_checked".into(), count as f64);
    details.insert("full_norm".into(), full);
    details.insert("min_float_ratio".into(), worst_float);
    details.insert("partitions_without_witness_column".into(), missing_witness as f64);
    Ok(VerificationReport {
        claim: Claim::T4FullNorm,
        exactness: Exactness::Exact,
        achieved: if all_equal { 1.0 } else { worst_float },
        per_block: vec![],
        claimed: 1.0,
        tolerance: 0.0,
        pass: all_equal && missing_witness == 0,
        bound_applicable: true,
        falsifying: true,
        witnesses,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::entry_condition_eps;
    use approx::assert_relative_eq;

    #[test]
    fn k1_matrix() {
        for q in [1.0, 2.0, 3.5] {
            let a = theorem4_matrix(1, q).unwrap();
            let h = 2f64.powf(-1.0 / q);
            assert_eq!(a, Matrix::from_rows(&[[h, 1.0], [h, 0.0]]).unwrap());
        }
    }

    #[test]
    fn k2_family() {
        let fam = SubsetFamily::new(2).unwrap();
        assert_eq!(fam.sizes(), vec![4, 3, 3, 3, 3, 2, 2, 2]);
        assert_eq!(entry_eps_pow(&fam), Ratio::new(1, 2));
        // ε^q · log2(2n) = 1/2 · 4
        assert_eq!(entry_eps_pow(&fam) * Ratio::from_integer(4), Ratio::from_integer(2));
        let a = family_matrix(&fam, 1.0);
        assert_eq!((a.nrows(), a.ncols()), (4, 8));
        let e = entry_condition_eps(&a, 1.0).unwrap();
        assert_relative_eq!(e.eps_entry_min, 0.5, epsilon = 1e-15);
        for q in [1.0, 2.0, 3.0] {
            let e = entry_condition_eps(&theorem4_matrix(2, q).unwrap(), q).unwrap();
            assert_relative_eq!(e.eps_entry_min, 2f64.powf(-1.0 / q), epsilon = 1e-14);
        }
    }

    #[test]
    fn family_invariants() {
        for k in 1..=5 {
            let fam = SubsetFamily::new(k).unwrap();
            assert_eq!(fam.len(), 1 << (2 * k - 1));
            let full = (1u64 << (2 * k)) - 1;
            for s in 0..=full {
                let hits = fam.subsets.iter().filter(|&&b| b == s || b == full ^ s).count();
                assert_eq!(hits, 1);
            }
            assert!(fam.sizes().iter().all(|&c| c as usize >= k));
            let min = *fam.sizes().iter().min().unwrap() as usize;
            assert_eq!(min, if k == 1 { 1 } else { k });
        }
        assert!(SubsetFamily::new(0).is_err());
        assert!(SubsetFamily::new(7).is_err());
    }

    #[test]
    fn unit_columns() {
        for k in 1..=3 {
            for q in [1.0, 2.0, 2.5] {
                let a = theorem4_matrix(k, q).unwrap();
                assert_relative_eq!(one_q_norm(&a, q).unwrap().value, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn verify_small_k() {
        let r = verify_theorem4(1, 1.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.details["partitions_checked"], 2.0);
        let r = verify_theorem4(2, 2.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.details["partitions_checked"], 8.0);
        assert_eq!(r.details["partitions_without_witness_column"], 0.0);
    }
}
