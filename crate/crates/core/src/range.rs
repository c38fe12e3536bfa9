//! Orthonormal coordinates on the image of `A`.
//!
//! For `A = U Σ Vᵀ` with numerical rank `r`, every image vector is `A x = U_r y`
//! with `y = Σ_r V_rᵀ x`. In `y` coordinates `‖A x‖₂ = ‖y‖₂`, the `q`-seminorm
//! `x ↦ ‖A x‖_q` becomes a norm on `ℝ^r`, and directions in the kernel of `A`
//! are quotiented out. Rank-deficient matrices need no special casing.

use nalgebra::DMatrix;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone)]
pub struct RangeBasis {
    /// `N × r`, orthonormal columns spanning the image of `A`.
    pub u: DMatrix<f64>,
    /// `n × r`, `V_r Σ_r⁻¹`: maps `y` back to an `x` with `A x = U_r y`.
    pub back: DMatrix<f64>,
}

impl RangeBasis {
    pub fn new(a: &Matrix) -> Result<Self> {
        let r = a.rank();
        if r == 0 {
            return Err(Error::ZeroMatrix);
        }
        let svd = a.to_dmatrix().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let vt = svd.v_t.as_ref().expect("requested Vᵀ");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let keep = &order[..r];
        let ur = DMatrix::from_fn(a.nrows(), r, |i, k| u[(i, keep[k])]);
        let back = DMatrix::from_fn(a.ncols(), r, |j, k| {
            vt[(keep[k], j)] / svd.singular_values[keep[k]]
        });
        Ok(RangeBasis { u: ur, back })
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    /// Row `i` of `U_r`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.u.row(i).iter().copied().collect()
    }

    /// `U_r y`, i.e. `A x` for the `x` represented by `y`.
    pub fn image(&self, y: &[f64]) -> Vec<f64> {
        (0..self.u.nrows())
            .map(|i| (0..y.len()).map(|k| self.u[(i, k)] * y[k]).sum())
            .collect()
    }

    /// `x = V_r Σ_r⁻¹ y`.
    pub fn preimage(&self, y: &[f64]) -> Vec<f64> {
        (0..self.back.nrows())
            .map(|j| (0..y.len()).map(|k| self.back[(j, k)] * y[k]).sum())
            .collect()
    }

    /// Gram matrix `U_r(ω)ᵀ U_r(ω)` of the rows in `rows`.
    pub fn gram(&self, rows: &[usize]) -> DMatrix<f64> {
        let r = self.rank();
        let mut g = DMatrix::zeros(r, r);
        for &i in rows {
            for a in 0..r {
                let ua = self.u[(i, a)];
                for b in 0..r {
                    g[(a, b)] += ua * self.u[(i, b)];
                }
            }
        }
        g
    }
}
