use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rowsplit::counterexamples::theorem4_matrix;
use rowsplit::Matrix;

use crate::config::{EnsembleKind, EnsembleSpec};
use crate::CliError;

/// The `count` matrices of an ensemble, drawn in order from one seeded stream.
/// The theorem-4 kind is deterministic and repeats the same matrix.
pub fn generate(spec: &EnsembleSpec, q: f64) -> Result<Vec<Matrix>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|_| match spec.kind {
            EnsembleKind::Gaussian => Ok(gaussian(&mut rng, spec.rows, spec.cols)),
            EnsembleKind::OrthonormalColumns => orthonormal_columns(&mut rng, spec.rows, spec.cols),
            EnsembleKind::Sign => Ok(sign(&mut rng, spec.rows, spec.cols, q)),
            EnsembleKind::Theorem4 => Ok(theorem4_matrix(spec.rows / 2, q)?),
        })
        .collect()
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::new(rows, cols, data).expect("positive shape")
}

/// Thin `Q` of a Gaussian matrix, so `AᵀA = I`.
pub fn orthonormal_columns(rng: &mut impl Rng, rows: usize, cols: usize) -> Result<Matrix, CliError> {
    let g: DMatrix<f64> = gaussian(rng, rows, cols).to_dmatrix();
    let q = g.qr().q();
    Ok(Matrix::from_dmatrix(&q)?)
}

/// `±1` entries divided by `N^{1/q}`, so every column has unit `q`-norm.
pub fn sign(rng: &mut impl Rng, rows: usize, cols: usize, q: f64) -> Matrix {
    let scale = (rows as f64).powf(-1.0 / q);
    let data = (0..rows * cols)
        .map(|_| if rng.random::<bool>() { scale } else { -scale })
        .collect();
    Matrix::new(rows, cols, data).expect("positive shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rowsplit::norms::lp_norm;

    fn spec(kind: EnsembleKind, rows: usize, cols: usize) -> EnsembleSpec {
        EnsembleSpec {
            kind,
            rows,
            cols,
            count: 3,
            seed: 7,
        }
    }

    #[test]
    fn orthonormal_columns_are_orthonormal() {
        for a in generate(&spec(EnsembleKind::OrthonormalColumns, 12, 3), 2.0).unwrap() {
            assert_eq!((a.nrows(), a.ncols()), (12, 3));
            for i in 0..3 {
                for j in 0..3 {
                    let d: f64 = (0..12).map(|r| a.get(r, i) * a.get(r, j)).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sign_columns_have_unit_norm() {
        for q in [1.0, 2.0, 3.0] {
            for a in generate(&spec(EnsembleKind::Sign, 5, 4), q).unwrap() {
                for j in 0..4 {
                    assert!((lp_norm(&a.column(j), q) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn seeded_and_ordered() {
        let s = spec(EnsembleKind::Gaussian, 4, 2);
        let a = generate(&s, 2.0).unwrap();
        assert_eq!(a, generate(&s, 2.0).unwrap());
        assert_ne!(a[0], a[1]);
        let t = generate(&spec(EnsembleKind::Theorem4, 4, 0), 1.0).unwrap();
        assert_eq!((t[0].nrows(), t[0].ncols()), (4, 8));
    }
}
