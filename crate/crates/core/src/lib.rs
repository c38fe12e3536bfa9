//! Two-block row partitions of dense real matrices.
//!
//! Given an `N × n` matrix `A`, the crate computes the quantities that govern
//! how far the rows of `A` can be split into two groups `Ω₁ ∪ Ω₂ = {0..N}` so
//! that both submatrices `A(Ω₁)`, `A(Ω₂)` have small image norms:
//!
//! * [`norms`]: operator `(p,q)`-norms, exact where a closed form exists and a
//!   seeded lower-bound search otherwise.
//! * [`conditions`]: the smallest `ε` for the row condition
//!   `|(v_i, x)| ≤ ε ‖Ax‖_q` and the entrywise condition `|a_ij| ≤ ε ‖w_j‖_q`.
//! * [`bounds`]: closed-form shrink factors with their validity domains.
//! * [`partitioners`]: exhaustive, sign-discrepancy, balanced-column and random
//!   partitions.
//! * [`verifiers`]: check a concrete `(A, partition)` pair against a bound.
//! * [`counterexamples`]: the subset-family matrices on which no partition
//!   reduces the `(1,q)`-norm.
//!
//! Row indices are 0-based throughout; the canonical partition keeps row 0 in
//! the first block.

pub mod bounds;
pub mod conditions;
pub mod counterexamples;
mod error;
pub mod matrix;
pub mod norms;
pub mod partitioners;
pub mod range;
pub mod verifiers;

pub use error::{Error, Result};
pub use matrix::{Matrix, Partition};
pub use norms::{Exactness, NormValue};
