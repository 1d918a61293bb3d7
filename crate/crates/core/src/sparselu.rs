//! Right-looking blocked LU factorization without pivoting.
//!
//! Four block kernels operate in place on `bs x bs` row-major blocks:
//!
//! - [`lu0`]: Doolittle factorization of a diagonal block (L unit lower with
//!   implicit diagonal, U upper, sharing storage).
//! - [`fwd`]: `col <- L^-1 * col` against a factored diagonal block.
//! - [`bdiv`]: `row <- row * U^-1` against a factored diagonal block.
//! - [`bmod`]: `inner <- inner - row * col`, in fixed i-j-k loop order so
//!   every driver produces bit-identical results.
//!
//! [`factorize_sequential`] runs the whole elimination in deterministic
//! ascending order and is the oracle the parallel drivers are checked
//! against. Zero pivots abort with the block step and element index; the
//! factorization must never silently emit non-finite values.

use core::fmt;

use crate::blocked::BlockedSparseMatrix;

/// Zero pivot inside one diagonal block, at block-local element `elem`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroPivot {
    pub elem: usize,
}

/// Factorization failure with its location.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LuError {
    /// Diagonal block at step `step` is singular at local element `elem`.
    SingularBlock { step: usize, elem: usize },
    /// Diagonal block `(step, step)` is not allocated.
    MissingDiagonal { step: usize },
}

impl fmt::Display for LuError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LuError::SingularBlock { step, elem } => write!(
                f,
                "singular diagonal block ({step}, {step}): zero pivot at element {elem}"
            ),
            LuError::MissingDiagonal { step } => {
                write!(f, "diagonal block ({step}, {step}) is not allocated")
            }
        }
    }
}

impl core::error::Error for LuError {}

/// Factor a diagonal block in place, Doolittle order.
pub fn lu0(diag: &mut [f32], bs: usize) -> Result<(), ZeroPivot> {
    debug_assert_eq!(diag.len(), bs * bs);
    for k in 0..bs {
        let pivot = diag[k * bs + k];
        if pivot == 0.0 {
            return Err(ZeroPivot { elem: k });
        }
        for i in k + 1..bs {
            diag[i * bs + k] /= pivot;
            let l_ik = diag[i * bs + k];
            for j in k + 1..bs {
                diag[i * bs + j] -= l_ik * diag[k * bs + j];
            }
        }
    }
    Ok(())
}

/// Forward-substitute `col <- L^-1 * col` using the unit lower triangle of a
/// factored diagonal block.
pub fn fwd(diag: &[f32], col: &mut [f32], bs: usize) {
    debug_assert_eq!(diag.len(), bs * bs);
    debug_assert_eq!(col.len(), bs * bs);
    for k in 0..bs {
        for i in k + 1..bs {
            let l_ik = diag[i * bs + k];
            for j in 0..bs {
                col[i * bs + j] -= l_ik * col[k * bs + j];
            }
        }
    }
}

/// Right-solve `row <- row * U^-1` against the upper triangle (including its
/// diagonal) of a factored diagonal block.
pub fn bdiv(diag: &[f32], row: &mut [f32], bs: usize) -> Result<(), ZeroPivot> {
    debug_assert_eq!(diag.len(), bs * bs);
    debug_assert_eq!(row.len(), bs * bs);
    for i in 0..bs {
        for k in 0..bs {
            let u_kk = diag[k * bs + k];
            if u_kk == 0.0 {
                return Err(ZeroPivot { elem: k });
            }
            row[i * bs + k] /= u_kk;
            let r_ik = row[i * bs + k];
            for j in k + 1..bs {
                row[i * bs + j] -= r_ik * diag[k * bs + j];
            }
        }
    }
    Ok(())
}

/// Schur update `inner <- inner - row * col`, exact i-j-k loop order.
pub fn bmod(row: &[f32], col: &[f32], inner: &mut [f32], bs: usize) {
    debug_assert_eq!(row.len(), bs * bs);
    debug_assert_eq!(col.len(), bs * bs);
    debug_assert_eq!(inner.len(), bs * bs);
    for i in 0..bs {
        for j in 0..bs {
            let mut acc = inner[i * bs + j];
            for k in 0..bs {
                acc -= row[i * bs + k] * col[k * bs + j];
            }
            inner[i * bs + j] = acc;
        }
    }
}

/// Sequential right-looking factorization, in place.
///
/// Per step `kk`: factor the diagonal block; forward-solve every allocated
/// `(kk, jj)`, `jj > kk`, ascending; right-solve every allocated `(ii, kk)`,
/// ascending; then update every `(ii, jj)` whose row and column blocks are
/// allocated, row-major, allocating fill-in zero-filled as needed.
pub fn factorize_sequential(m: &mut BlockedSparseMatrix) -> Result<(), LuError> {
    let nb = m.nb();
    let bs = m.bs();
    for kk in 0..nb {
        {
            let diag = m
                .block_mut(kk, kk)
                .ok_or(LuError::MissingDiagonal { step: kk })?;
            lu0(diag, bs).map_err(|e| LuError::SingularBlock {
                step: kk,
                elem: e.elem,
            })?;
        }
        for jj in kk + 1..nb {
            if m.is_allocated(kk, jj) {
                let (diag, col) = m.two_blocks_mut((kk, kk), (kk, jj));
                fwd(diag, col, bs);
            }
        }
        for ii in kk + 1..nb {
            if m.is_allocated(ii, kk) {
                let (diag, row) = m.two_blocks_mut((kk, kk), (ii, kk));
                bdiv(diag, row, bs).map_err(|e| LuError::SingularBlock {
                    step: kk,
                    elem: e.elem,
                })?;
            }
        }
        for ii in kk + 1..nb {
            if !m.is_allocated(ii, kk) {
                continue;
            }
            for jj in kk + 1..nb {
                if !m.is_allocated(kk, jj) {
                    continue;
                }
                m.alloc_zeroed(ii, jj);
                let (row, col, inner) = m.three_blocks_mut((ii, kk), (kk, jj), (ii, jj));
                bmod(row, col, inner, bs);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocked::structure_predicate;
    use crate::dense::{compare, lu_inplace_f32};
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn lu0_hand_example() {
        let mut d = vec![4.0f32, 2.0, 2.0, 3.0];
        lu0(&mut d, 2).unwrap();
        assert_eq!(d, [4.0, 2.0, 0.5, 2.0]);
    }

    #[test]
    fn lu0_identity_unchanged() {
        let mut d = vec![1.0f32, 0.0, 0.0, 1.0];
        lu0(&mut d, 2).unwrap();
        assert_eq!(d, [1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn lu0_zero_leading_pivot() {
        let mut d = vec![0.0f32, 1.0, 1.0, 1.0];
        assert_eq!(lu0(&mut d, 2), Err(ZeroPivot { elem: 0 }));
    }

    #[test]
    fn fwd_identity_leaves_column_unchanged() {
        let mut diag = vec![1.0f32, 0.0, 0.0, 1.0];
        lu0(&mut diag, 2).unwrap();
        let mut col = vec![5.0f32, -1.0, 2.0, 7.0];
        let orig = col.clone();
        fwd(&diag, &mut col, 2);
        assert_eq!(col, orig);
    }

    #[test]
    fn fwd_hand_example() {
        let diag = vec![4.0f32, 2.0, 0.5, 2.0]; // already factored, L = [[1,0],[0.5,1]]
        let mut col = vec![2.0f32, 0.0, 3.0, 1.0];
        fwd(&diag, &mut col, 2);
        assert_eq!(col, [2.0, 0.0, 2.0, 1.0]);
    }

    #[test]
    fn bdiv_hand_example() {
        let diag = vec![4.0f32, 2.0, 0.5, 2.0]; // U = [[4,2],[0,2]]
        let mut row = vec![4.0f32, 4.0, 8.0, 6.0];
        bdiv(&diag, &mut row, 2).unwrap();
        assert_eq!(row, [1.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn bmod_zero_row_is_a_no_op() {
        let row = vec![0.0f32; 4];
        let col = vec![1.0f32, 2.0, 3.0, 4.0];
        let mut inner = vec![9.0f32, 8.0, 7.0, 6.0];
        let orig = inner.clone();
        bmod(&row, &col, &mut inner, 2);
        assert_eq!(inner, orig);
    }

    #[test]
    fn bmod_identity_row_negates_column() {
        let row = vec![1.0f32, 0.0, 0.0, 1.0];
        let col = vec![1.0f32, 2.0, 3.0, 4.0];
        let mut inner = vec![0.0f32; 4];
        bmod(&row, &col, &mut inner, 2);
        assert_eq!(inner, [-1.0, -2.0, -3.0, -4.0]);
    }

    #[test]
    fn bmod_matches_dense_multiply_subtract() {
        let bs = 2;
        let mut gen = crate::blocked::GenState::with_seed(77);
        let row: Vec<f32> = (0..bs * bs).map(|_| gen.next_f32()).collect();
        let col: Vec<f32> = (0..bs * bs).map(|_| gen.next_f32()).collect();
        let mut inner: Vec<f32> = (0..bs * bs).map(|_| gen.next_f32()).collect();
        let mut expect = inner.clone();
        // same i-j-k order, written independently
        for i in 0..bs {
            for j in 0..bs {
                for k in 0..bs {
                    expect[i * bs + j] -= row[i * bs + k] * col[k * bs + j];
                }
            }
        }
        bmod(&row, &col, &mut inner, bs);
        assert_eq!(
            inner.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            expect.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn fwd_reconstructs_original_column() {
        // after fwd, L * col_new == col_old within f32 tolerance
        let bs = 4;
        let mut gen = crate::blocked::GenState::with_seed(5);
        let mut diag: Vec<f32> = (0..bs * bs).map(|_| gen.next_f32()).collect();
        // dominate the diagonal so the factorization is well conditioned
        for k in 0..bs {
            diag[k * bs + k] += 4.0;
        }
        let col_old: Vec<f32> = (0..bs * bs).map(|_| gen.next_f32()).collect();
        let mut col = col_old.clone();
        lu0(&mut diag, bs).unwrap();
        fwd(&diag, &mut col, bs);
        for i in 0..bs {
            for j in 0..bs {
                // L row i: implicit unit diagonal, strictly-lower entries from diag
                let mut acc = 0.0f64;
                for k in 0..i {
                    acc += diag[i * bs + k] as f64 * col[k * bs + j] as f64;
                }
                acc += col[i * bs + j] as f64;
                let want = col_old[i * bs + j] as f64;
                let denom = want.abs().max(acc.abs()).max(1e-20);
                assert!((acc - want).abs() / denom < 1e-5);
            }
        }
    }

    #[test]
    fn bdiv_reconstructs_original_row() {
        // after bdiv, row_new * U == row_old within f32 tolerance
        let bs = 4;
        let mut gen = crate::blocked::GenState::with_seed(9);
        let mut diag: Vec<f32> = (0..bs * bs).map(|_| gen.next_f32()).collect();
        for k in 0..bs {
            diag[k * bs + k] += 4.0;
        }
        let row_old: Vec<f32> = (0..bs * bs).map(|_| gen.next_f32()).collect();
        let mut row = row_old.clone();
        lu0(&mut diag, bs).unwrap();
        bdiv(&diag, &mut row, bs).unwrap();
        for i in 0..bs {
            for j in 0..bs {
                let mut acc = 0.0f64;
                for k in 0..=j {
                    acc += row[i * bs + k] as f64 * diag[k * bs + j] as f64;
                }
                let want = row_old[i * bs + j] as f64;
                let denom = want.abs().max(acc.abs()).max(1e-20);
                assert!((acc - want).abs() / denom < 1e-5);
            }
        }
    }

    #[test]
    fn single_block_factorization_reduces_to_lu0() {
        let mut m = BlockedSparseMatrix::generate(1, 4);
        let mut lone = m.block(0, 0).unwrap().to_vec();
        factorize_sequential(&mut m).unwrap();
        lu0(&mut lone, 4).unwrap();
        assert_eq!(m.block(0, 0).unwrap(), &lone[..]);
    }

    #[test]
    fn factorization_matches_dense_oracle() {
        let mut m = BlockedSparseMatrix::generate(5, 4);
        let mut oracle = m.to_dense();
        factorize_sequential(&mut m).unwrap();
        lu_inplace_f32(&mut oracle).unwrap();
        let report = compare(&m.to_dense(), &oracle, 1e-3).unwrap();
        assert!(report.passed, "max rel error {}", report.max_rel_error);
    }

    /// Symbolic propagation of the allocation set, independent of numerics.
    fn symbolic_fill(nb: usize) -> Vec<bool> {
        let mut alloc: Vec<bool> = (0..nb * nb)
            .map(|x| structure_predicate(x / nb, x % nb))
            .collect();
        for kk in 0..nb {
            for ii in kk + 1..nb {
                if !alloc[ii * nb + kk] {
                    continue;
                }
                for jj in kk + 1..nb {
                    if alloc[kk * nb + jj] {
                        alloc[ii * nb + jj] = true;
                    }
                }
            }
        }
        alloc
    }

    #[test]
    fn fill_in_matches_symbolic_simulation() {
        let nb = 5;
        let mut m = BlockedSparseMatrix::generate(nb, 2);
        let before: Vec<bool> = (0..nb * nb)
            .map(|x| m.is_allocated(x / nb, x % nb))
            .collect();
        factorize_sequential(&mut m).unwrap();
        let after: Vec<bool> = (0..nb * nb)
            .map(|x| m.is_allocated(x / nb, x % nb))
            .collect();
        // the allocation set only grows
        for (b, a) in before.iter().zip(after.iter()) {
            assert!(*a || !*b);
        }
        assert_eq!(after, symbolic_fill(nb));
    }

    #[test]
    fn generated_input_at_25x8_is_exactly_singular() {
        // property of the pinned generator: step 2's diagonal block becomes
        // exactly singular at its leading element
        let mut m = BlockedSparseMatrix::generate(25, 8);
        assert_eq!(
            factorize_sequential(&mut m),
            Err(LuError::SingularBlock { step: 2, elem: 0 })
        );
    }
}
