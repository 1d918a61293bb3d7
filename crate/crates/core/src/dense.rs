//! Dense square matrices and the verification oracle.
//!
//! [`lu_inplace_f32`] performs the element-wise non-pivoting Doolittle
//! factorization in the same elimination order as the blocked kernels. It is
//! an independent code path over the densified matrix, used to verify the
//! blocked drivers. A 64-bit variant exists for diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

/// Row-major square f32 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    side: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn from_data(side: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), side * side);
        Self { side, data }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.side..(i + 1) * self.side]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.side..(i + 1) * self.side]
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.side + j]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// A zero pivot hit by the dense factorization, at dense index `elem`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseZeroPivot {
    pub elem: usize,
}

impl fmt::Display for DenseZeroPivot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zero pivot at dense index {}", self.elem)
    }
}

impl core::error::Error for DenseZeroPivot {}

/// In-place non-pivoting Doolittle LU: L (unit lower, implicit diagonal) and
/// U share the storage.
pub fn lu_inplace_f32(m: &mut DenseMatrix) -> Result<(), DenseZeroPivot> {
    let n = m.side;
    let a = &mut m.data;
    for k in 0..n {
        let pivot = a[k * n + k];
        if pivot == 0.0 {
            return Err(DenseZeroPivot { elem: k });
        }
        for i in k + 1..n {
            a[i * n + k] /= pivot;
            let l_ik = a[i * n + k];
            for j in k + 1..n {
                a[i * n + j] -= l_ik * a[k * n + j];
            }
        }
    }
    Ok(())
}

/// 64-bit variant of the oracle for diagnostics; factors a promoted copy.
pub fn lu_f64(m: &DenseMatrix) -> Result<Vec<f64>, DenseZeroPivot> {
    let n = m.side;
    let mut a: Vec<f64> = m.data.iter().map(|&v| v as f64).collect();
    for k in 0..n {
        let pivot = a[k * n + k];
        if pivot == 0.0 {
            return Err(DenseZeroPivot { elem: k });
        }
        for i in k + 1..n {
            a[i * n + k] /= pivot;
            let l_ik = a[i * n + k];
            for j in k + 1..n {
                a[i * n + j] -= l_ik * a[k * n + j];
            }
        }
    }
    Ok(a)
}

/// Outcome of an element-wise comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareReport {
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Shapes of the two compared matrices differ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeMismatch {
    pub left: usize,
    pub right: usize,
}

impl fmt::Display for ShapeMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "shape mismatch: {} vs {}", self.left, self.right)
    }
}

impl core::error::Error for ShapeMismatch {}

const EPS_FLOOR: f64 = 1e-20;

fn abs64(x: f64) -> f64 {
    f64::from_bits(x.to_bits() & !(1u64 << 63))
}

/// Element-wise relative comparison of two equally-shaped buffers:
/// `|a - b| / max(|a|, |b|, 1e-20)`, passing iff the maximum stays within
/// `rel_tol`.
pub fn compare_slices(a: &[f32], b: &[f32], rel_tol: f64) -> Result<CompareReport, ShapeMismatch> {
    if a.len() != b.len() {
        return Err(ShapeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut max_rel = 0.0f64;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let (x, y) = (x as f64, y as f64);
        let denom = abs64(x).max(abs64(y)).max(EPS_FLOOR);
        let rel = abs64(x - y) / denom;
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(CompareReport {
        max_rel_error: max_rel,
        passed: max_rel <= rel_tol,
    })
}

/// [`compare_slices`] over square matrices, reporting side mismatches.
pub fn compare(a: &DenseMatrix, b: &DenseMatrix, rel_tol: f64) -> Result<CompareReport, ShapeMismatch> {
    if a.side != b.side {
        return Err(ShapeMismatch {
            left: a.side,
            right: b.side,
        });
    }
    compare_slices(&a.data, &b.data, rel_tol)
}
