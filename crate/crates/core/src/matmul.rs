//! Naive matrix multiplication, triple loop, accumulator semantics.
//!
//! `C[i][j] += sum_k A[i][k] * B[k][j]` in exact i-j-k loop order. Every
//! parallel strategy in the companion crate computes whole rows with this
//! same per-row arithmetic, so results are bit-identical across strategies.

/// Multiply an `m x n` matrix by an `n x p` matrix into an `m x p`
/// accumulator, all row-major.
pub fn matmul_seq(a: &[f32], b: &[f32], c: &mut [f32], m: usize, n: usize, p: usize) {
    assert_eq!(a.len(), m * n, "left operand has wrong size");
    assert_eq!(b.len(), n * p, "right operand has wrong size");
    assert_eq!(c.len(), m * p, "accumulator has wrong size");
    for i in 0..m {
        matmul_row(&a[i * n..(i + 1) * n], b, &mut c[i * p..(i + 1) * p], n, p);
    }
}

/// One accumulator row: `c_row[j] += sum_k a_row[k] * b[k][j]`.
///
/// Every execution strategy funnels through this function, which is what
/// makes their outputs bit-identical.
pub fn matmul_row(a_row: &[f32], b: &[f32], c_row: &mut [f32], n: usize, p: usize) {
    for j in 0..p {
        let mut acc = c_row[j];
        for k in 0..n {
            acc += a_row[k] * b[k * p + j];
        }
        c_row[j] = acc;
    }
}

/// Deterministic pseudo-random fill from the shared generator family.
pub fn fill_pseudo_random(buf: &mut [f32], seed: u32) {
    let mut gen = crate::blocked::GenState::with_seed(seed);
    for v in buf.iter_mut() {
        *v = gen.next_f32();
    }
}
