// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic numeric kernels: dense matrices, softmax, seeded RNG
//! streams, and a finite-difference gradient checker.
//!
//! ## Design notes
//!
//! * Everything is built on [`Real`], a crate-wide scalar alias. The default
//!   build uses `f64`; the `f32` feature switches the scalar for speed
//!   experiments. All verification suites assume the 64-bit default.
//! * Every reduction in this module has a **fixed accumulation order**
//!   (left-to-right over the summation index), so results are reproducible
//!   for a given build regardless of thread count.
//! * There is no BLAS. The models this crate trains are a few megabytes and
//!   a hand-written register-friendly loop, auto-vectorized by the compiler,
//!   is fast enough while keeping the numerics fully auditable — the exact
//!   sum order matters when tests pin equalities at the 1e-9 level.

mod gradcheck;
mod matrix;
mod rng;

pub use gradcheck::{finite_diff_gradcheck, GradCheckReport};
pub use matrix::Matrix;
pub use rng::RngStream;

use crate::error::{Error, Result};

/// Crate-wide scalar type. `f64` unless the `f32` feature is enabled.
#[cfg(not(feature = "f32"))]
pub type Real = f64;

/// Crate-wide scalar type. `f64` unless the `f32` feature is enabled.
#[cfg(feature = "f32")]
pub type Real = f32;

/// Dot product with left-to-right accumulation.
#[must_use]
pub fn dot(a: &[Real], b: &[Real]) -> Real {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

/// Numerically stable softmax of a small slice (max-shifted exp-normalize).
///
/// Used for the two-way label readout and for test oracles. Returns an error
/// if the input is empty or contains non-finite values.
pub fn softmax_slice(xs: &[Real]) -> Result<Vec<Real>> {
    if xs.is_empty() {
        return Err(Error::numeric("softmax of an empty slice"));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("softmax input contains a non-finite value"));
    }
    let max = xs.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    let exps: Vec<Real> = xs.iter().map(|v| (v - max).exp()).collect();
    let total: Real = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Row-wise softmax over a score matrix, optionally restricted to the causal
/// (lower-triangular) band.
///
/// With `causal = true`, row `i` normalizes over columns `0..=i` and all
/// later columns are exactly zero — this is the attention-pattern case where
/// position `i` may only look at positions `j <= i`. With `causal = false`
/// every column participates.
///
/// Uses max-shifted exponentials so large scores cannot overflow. Rows of the
/// result sum to 1 over their allowed region.
///
/// # Errors
///
/// Returns [`Error::Numeric`] if any participating score is NaN or infinite:
/// a non-finite score upstream means the model state is already broken and
/// silently normalizing it would mask the bug.
pub fn masked_row_softmax(scores: &Matrix, causal: bool) -> Result<Matrix> {
    let (n, m) = scores.shape();
    if causal && n > m {
        return Err(Error::shape(format!(
            "causal softmax needs cols >= rows, got {n}x{m}"
        )));
    }
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let limit = if causal { i + 1 } else { m };
        let row = &scores.row(i)[..limit];
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite attention score in row {i}"
            )));
        }
        let max = row.iter().copied().fold(Real::NEG_INFINITY, Real::max);
        let out_row = out.row_mut(i);
        let mut total = 0.0;
        for j in 0..limit {
            let e = (row[j] - max).exp();
            out_row[j] = e;
            total += e;
        }
        for v in out_row[..limit].iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: textbook exp-normalize without max shifting,
    /// computed in plain loops. Safe for small test inputs.
    fn softmax_oracle(xs: &[Real]) -> Vec<Real> {
        let exps: Vec<Real> = xs.iter().map(|v| v.exp()).collect();
        let total: Real = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    #[test]
    fn softmax_two_equal_scores_is_half_half() {
        let m = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let s = masked_row_softmax(&m, false).unwrap();
        assert_eq!(s.get(0, 0), 0.5);
        assert_eq!(s.get(0, 1), 0.5);
    }

    #[test]
    fn softmax_causal_first_row_is_one_hot() {
        let m = Matrix::from_vec(3, 3, vec![5.0; 9]).unwrap();
        let s = masked_row_softmax(&m, true).unwrap();
        assert_eq!(s.row(0), &[1.0, 0.0, 0.0]);
        // Row 1 normalizes over two equal scores.
        assert_eq!(s.row(1), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn softmax_matches_exp_normalize_oracle() {
        let m = Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let s = masked_row_softmax(&m, false).unwrap();
        let oracle = softmax_oracle(&[1.0, 2.0, 3.0]);
        for (j, &want) in oracle.iter().enumerate() {
            assert!((s.get(0, j) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_nan() {
        let m = Matrix::from_vec(1, 2, vec![Real::NAN, 0.0]).unwrap();
        assert!(masked_row_softmax(&m, false).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant() {
        let mut rng = RngStream::from_seed(7);
        for _ in 0..20 {
            let n = 1 + rng.gen_range(6);
            let mut data = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                data.push(rng.normal() * 10.0);
            }
            let m = Matrix::from_vec(n, n, data.clone()).unwrap();
            let shifted =
                Matrix::from_vec(n, n, data.iter().map(|v| v + 123.456).collect()).unwrap();
            for causal in [false, true] {
                let a = masked_row_softmax(&m, causal).unwrap();
                let b = masked_row_softmax(&shifted, causal).unwrap();
                for i in 0..n {
                    let sum: Real = a.row(i).iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12, "row sum {sum}");
                    for j in 0..n {
                        assert!(
                            (a.get(i, j) - b.get(i, j)).abs() < 1e-12,
                            "softmax not shift invariant"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn softmax_slice_matches_oracle() {
        let xs = [0.3, -1.2, 4.0, 0.0];
        let got = softmax_slice(&xs).unwrap();
        let want = softmax_oracle(&xs);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(softmax_slice(&[]).is_err());
        assert!(softmax_slice(&[Real::INFINITY]).is_err());
    }
}
