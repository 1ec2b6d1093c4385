// SPDX-License-Identifier: MIT OR Apache-2.0

//! A minimal row-major dense matrix.
//!
//! This is deliberately not a general tensor library: the whole workbench
//! runs on 2-D arrays of [`Real`], and the few shapes involved (residual
//! states, weight blocks, attention patterns) are easiest to audit when the
//! storage model is a single obvious `Vec`.

use crate::error::{Error, Result};
use crate::numerics::Real;

/// Dense row-major matrix of [`Real`].
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Real>,
}

impl Matrix {
    /// All-zero matrix of the given shape.
    #[must_use]
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a flat row-major buffer.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Real>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "buffer of {} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from a slice of equal-length rows.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if the rows have differing lengths or there
    /// are no rows.
    pub fn from_rows(rows: &[Vec<Real>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::shape("from_rows needs at least one row"));
        };
        let cols = first.len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Identity matrix of size `n`.
    #[must_use]
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Number of rows.
    #[must_use]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    #[must_use]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `(rows, cols)` pair.
    #[must_use]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Read one element (row-major, bounds-checked by the slice index).
    #[inline]
    #[must_use]
    pub fn get(&self, i: usize, j: usize) -> Real {
        self.data[i * self.cols + j]
    }

    /// Write one element.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Real) {
        self.data[i * self.cols + j] = v;
    }

    /// Borrow row `i` as a slice.
    #[inline]
    #[must_use]
    pub fn row(&self, i: usize) -> &[Real] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mutably borrow row `i`.
    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [Real] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// The whole backing buffer, row-major.
    #[must_use]
    pub fn data(&self) -> &[Real] {
        &self.data
    }

    /// Mutable access to the backing buffer, row-major.
    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    /// Copy `src` into row `i`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if `src` is not exactly one row wide.
    pub fn set_row(&mut self, i: usize, src: &[Real]) -> Result<()> {
        if src.len() != self.cols {
            return Err(Error::shape(format!(
                "set_row with {} values into width {}",
                src.len(),
                self.cols
            )));
        }
        self.row_mut(i).copy_from_slice(src);
        Ok(())
    }

    /// Matrix product `self * other`.
    ///
    /// The kernel iterates `i` (rows), then `k` (inner), then `j` (columns),
    /// accumulating into the output row. Two properties matter here:
    ///
    /// * each output element accumulates its `k` terms strictly left to
    ///   right, so the result is independent of everything but the operands;
    /// * the inner loop walks both the output row and a `other` row
    ///   contiguously, which the compiler turns into wide FMA loops.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] when the inner dimensions disagree.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a_ik) in a_row.iter().enumerate() {
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b_kj) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a_ik * b_kj;
                }
            }
        }
        Ok(out)
    }

    /// Transposed copy.
    #[must_use]
    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Element-wise map into a new matrix.
    #[must_use]
    pub fn map(&self, f: impl Fn(Real) -> Real) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise sum `self + other`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if the shapes differ.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    /// Element-wise difference `self - other`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if the shapes differ.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// In-place `self += other`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if the shapes differ.
    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        self.check_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    /// In-place `self += c * other`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if the shapes differ.
    pub fn add_scaled(&mut self, other: &Matrix, c: Real) -> Result<()> {
        self.check_same_shape(other, "add_scaled")?;
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
        Ok(())
    }

    /// In-place scalar multiply.
    pub fn scale(&mut self, c: Real) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// Squared Frobenius norm (left-to-right accumulation).
    #[must_use]
    pub fn frob_norm_sq(&self) -> Real {
        let mut acc = 0.0;
        for v in &self.data {
            acc += v * v;
        }
        acc
    }

    /// Largest absolute entry (0 for an empty matrix).
    #[must_use]
    pub fn max_abs(&self) -> Real {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every entry is finite.
    #[must_use]
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Solve the square system `self * x = rhs` by Gaussian elimination
    /// with partial pivoting.
    ///
    /// The few systems this workbench solves are small (tens of unknowns),
    /// dense, and latency-insensitive, so the classic direct method is the
    /// right amount of machinery.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Shape`] if the matrix is not square or `rhs` has
    /// the wrong length, and [`Error::Numeric`] if a pivot falls below
    /// `1e-12` times the largest absolute entry (the matrix is singular or
    /// too ill-conditioned to trust).
    pub fn solve(&self, rhs: &[Real]) -> Result<Vec<Real>> {
        let n = self.rows;
        if self.cols != n {
            return Err(Error::shape(format!(
                "solve needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if rhs.len() != n {
            return Err(Error::shape(format!(
                "solve of a {n}x{n} system with a length-{} right-hand side",
                rhs.len()
            )));
        }
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        let tol = 1e-12 * self.max_abs().max(1e-300);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .abs()
                        .total_cmp(&a[j * n + col].abs())
                })
                .unwrap_or(col);
            if a[pivot_row * n + col].abs() < tol {
                return Err(Error::numeric(format!(
                    "singular system: pivot {:.3e} in column {col}",
                    a[pivot_row * n + col]
                )));
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
                b.swap(col, pivot_row);
            }
            let pivot = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for col in (0..n).rev() {
            let mut acc = b[col];
            for k in col + 1..n {
                acc -= a[col * n + k] * x[k];
            }
            x[col] = acc / a[col * n + col];
        }
        Ok(x)
    }

    fn check_same_shape(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "{op} of {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    /// Independent oracle: the textbook three-loop product in i, j, k order
    /// (note: a *different* loop order than the production kernel).
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.normal()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_times_matrix_is_matrix() {
        let mut rng = RngStream::from_seed(1);
        let m = random_matrix(&mut rng, 2, 5);
        let id = Matrix::identity(2);
        let prod = id.matmul(&m).unwrap();
        assert_eq!(prod, m);
    }

    #[test]
    fn known_product_2x2_by_2x1() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let p = a.matmul(&b).unwrap();
        assert_eq!(p.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = RngStream::from_seed(42);
        let a = random_matrix(&mut rng, 5, 7);
        let b = random_matrix(&mut rng, 7, 3);
        let got = a.matmul(&b).unwrap();
        let want = matmul_oracle(&a, &b);
        for i in 0..5 {
            for j in 0..3 {
                assert!(
                    (got.get(i, j) - want.get(i, j)).abs() < 1e-12,
                    "mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_errors() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn matmul_associativity_within_tolerance() {
        let mut rng = RngStream::from_seed(7);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4, 6);
            let b = random_matrix(&mut rng, 6, 5);
            let c = random_matrix(&mut rng, 5, 3);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let diff = left.sub(&right).unwrap().max_abs();
            assert!(diff < 1e-9, "associativity violated by {diff}");
        }
    }

    #[test]
    fn transpose_roundtrip_and_shape() {
        let mut rng = RngStream::from_seed(3);
        let m = random_matrix(&mut rng, 3, 8);
        let t = m.transpose();
        assert_eq!(t.shape(), (8, 3));
        assert_eq!(t.transpose(), m);
        assert_eq!(m.get(1, 6), t.get(6, 1));
    }

    #[test]
    fn elementwise_ops_check_shapes() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(a.add(&b).is_err());
        assert!(a.sub(&b).is_err());
        assert!(a.clone().add_assign(&b).is_err());
        assert!(a.clone().add_scaled(&b, 2.0).is_err());
    }

    #[test]
    fn add_scaled_and_norms() {
        let mut a = Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let b = Matrix::from_vec(1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        a.add_scaled(&b, -2.0).unwrap();
        assert_eq!(a.data(), &[-1.0, 0.0, 1.0]);
        assert_eq!(a.frob_norm_sq(), 2.0);
        assert_eq!(a.max_abs(), 1.0);
        assert!(a.all_finite());
        a.set(0, 1, Real::NAN);
        assert!(!a.all_finite());
    }

    /// Not a correctness test: prints the kernel's throughput on shapes the
    /// forward/backward passes actually use. Run explicitly with
    /// `cargo test -- --ignored bench_matmul --nocapture`.
    #[test]
    #[ignore]
    fn bench_matmul_throughput() {
        let mut rng = RngStream::from_seed(9);
        for &(m, k, n, reps) in &[
            (40usize, 128usize, 128usize, 2000usize), // attention projections
            (40, 128, 512, 800),                      // MLP in
            (40, 512, 128, 800),                      // MLP out
            (128, 128, 128, 600),                     // square reference
        ] {
            let a = random_matrix(&mut rng, m, k);
            let b = random_matrix(&mut rng, k, n);
            let start = std::time::Instant::now();
            let mut sink = 0.0;
            for _ in 0..reps {
                sink += a.matmul(&b).unwrap().get(0, 0);
            }
            let secs = start.elapsed().as_secs_f64();
            let gflops = (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / secs / 1e9;
            println!("matmul {m}x{k}x{n}: {gflops:.2} GFLOP/s (sink {sink:.3e})");
        }
    }

    #[test]
    fn from_rows_rejects_ragged_input() {
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Matrix::from_rows(&[]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    /// Hand-solved 3x3 system:
    /// 2x + y − z = 8; −3x − y + 2z = −11; −2x + y + 2z = −3
    /// has the classic solution (2, 3, −1).
    #[test]
    fn solve_matches_hand_worked_system() {
        let a = Matrix::from_rows(&[
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ])
        .unwrap();
        let x = a.solve(&[8.0, -11.0, -3.0]).unwrap();
        for (got, want) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    /// Residual check on random well-conditioned systems: `A x` must
    /// reproduce `b`. This verifies the solver without re-deriving it.
    #[test]
    fn solve_residual_vanishes_on_random_systems() {
        let mut rng = RngStream::from_seed(31);
        for n in [1usize, 4, 13, 40] {
            let mut a = random_matrix(&mut rng, n, n);
            for i in 0..n {
                // Diagonal dominance keeps the test systems well-conditioned.
                a.set(i, i, a.get(i, i) + 3.0);
            }
            let b: Vec<Real> = (0..n).map(|_| rng.normal()).collect();
            let x = a.solve(&b).unwrap();
            for (i, &want) in b.iter().enumerate() {
                let acc: Real = (0..n).map(|k| a.get(i, k) * x[k]).sum();
                assert!((acc - want).abs() < 1e-9, "row {i}: {acc} vs {want}");
            }
        }
    }

    #[test]
    fn solve_rejects_singular_and_misshapen_systems() {
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(singular.solve(&[1.0, 1.0]).is_err());
        let rect = Matrix::zeros(2, 3);
        assert!(rect.solve(&[1.0, 1.0]).is_err());
        let square = Matrix::identity(3);
        assert!(square.solve(&[1.0, 1.0]).is_err());
        // Pivoting handles a zero in the leading position.
        let needs_pivot = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let x = needs_pivot.solve(&[5.0, 7.0]).unwrap();
        assert_eq!(x, vec![7.0, 5.0]);
    }
}
