//! Dense matrix primitives used by every other module.
//!
//! Design notes:
//! - Row-major `Vec<f64>` storage; `data[r * cols + c]` addresses entry (r, c).
//! - Every constructor and every operation that returns `Ok` guarantees all
//!   entries are finite. Overflow or NaN surfaces as [`Error::NonFinite`]
//!   instead of propagating silently.
//! - Shapes are validated eagerly; mismatches return [`Error::ShapeMismatch`]
//!   rather than panicking.
//! - Block splitting requires exact divisibility. We never zero-pad here;
//!   callers that need padding do it explicitly at their own boundary.
//! - Inversion is partial-pivot Gauss-Jordan, intended for small master-side
//!   systems (d×d or l×l at desk scale), not for large or ill-conditioned
//!   work.

pub mod io;

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative pivot tolerance for [`Matrix::invert`]: a pivot whose magnitude
/// falls below `tolerance × max|entry|` is treated as singular.
pub const PIVOT_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "new",
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{}", data.len()),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix construction",
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested row slices (test-friendly constructor).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("no rows given".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape(
                "from_rows",
                format!("{cols} entries per row"),
                "ragged rows".to_string(),
            ));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Matrix::new(rows.len(), cols, data)
    }

    /// Matrix with entries drawn i.i.d. from the standard normal distribution.
    pub fn random_standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Matrix { rows, cols, data }
    }

    /// Standard-normal matrix from a self-contained seed (row-major fill,
    /// so a taller draw with the same seed starts with the same rows).
    pub fn seeded_standard_normal(rows: usize, cols: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::random_standard_normal(rows, cols, &mut rng)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `(rows, cols)` pair, convenient for shape comparisons.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// Largest absolute entry (0 for the zero matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Sum of squared entries (the squared Frobenius norm).
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    /// Standard product `self · other`; inner dimensions must agree.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("left cols == right rows ({} == {})", self.cols, self.cols),
                format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        // i-k-j loop order keeps the inner traversal contiguous for both the
        // right operand and the output row.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let lhs_row = i * other.cols;
                let rhs_row = k * other.cols;
                for j in 0..other.cols {
                    out.data[lhs_row + j] += a * other.data[rhs_row + j];
                }
            }
        }
        out.ensure_finite("matmul")?;
        Ok(out)
    }

    /// Transpose.
    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Entry-wise sum; shapes must match.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    /// Entry-wise difference; shapes must match.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Scalar multiple.
    pub fn scale(&self, s: f64) -> Result<Matrix> {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out.ensure_finite("scale")?;
        Ok(out)
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f(*a, *b))
            .collect();
        let out = Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        };
        out.ensure_finite(op)?;
        Ok(out)
    }

    /// Inverse via Gauss-Jordan elimination with partial pivoting.
    ///
    /// Only square inputs are accepted. A pivot below
    /// [`PIVOT_RELATIVE_TOLERANCE`] relative to the largest input entry is
    /// reported as [`Error::Singular`] together with the failing column.
    pub fn invert(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::shape(
                "invert",
                "square matrix".to_string(),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        let n = self.rows;
        let tol = PIVOT_RELATIVE_TOLERANCE * self.max_abs().max(f64::MIN_POSITIVE);
        // Augmented system [A | I], reduced in place to [I | A^-1].
        let mut a = self.data.clone();
        let mut inv = Matrix::identity(n).data;

        for col in 0..n {
            // Partial pivot: largest magnitude entry on or below the diagonal.
            let mut pivot_row = col;
            let mut pivot_val = a[col * n + col].abs();
            for r in col + 1..n {
                let v = a[r * n + col].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val <= tol {
                return Err(Error::Singular {
                    column: col,
                    pivot: a[pivot_row * n + col],
                });
            }
            if pivot_row != col {
                for c in 0..n {
                    a.swap(col * n + c, pivot_row * n + c);
                    inv.swap(col * n + c, pivot_row * n + c);
                }
            }
            let pivot = a[col * n + col];
            for c in 0..n {
                a[col * n + c] /= pivot;
                inv[col * n + c] /= pivot;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor == 0.0 {
                    continue;
                }
                for c in 0..n {
                    a[r * n + c] -= factor * a[col * n + c];
                    inv[r * n + c] -= factor * inv[col * n + c];
                }
            }
        }
        let out = Matrix {
            rows: n,
            cols: n,
            data: inv,
        };
        out.ensure_finite("invert")?;
        Ok(out)
    }

    /// Splits into `h` equal row blocks; `h` must divide the row count.
    pub fn split_rows(&self, h: usize) -> Result<Vec<Matrix>> {
        if h == 0 || self.rows % h != 0 {
            return Err(Error::NotDivisible {
                dim: self.rows,
                parts: h,
            });
        }
        let block_rows = self.rows / h;
        let mut blocks = Vec::with_capacity(h);
        for b in 0..h {
            let start = b * block_rows * self.cols;
            let end = start + block_rows * self.cols;
            blocks.push(Matrix {
                rows: block_rows,
                cols: self.cols,
                data: self.data[start..end].to_vec(),
            });
        }
        Ok(blocks)
    }

    /// Splits into an `h×h` grid of equal blocks; `h` must divide both
    /// dimensions. `result[i][j]` is the block at block-row `i`, block-col `j`.
    pub fn split_grid(&self, h: usize) -> Result<Vec<Vec<Matrix>>> {
        if h == 0 || self.rows % h != 0 {
            return Err(Error::NotDivisible {
                dim: self.rows,
                parts: h,
            });
        }
        if self.cols % h != 0 {
            return Err(Error::NotDivisible {
                dim: self.cols,
                parts: h,
            });
        }
        let br = self.rows / h;
        let bc = self.cols / h;
        let mut grid = Vec::with_capacity(h);
        for bi in 0..h {
            let mut row = Vec::with_capacity(h);
            for bj in 0..h {
                let mut block = Matrix::zeros(br, bc);
                for r in 0..br {
                    let src = (bi * br + r) * self.cols + bj * bc;
                    let dst = r * bc;
                    block.data[dst..dst + bc].copy_from_slice(&self.data[src..src + bc]);
                }
                row.push(block);
            }
            grid.push(row);
        }
        Ok(grid)
    }

    /// Vertical concatenation; inverse of [`Matrix::split_rows`].
    pub fn stack_rows(blocks: &[Matrix]) -> Result<Matrix> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("no blocks to stack".into()))?;
        let cols = first.cols;
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(Error::shape(
                "stack_rows",
                format!("{cols} columns in every block"),
                "inconsistent widths".to_string(),
            ));
        }
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            data.extend_from_slice(&b.data);
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Reassembles a grid of blocks; inverse of [`Matrix::split_grid`].
    pub fn assemble_grid(grid: &[Vec<Matrix>]) -> Result<Matrix> {
        if grid.is_empty() || grid[0].is_empty() {
            return Err(Error::InvalidArgument("empty block grid".into()));
        }
        let (br, bc) = grid[0][0].shape();
        let grid_cols = grid[0].len();
        for row in grid {
            if row.len() != grid_cols || row.iter().any(|b| b.shape() != (br, bc)) {
                return Err(Error::shape(
                    "assemble_grid",
                    format!("uniform {br}x{bc} blocks"),
                    "inconsistent block shapes".to_string(),
                ));
            }
        }
        let rows = br * grid.len();
        let cols = bc * grid_cols;
        let mut out = Matrix::zeros(rows, cols);
        for (bi, row) in grid.iter().enumerate() {
            for (bj, block) in row.iter().enumerate() {
                for r in 0..br {
                    let dst = (bi * br + r) * cols + bj * bc;
                    let src = r * bc;
                    out.data[dst..dst + bc].copy_from_slice(&block.data[src..src + bc]);
                }
            }
        }
        Ok(out)
    }

    /// Maximum absolute deviation from symmetry, `max |a_ij - a_ji|`.
    /// Errors on non-square input.
    pub fn asymmetry(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::shape(
                "asymmetry",
                "square matrix".to_string(),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r + 1..self.cols {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        Ok(worst)
    }

    /// Symmetric part `(A + Aᵀ)/2`; errors on non-square input.
    pub fn symmetrized(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::shape(
                "symmetrized",
                "square matrix".to_string(),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = 0.5 * (self.get(r, c) + self.get(c, r));
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    fn ensure_finite(&self, context: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { context })
        }
    }
}

/// Relative Frobenius distance `‖a − b‖ / max(‖b‖, floor)`; the floor guards
/// against comparing against an exactly zero reference.
pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut num = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = x - y;
        num += d * d;
    }
    let den = b.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    num.sqrt() / den
}

/// Largest absolute entry-wise difference between two same-shaped matrices.
pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: textbook triple loop in (i, j, k) order, distinct
    /// from the (i, k, j) order used by `matmul`.
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

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::random_standard_normal(rows, cols, &mut rng)
    }

    #[test]
    fn matmul_known_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        let expected = Matrix::from_rows(&[vec![19.0, 22.0], vec![43.0, 50.0]]).unwrap();
        assert_eq!(c, expected);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        for (m, k, n, seed) in [(3, 4, 5, 1), (7, 2, 7, 2), (1, 6, 1, 3), (8, 8, 8, 4)] {
            let a = random_matrix(m, k, seed);
            let b = random_matrix(k, n, seed + 100);
            let got = a.matmul(&b).unwrap();
            let want = matmul_oracle(&a, &b);
            assert!(max_abs_diff(&got, &want) < 1e-13, "shape {m}x{k}x{n}");
        }
    }

    #[test]
    fn matmul_shape_mismatch_is_error() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        assert!(matches!(
            a.matmul(&b),
            Err(Error::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn transpose_swaps_indices() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let t = a.transpose();
        assert_eq!(t.shape(), (3, 2));
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(a.get(r, c), t.get(c, r));
            }
        }
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn invert_identity_and_diagonal() {
        let id = Matrix::identity(4);
        assert_eq!(id.invert().unwrap(), id);

        let d = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let inv = d.invert().unwrap();
        let expected = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.25]]).unwrap();
        assert_eq!(inv, expected);
    }

    #[test]
    fn invert_singular_reports_failing_column() {
        // Second row is 2x the first: rank 1, elimination fails at column 1.
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match s.invert() {
            Err(Error::Singular { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn invert_round_trip_well_conditioned() {
        for seed in 0..20u64 {
            let n = 6;
            // Random + n·I is strongly diagonally dominant in expectation,
            // keeping the condition number far below 1e6.
            let mut a = random_matrix(n, n, seed);
            for i in 0..n {
                a.set(i, i, a.get(i, i) + n as f64);
            }
            let inv = a.invert().unwrap();
            let prod = a.matmul(&inv).unwrap();
            let err = max_abs_diff(&prod, &Matrix::identity(n));
            assert!(err < 1e-8 * a.max_abs().max(1.0), "seed {seed}: err {err}");
        }
    }

    #[test]
    fn frobenius_sq_sums_squares() {
        let a = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.frobenius_sq(), 25.0);
    }

    #[test]
    fn split_rows_and_stack_round_trip() {
        let a = random_matrix(6, 4, 7);
        let blocks = a.split_rows(3).unwrap();
        assert_eq!(blocks.len(), 3);
        assert!(blocks.iter().all(|b| b.shape() == (2, 4)));
        let back = Matrix::stack_rows(&blocks).unwrap();
        assert_eq!(back, a); // bit-exact
        assert!(matches!(a.split_rows(4), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn split_grid_round_trip_and_divisibility() {
        let a = random_matrix(6, 6, 8);
        let grid = a.split_grid(2).unwrap();
        assert_eq!(grid.len(), 2);
        assert!(grid.iter().all(|row| row.len() == 2));
        let back = Matrix::assemble_grid(&grid).unwrap();
        assert_eq!(back, a); // bit-exact
        assert!(matches!(a.split_grid(4), Err(Error::NotDivisible { .. })));
        // Individual blocks match manual slicing.
        assert_eq!(grid[0][1].get(0, 0), a.get(0, 3));
        assert_eq!(grid[1][0].get(2, 1), a.get(5, 1));
    }

    #[test]
    fn non_finite_rejected_at_construction() {
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            Matrix::new(1, 1, vec![f64::INFINITY]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn asymmetry_and_symmetrized() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 3.0]]).unwrap();
        assert_eq!(a.asymmetry().unwrap(), 0.5);
        let s = a.symmetrized().unwrap();
        assert_eq!(s.asymmetry().unwrap(), 0.0);
        assert_eq!(s.get(0, 1), 2.25);
        assert_eq!(s.get(1, 0), 2.25);
    }

    proptest! {
        #[test]
        fn prop_split_merge_bit_exact(h in 1usize..5, br in 1usize..4, bc in 1usize..4, seed in 0u64..1000) {
            let a = random_matrix(h * br, h * bc, seed);
            let rows = a.split_rows(h).unwrap();
            prop_assert_eq!(&Matrix::stack_rows(&rows).unwrap(), &a);
            let grid = a.split_grid(h).unwrap();
            prop_assert_eq!(&Matrix::assemble_grid(&grid).unwrap(), &a);
        }

        #[test]
        fn prop_matmul_associative(seed in 0u64..500) {
            let a = random_matrix(8, 8, seed);
            let b = random_matrix(8, 8, seed.wrapping_add(7000));
            let c = random_matrix(8, 8, seed.wrapping_add(9000));
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            prop_assert!(rel_diff(&left, &right) < 1e-10);
        }

        #[test]
        fn prop_invert_round_trip(seed in 0u64..200) {
            let n = 5;
            let mut a = random_matrix(n, n, seed);
            for i in 0..n {
                a.set(i, i, a.get(i, i) + n as f64);
            }
            let inv = a.invert().unwrap();
            let err = max_abs_diff(&a.matmul(&inv).unwrap(), &Matrix::identity(n));
            prop_assert!(err < 1e-8 * a.max_abs().max(1.0));
        }
    }
}
