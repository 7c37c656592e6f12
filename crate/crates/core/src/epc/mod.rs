//! Polynomial coding of block-partitioned matrix products.
//!
//! The scheme assigns every worker one evaluation point `x_w`. Matrix
//! operands are split into equal blocks and combined into block-coefficient
//! polynomials; a worker multiplies the evaluations it holds, and the master
//! recovers the wanted product blocks as specific coefficients of the
//! product polynomial, interpolated from any large-enough response subset.
//!
//! Three specialized encodings drive the factorization protocol (`h` is the
//! partition count):
//!
//! - [`encode_grid`]: an `h×h`-partitioned symmetric matrix `D`, block
//!   `(j,i)` weighted by `x^(j+ih)`. A worker multiplies the *transpose* of
//!   this evaluation against a right-encoded operand; the products of `D`
//!   with a tall matrix then sit at exponents `h−1+ih`, recoverable from any
//!   `h²+h−1` responses.
//! - [`encode_left`]: row blocks weighted by ascending powers `x^j`.
//! - [`encode_right`]: row blocks weighted by descending powers `x^(h−1−j)`.
//!   `leftᵀ·right` places the block inner product at exponent `h−1`,
//!   recoverable from any `2h−1` responses; `right` alone is an MDS code on
//!   the blocks, recoverable from any `h`.
//!
//! [`encode_pair`] is the general `(p, q, r)` form used by the one-shot
//! pre/post products; its recovery threshold is `pqr + r − 1`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use std::io::{Read, Write};

/// Absolute tolerance on `max|D_ij − D_ji|` below which [`encode_grid`]
/// silently symmetrizes, scaled by `max(1, max|entry|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Absolute residual tolerance for surplus shards during [`interpolate`].
pub const DECODE_RESIDUAL_TOLERANCE: f64 = 1e-6;

/// One evaluation point per worker.
///
/// Points must be pairwise distinct and finite; keep their magnitude O(1)
/// or interpolation conditioning suffers at higher degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoints {
    points: Vec<f64>,
}

impl EvalPoints {
    /// Validates an explicit point set.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("need at least one evaluation point".into()));
        }
        if !points.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "evaluation points",
            });
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(Error::DuplicatePoint { point: points[i] });
                }
            }
        }
        Ok(EvalPoints { points })
    }

    /// Chebyshev nodes `x_w = cos((2w−1)π / 2W)`, `w = 1..=W`: distinct,
    /// inside `(−1, 1)`, and well conditioned for interpolation.
    pub fn chebyshev(w: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        let points = (1..=w)
            .map(|i| ((2 * i - 1) as f64 * std::f64::consts::PI / (2 * w) as f64).cos())
            .collect();
        EvalPoints::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point assigned to worker `w` (0-based).
    pub fn get(&self, w: usize) -> f64 {
        self.points[w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }
}

/// One worker's response: its identity, its evaluation point, and the
/// matrix it computed there.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedShard {
    pub worker_id: usize,
    pub point: f64,
    pub payload: Matrix,
}

/// Partition parameters of the general product code: the left operand is
/// split `r×p`, the right operand `r×q`, with `r` the contracted dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpcParams {
    pub p: usize,
    pub q: usize,
    pub r: usize,
}

impl EpcParams {
    pub fn new(p: usize, q: usize, r: usize) -> Result<Self> {
        if p == 0 || q == 0 || r == 0 {
            return Err(Error::InvalidArgument(format!(
                "partition parameters must be positive, got p={p} q={q} r={r}"
            )));
        }
        Ok(EpcParams { p, q, r })
    }

    /// Number of responses that always suffices to decode: `pqr + r − 1`.
    pub fn threshold(&self) -> usize {
        self.p * self.q * self.r + self.r - 1
    }

    /// Degree of the product polynomial: one less than the threshold.
    pub fn product_degree(&self) -> usize {
        self.threshold() - 1
    }
}

/// A matrix-coefficient polynomial, the result of [`interpolate`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPoly {
    degree: usize,
    /// `(exponent, coefficient)` pairs with distinct exponents `0..=degree`.
    coeffs: Vec<(usize, Matrix)>,
    block_shape: (usize, usize),
}

impl BlockPoly {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.block_shape
    }

    /// Coefficient at `exponent`, if stored.
    pub fn coeff(&self, exponent: usize) -> Option<&Matrix> {
        self.coeffs
            .iter()
            .find(|(e, _)| *e == exponent)
            .map(|(_, m)| m)
    }

    pub fn coeffs(&self) -> &[(usize, Matrix)] {
        &self.coeffs
    }

    /// Evaluates the polynomial at `x` (Horner over the dense coefficient
    /// list; exponents are always contiguous `0..=degree` here).
    pub fn evaluate(&self, x: f64) -> Result<Matrix> {
        let mut acc = Matrix::zeros(self.block_shape.0, self.block_shape.1);
        for e in (0..=self.degree).rev() {
            acc = acc.scale(x)?;
            if let Some(c) = self.coeff(e) {
                acc = acc.add(c)?;
            }
        }
        Ok(acc)
    }
}

/// Accumulates `acc += block * weight` without allocating.
fn axpy(acc: &mut Matrix, block: &Matrix, weight: f64) {
    debug_assert_eq!(acc.shape(), block.shape());
    for r in 0..acc.rows() {
        for c in 0..acc.cols() {
            acc.set(r, c, acc.get(r, c) + weight * block.get(r, c));
        }
    }
}

/// Encodes a symmetric `l×l` matrix partitioned into an `h×h` block grid:
/// `Σ_{j,i} D_{j,i} x^(j + i·h)` (block `(j,i)` = block-row `j`, block-col `i`).
///
/// Asymmetry up to [`SYMMETRY_TOLERANCE`] (relative to the largest entry) is
/// repaired by replacing `D` with `(D + Dᵀ)/2`; anything larger is an error,
/// because the decode identity genuinely requires symmetry.
pub fn encode_grid(d: &Matrix, h: usize, x: f64) -> Result<Matrix> {
    if d.rows() != d.cols() {
        return Err(Error::shape(
            "encode_grid",
            "square matrix".to_string(),
            format!("{}x{}", d.rows(), d.cols()),
        ));
    }
    let tol = SYMMETRY_TOLERANCE * d.max_abs().max(1.0);
    let asym = d.asymmetry()?;
    if asym > tol {
        return Err(Error::NotSymmetric {
            max_deviation: asym,
            tolerance: tol,
        });
    }
    let sym;
    let d = if asym > 0.0 {
        sym = d.symmetrized()?;
        &sym
    } else {
        d
    };
    let grid = d.split_grid(h)?;
    let block = d.rows() / h;
    let mut out = Matrix::zeros(block, block);
    for (j, row) in grid.iter().enumerate() {
        for (i, b) in row.iter().enumerate() {
            axpy(&mut out, b, x.powi((j + i * h) as i32));
        }
    }
    Ok(out)
}

/// Encodes row blocks with ascending powers: `Σ_j C_j x^j`.
pub fn encode_left(c: &Matrix, h: usize, x: f64) -> Result<Matrix> {
    let blocks = c.split_rows(h)?;
    let mut out = Matrix::zeros(c.rows() / h, c.cols());
    for (j, b) in blocks.iter().enumerate() {
        axpy(&mut out, b, x.powi(j as i32));
    }
    Ok(out)
}

/// Encodes row blocks with descending powers: `Σ_j C_j x^(h−1−j)`.
pub fn encode_right(c: &Matrix, h: usize, x: f64) -> Result<Matrix> {
    let blocks = c.split_rows(h)?;
    let mut out = Matrix::zeros(c.rows() / h, c.cols());
    for (j, b) in blocks.iter().enumerate() {
        axpy(&mut out, b, x.powi((h - 1 - j) as i32));
    }
    Ok(out)
}

/// General pair encoding for the product `AᵀB`.
///
/// `A` is split into `r` row blocks and `p` column blocks, weighted
/// `x^(j + i·r)`; `B` into `r` row blocks and `q` column blocks, weighted
/// `x^(r−1−j + k·r·p)`. A worker computes `Ã(x)ᵀ · B̃(x)`.
pub fn encode_pair(a: &Matrix, b: &Matrix, params: EpcParams, x: f64) -> Result<(Matrix, Matrix)> {
    let EpcParams { p, q, r } = params;
    if a.rows() % r != 0 {
        return Err(Error::NotDivisible { dim: a.rows(), parts: r });
    }
    if a.cols() % p != 0 {
        return Err(Error::NotDivisible { dim: a.cols(), parts: p });
    }
    if b.rows() % r != 0 {
        return Err(Error::NotDivisible { dim: b.rows(), parts: r });
    }
    if b.cols() % q != 0 {
        return Err(Error::NotDivisible { dim: b.cols(), parts: q });
    }

    let a_rows = a.rows() / r;
    let a_cols = a.cols() / p;
    let mut a_tilde = Matrix::zeros(a_rows, a_cols);
    let a_row_blocks = a.split_rows(r)?;
    for (j, row_block) in a_row_blocks.iter().enumerate() {
        // Column blocks of this row block, via transpose-split-transpose.
        let col_blocks = row_block.transpose().split_rows(p)?;
        for (i, cb) in col_blocks.iter().enumerate() {
            axpy(&mut a_tilde, &cb.transpose(), x.powi((j + i * r) as i32));
        }
    }

    let b_rows = b.rows() / r;
    let b_cols = b.cols() / q;
    let mut b_tilde = Matrix::zeros(b_rows, b_cols);
    let b_row_blocks = b.split_rows(r)?;
    for (j, row_block) in b_row_blocks.iter().enumerate() {
        let col_blocks = row_block.transpose().split_rows(q)?;
        for (k, cb) in col_blocks.iter().enumerate() {
            axpy(&mut b_tilde, &cb.transpose(), x.powi((r - 1 - j + k * r * p) as i32));
        }
    }
    Ok((a_tilde, b_tilde))
}

/// Monomial-basis weights of the Lagrange basis: `weights[i][k]` is the
/// coefficient of `x^k` in `L_i(x) = Π_{j≠i} (x − x_j)/(x_i − x_j)`.
///
/// One O(K²) scalar setup shared across all matrix entries; applying it to
/// the payloads is then a linear combination per coefficient.
fn lagrange_monomial_weights(points: &[f64]) -> Vec<Vec<f64>> {
    let k = points.len();
    // Node polynomial N(x) = Π (x − x_i), ascending coefficients.
    let mut node = vec![0.0; k + 1];
    node[0] = 1.0;
    for (m, &xi) in points.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            node[j] = node[j - 1] - xi * node[j];
        }
        node[0] *= -xi;
    }
    let mut weights = vec![vec![0.0; k]; k];
    for (i, &xi) in points.iter().enumerate() {
        // Synthetic division N(x) / (x − x_i): quotient has degree k−1.
        let q = &mut weights[i];
        q[k - 1] = node[k];
        for j in (1..k).rev() {
            q[j - 1] = node[j] + xi * q[j];
        }
        let mut denom = 1.0;
        for (m, &xm) in points.iter().enumerate() {
            if m != i {
                denom *= xi - xm;
            }
        }
        for w in q.iter_mut() {
            *w /= denom;
        }
    }
    weights
}

/// Recovers the unique degree-`degree` block polynomial through the shard
/// evaluations.
///
/// Exactly the first `degree + 1` shards (in the given order) determine the
/// polynomial; any further shards are held out and must agree with the fit
/// to within [`DECODE_RESIDUAL_TOLERANCE`], otherwise the decode is
/// rejected as numerically inconsistent.
pub fn interpolate(shards: &[CodedShard], degree: usize) -> Result<BlockPoly> {
    let needed = degree + 1;
    if shards.len() < needed {
        return Err(Error::InsufficientResponses {
            needed,
            got: shards.len(),
        });
    }
    let shape = shards[0].payload.shape();
    if let Some(bad) = shards.iter().find(|s| s.payload.shape() != shape) {
        return Err(Error::shape(
            "interpolate",
            format!("{}x{} payloads", shape.0, shape.1),
            format!(
                "{}x{} from worker {}",
                bad.payload.rows(),
                bad.payload.cols(),
                bad.worker_id
            ),
        ));
    }
    let used = &shards[..needed];
    for i in 0..used.len() {
        for j in i + 1..used.len() {
            if used[i].point == used[j].point {
                return Err(Error::DuplicatePoint { point: used[i].point });
            }
        }
    }

    let points: Vec<f64> = used.iter().map(|s| s.point).collect();
    let weights = lagrange_monomial_weights(&points);
    let mut coeffs = Vec::with_capacity(needed);
    for e in 0..needed {
        let mut c = Matrix::zeros(shape.0, shape.1);
        for (i, shard) in used.iter().enumerate() {
            axpy(&mut c, &shard.payload, weights[i][e]);
        }
        coeffs.push((e, c));
    }
    let poly = BlockPoly {
        degree,
        coeffs,
        block_shape: shape,
    };

    // Surplus shards cross-check the fit.
    let mut residual: f64 = 0.0;
    for extra in &shards[needed..] {
        let predicted = poly.evaluate(extra.point)?;
        residual = residual.max(crate::linalg::max_abs_diff(&predicted, &extra.payload));
    }
    if residual > DECODE_RESIDUAL_TOLERANCE {
        return Err(Error::NumericalDecode {
            residual,
            tolerance: DECODE_RESIDUAL_TOLERANCE,
        });
    }
    Ok(poly)
}

/// Decodes the general product `AᵀB` from shards of `Ã(x_w)ᵀ B̃(x_w)`
/// (see [`encode_pair`]); needs `pqr + r − 1` responses. Block `(i, k)` of
/// the product sits at exponent `r − 1 + i·r + k·r·p`; all other
/// coefficients are interference and are discarded.
pub fn decode_product(shards: &[CodedShard], params: EpcParams) -> Result<Matrix> {
    let poly = interpolate(shards, params.product_degree())?;
    let EpcParams { p, q, r } = params;
    let mut grid = Vec::with_capacity(p);
    for i in 0..p {
        let mut row = Vec::with_capacity(q);
        for k in 0..q {
            let e = r - 1 + i * r + k * r * p;
            let block = poly
                .coeff(e)
                .ok_or_else(|| Error::InvalidArgument(format!("missing coefficient {e}")))?;
            row.push(block.clone());
        }
        grid.push(row);
    }
    Matrix::assemble_grid(&grid)
}

/// Decodes `D·B` from shards of `encode_grid(D)ᵀ · encode_right(B)`.
/// Needs `h² + h − 1` responses. (For an asymmetric `D` smuggled past the
/// encoder this recovers `Dᵀ·B` — symmetry is what makes the two agree.)
pub fn decode_grid_product(shards: &[CodedShard], h: usize) -> Result<Matrix> {
    decode_product(shards, EpcParams { p: h, q: 1, r: h })
}

/// Decodes the inner product `AᵀC` from shards of
/// `encode_left(A)ᵀ · encode_right(C)`. Needs `2h − 1` responses.
pub fn decode_inner_product(shards: &[CodedShard], h: usize) -> Result<Matrix> {
    decode_product(shards, EpcParams { p: 1, q: 1, r: h })
}

/// Recovers `M` from shards of `encode_right(M)`: the degree-(h−1) fit's
/// coefficient at exponent `h−1−j` is block `j`. Needs `h` responses.
pub fn decode_right_blocks(shards: &[CodedShard], h: usize) -> Result<Matrix> {
    let poly = interpolate(shards, h - 1)?;
    let blocks: Vec<Matrix> = (0..h)
        .map(|j| poly.coeff(h - 1 - j).expect("dense coefficients").clone())
        .collect();
    Matrix::stack_rows(&blocks)
}

/// Recovers `M` from shards of `encode_left(M)`: coefficient at exponent `j`
/// is block `j`. Needs `h` responses.
pub fn decode_left_blocks(shards: &[CodedShard], h: usize) -> Result<Matrix> {
    let poly = interpolate(shards, h - 1)?;
    let blocks: Vec<Matrix> = (0..h)
        .map(|j| poly.coeff(j).expect("dense coefficients").clone())
        .collect();
    Matrix::stack_rows(&blocks)
}

/// The decode tasks that occur inside one factorization iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeKind {
    /// `D·B` through the grid code: threshold `h² + h − 1`.
    GridProduct,
    /// Block inner products (`BᵀB`, `BᵀE`): threshold `2h − 1`.
    InnerProduct,
    /// Plain block recovery of an encoded matrix: threshold `h`.
    BlockRecovery,
}

/// Minimum number of responses that guarantees the given decode.
pub fn recovery_threshold(kind: DecodeKind, h: usize) -> usize {
    match kind {
        DecodeKind::GridProduct => h * h + h - 1,
        DecodeKind::InnerProduct => 2 * h - 1,
        DecodeKind::BlockRecovery => h,
    }
}

/// Threshold that lets a whole iteration finish: the grid product dominates.
pub fn iteration_threshold(h: usize) -> usize {
    recovery_threshold(DecodeKind::GridProduct, h)
}

/// Writes a shard: `worker_id` (u32 LE), `point` (f64 LE), then the payload
/// in the binary matrix format.
pub fn write_shard<W: Write>(shard: &CodedShard, out: &mut W) -> Result<()> {
    out.write_all(&(shard.worker_id as u32).to_le_bytes())?;
    out.write_all(&shard.point.to_le_bytes())?;
    crate::linalg::io::write_binary(&shard.payload, out)
}

/// Reads a shard written by [`write_shard`].
pub fn read_shard<R: Read>(mut input: R) -> Result<CodedShard> {
    let mut w = [0u8; 4];
    input.read_exact(&mut w)?;
    let mut p = [0u8; 8];
    input.read_exact(&mut p)?;
    let point = f64::from_le_bytes(p);
    if !point.is_finite() {
        return Err(Error::NonFinite {
            context: "shard evaluation point",
        });
    }
    let payload = crate::linalg::io::read_binary(&mut input)?;
    Ok(CodedShard {
        worker_id: u32::from_le_bytes(w) as usize,
        point,
        payload,
    })
}
