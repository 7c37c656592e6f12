//! Alternating-least-squares matrix factorization, centralized and coded.
//!
//! The centralized path ([`als_baseline`], [`direct_update`]) is the
//! ground truth: classical alternating updates, and the one-sided
//! recurrence `B⁺ = DB(BᵀDB)⁻¹BᵀB` that folds a full update round into a
//! single iteration on one factor (with `D = RᵀR` or `RRᵀ` fixed up
//! front).
//!
//! The coded path runs the same recurrence on a straggler-prone simulated
//! cluster: `D` is produced once by a coded product ([`precompute_d`]),
//! every iteration runs four coded worker stages ([`run_iteration`]), and
//! the final factor pair is assembled by [`post_compute`]. Decode sets are
//! keyed on worker ids, so results are reproducible and independent of
//! timing randomness.

use crate::cluster::{Cluster, IterationStage};
use crate::epc::{
    self, CodedShard, DecodeKind, EpcParams, EvalPoints, decode_grid_product,
    decode_inner_product, decode_left_blocks, decode_right_blocks, encode_grid, encode_left,
    encode_pair, encode_right, recovery_threshold,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A factorization problem: data matrix, latent dimension, and run limits.
#[derive(Debug, Clone)]
pub struct Problem {
    pub data: Matrix,
    pub d: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the relative factor change per iteration.
    pub tol: f64,
    pub seed: u64,
    /// Record the reconstruction loss each iteration (costs an extra
    /// master-side product per iteration); off by default.
    pub track_loss: bool,
}

impl Problem {
    pub fn new(data: Matrix, d: usize, max_iterations: usize, tol: f64, seed: u64) -> Result<Self> {
        let (m, n) = data.shape();
        if d < 1 || d > m.min(n) {
            return Err(Error::InvalidArgument(format!(
                "latent dimension {d} out of range 1..={} for a {m}x{n} matrix",
                m.min(n)
            )));
        }
        if max_iterations < 1 {
            return Err(Error::InvalidArgument("need at least one iteration".into()));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "convergence tolerance must be positive, got {tol}"
            )));
        }
        Ok(Problem {
            data,
            d,
            max_iterations,
            tol,
            seed,
            track_loss: false,
        })
    }

    pub fn with_loss_tracking(mut self, track: bool) -> Self {
        self.track_loss = track;
        self
    }
}

/// Which factor the one-sided recurrence iterates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// m ≥ n: iterate the column factor V (D = RᵀR is n×n).
    ColumnSide,
    /// m < n: iterate the row factor U (D = RRᵀ is m×m).
    RowSide,
}

/// Orientation of the factorization: the iterated factor has `l` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orientation {
    pub side: Side,
    pub l: usize,
}

impl Orientation {
    /// Pick the smaller dimension so D stays as small as possible.
    pub fn for_shape(m: usize, n: usize) -> Orientation {
        if m >= n {
            Orientation {
                side: Side::ColumnSide,
                l: n,
            }
        } else {
            Orientation {
                side: Side::RowSide,
                l: m,
            }
        }
    }
}

/// State carried across coded iterations. The intermediate products are
/// absent until the first round has run.
#[derive(Debug, Clone)]
pub struct IterState {
    /// Completed iterations.
    pub t: usize,
    /// Current iterate B (l×d).
    pub b: Matrix,
    /// Last decoded product DB.
    pub e: Option<Matrix>,
    /// Last decoded Gram matrix BᵀB (symmetrized).
    pub f: Option<Matrix>,
    /// Last combiner (BᵀE)⁻¹F.
    pub g: Option<Matrix>,
    /// Relative factor change per completed iteration.
    pub change_history: Vec<f64>,
}

impl IterState {
    pub fn new(b0: Matrix) -> IterState {
        IterState {
            t: 0,
            b: b0,
            e: None,
            f: None,
            g: None,
            change_history: Vec::new(),
        }
    }
}

/// Final factor pair and run diagnostics.
#[derive(Debug, Clone)]
pub struct FactorizationResult {
    pub u: Matrix,
    pub v: Matrix,
    pub iterations_run: usize,
    /// Reconstruction loss per iteration when tracking was requested,
    /// empty otherwise.
    pub loss_history: Vec<f64>,
}

/// Seeded i.i.d. standard-normal starting factor. Row-major fill: the
/// first `rows` rows of a taller draw with the same seed are identical,
/// so padded and unpadded problems share a starting point.
pub fn initial_factor(rows: usize, d: usize, seed: u64) -> Matrix {
    Matrix::seeded_standard_normal(rows, d, seed)
}

/// Squared reconstruction error `‖R − UVᵀ‖²`.
pub fn loss(data: &Matrix, u: &Matrix, v: &Matrix) -> Result<f64> {
    Ok(data.sub(&u.matmul(&v.transpose())?)?.frobenius_sq())
}

/// One half-update of classical alternating least squares:
/// `R·X·(XᵀX)⁻¹` — the minimizer of `‖R − YXᵀ‖²` over Y.
fn half_update(data: &Matrix, x: &Matrix, iteration: usize) -> Result<Matrix> {
    let gram = x.transpose().matmul(x)?;
    let gram_inv = gram.invert().map_err(|e| degeneracy(e, iteration, "factor Gram matrix"))?;
    data.matmul(x)?.matmul(&gram_inv)
}

fn degeneracy(err: Error, iteration: usize, context: &str) -> Error {
    match err {
        Error::Singular { column, pivot } => Error::Degeneracy {
            iteration,
            context: format!("{context} is singular (column {column}, pivot {pivot:.3e})"),
        },
        other => other,
    }
}

/// Classical two-step alternating least squares, the reference pipeline.
///
/// After the final double update, the complementary factor is refreshed
/// once against the final iterate, so the returned pair sits at the same
/// point the coded pipeline's post-computation produces.
pub fn als_baseline(problem: &Problem) -> Result<FactorizationResult> {
    let (m, n) = problem.data.shape();
    let orientation = Orientation::for_shape(m, n);
    let data = &problem.data;
    let data_t = data.transpose();
    let mut b = initial_factor(orientation.l, problem.d, problem.seed);
    let mut loss_history = Vec::new();
    let mut iterations_run = 0;

    // The iterated factor is b; `partner` is recomputed from it each half
    // round. ColumnSide: b = V, partner = U; RowSide: b = U, partner = V.
    let mut partner;
    for t in 1..=problem.max_iterations {
        let b_next = match orientation.side {
            Side::ColumnSide => {
                partner = half_update(data, &b, t)?; // U from V
                half_update(&data_t, &partner, t)? // V from U
            }
            Side::RowSide => {
                partner = half_update(&data_t, &b, t)?; // V from U
                half_update(data, &partner, t)? // U from V
            }
        };
        let change = crate::linalg::rel_diff(&b_next, &b);
        b = b_next;
        iterations_run = t;
        if problem.track_loss {
            let (u, v) = arrange(orientation, &b, &partner);
            loss_history.push(loss(data, u, v)?);
        }
        if change < problem.tol {
            break;
        }
    }
    // Align the complementary factor with the final iterate.
    partner = match orientation.side {
        Side::ColumnSide => half_update(data, &b, iterations_run)?,
        Side::RowSide => half_update(&data_t, &b, iterations_run)?,
    };
    let (u, v) = arrange(orientation, &b, &partner);
    Ok(FactorizationResult {
        u: u.clone(),
        v: v.clone(),
        iterations_run,
        loss_history,
    })
}

/// Maps (iterated factor, partner) to (U, V) for the orientation.
fn arrange<'a>(orientation: Orientation, b: &'a Matrix, partner: &'a Matrix) -> (&'a Matrix, &'a Matrix) {
    match orientation.side {
        Side::ColumnSide => (partner, b),
        Side::RowSide => (b, partner),
    }
}

/// The one-sided update `DB(BᵀDB)⁻¹BᵀB`, computed centrally. This is the
/// oracle every coded iteration must reproduce; the operation order below
/// deliberately mirrors the coded protocol's decode order.
pub fn direct_update(b: &Matrix, d_matrix: &Matrix) -> Result<Matrix> {
    let e = d_matrix.matmul(b)?;
    let cross = b.transpose().matmul(&e)?; // BᵀDB
    let f = b.transpose().matmul(b)?; // BᵀB
    let g = cross
        .invert()
        .map_err(|err| degeneracy(err, 0, "cross Gram matrix BᵀDB"))?
        .matmul(&f)?;
    e.matmul(&g)
}

/// Partition parameters for the one-shot product D = RᵀR (or RRᵀ): the
/// contracted dimension is split into `r` blocks, the output dimension
/// into `h`. Prefers r = h (recovery threshold h²+h−1, never above the
/// iteration threshold); falls back to r = 1 when h does not divide the
/// contracted dimension.
pub fn precompute_params(contracted_rows: usize, h: usize) -> EpcParams {
    let r = if h >= 1 && contracted_rows % h == 0 { h } else { 1 };
    EpcParams { p: h, q: 1, r }
}

/// Computes D = RᵀR (ColumnSide) or RRᵀ (RowSide) through one coded
/// product round, then symmetrizes. `params.q` must be 1; the contracted
/// dimension must split into `params.r` blocks and the output dimension
/// into `params.p` blocks.
pub fn precompute_d(
    data: &Matrix,
    orientation: Orientation,
    cluster: &mut Cluster,
    points: &EvalPoints,
    params: EpcParams,
) -> Result<Matrix> {
    if params.q != 1 {
        return Err(Error::InvalidArgument(format!(
            "the Gram pre-computation keeps the right operand whole (q = 1), got q = {}",
            params.q
        )));
    }
    let operand = match orientation.side {
        Side::ColumnSide => data.clone(),
        Side::RowSide => data.transpose(),
    };
    let (rows, cols) = operand.shape();
    if rows % params.r != 0 {
        return Err(Error::NotDivisible {
            dim: rows,
            parts: params.r,
        });
    }
    if cols % params.p != 0 {
        return Err(Error::NotDivisible {
            dim: cols,
            parts: params.p,
        });
    }
    let k = params.threshold();
    // Per-worker product: (cols/p × rows/r)ᵀ-side times (rows/r × cols).
    let elements = ((cols / params.p) * (rows / params.r)) as u64 * cols as u64;
    let w = cluster.workers();
    let (shards, _) = cluster.run_protocol_round(&vec![elements; w], k, |wid| {
        let x = points.get(wid);
        let (a_tilde, b_tilde) = encode_pair(&operand, &operand, params, x)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload: a_tilde.transpose().matmul(&b_tilde)?,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let d_matrix = epc::decode_product(&shards, params)?;
    let tol = 1e-9 * d_matrix.max_abs().max(1.0);
    let asym = d_matrix.asymmetry()?;
    if asym > tol {
        return Err(Error::NotSymmetric {
            max_deviation: asym,
            tolerance: tol,
        });
    }
    d_matrix.symmetrized()
}

/// Runs one full coded iteration: four worker stages with their own
/// recovery thresholds, producing `B⁺ = DB(BᵀDB)⁻¹BᵀB` exactly as
/// [`direct_update`] would.
///
/// Stage 1 decodes E = DB from h²+h−1 responses and F = BᵀB from 2h−1;
/// stage 3 decodes BᵀE from 2h−1; the master inverts BᵀE to form the
/// combiner G = (BᵀE)⁻¹F; stage 4 decodes B⁺ = EG from h responses.
pub fn run_iteration(
    state: &IterState,
    d_matrix: &Matrix,
    cluster: &mut Cluster,
    h: usize,
    points: &EvalPoints,
) -> Result<IterState> {
    let (l, d) = state.b.shape();
    if d_matrix.shape() != (l, l) {
        return Err(Error::shape(
            "run_iteration",
            format!("{l}x{l} Gram operand"),
            format!("{}x{}", d_matrix.rows(), d_matrix.cols()),
        ));
    }
    let w = cluster.workers();
    if points.len() != w {
        return Err(Error::InvalidArgument(format!(
            "{} evaluation points for {w} workers",
            points.len()
        )));
    }
    let iteration = state.t + 1;
    let b = &state.b;

    // Stage 1: E = DB through the grid code.
    let k_grid = recovery_threshold(DecodeKind::GridProduct, h);
    let grid_tasks = vec![IterationStage::EProduct.elements(l, d, h); w];
    let (shards, _) = cluster.run_protocol_round(&grid_tasks, k_grid, |wid| {
        let x = points.get(wid);
        let payload = encode_grid(d_matrix, h, x)?
            .transpose()
            .matmul(&encode_right(b, h, x)?)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let e = decode_grid_product(&shards, h)?;

    // Stage 2: F = BᵀB through the inner-product code.
    let k_inner = recovery_threshold(DecodeKind::InnerProduct, h);
    let gram_tasks = vec![IterationStage::Gram.elements(l, d, h); w];
    let (shards, _) = cluster.run_protocol_round(&gram_tasks, k_inner, |wid| {
        let x = points.get(wid);
        let payload = encode_left(b, h, x)?
            .transpose()
            .matmul(&encode_right(b, h, x)?)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let f = decode_inner_product(&shards, h)?.symmetrized()?;

    // Stage 3: BᵀE; the master then forms the combiner G = (BᵀE)⁻¹F.
    let cross_tasks = vec![IterationStage::CrossGram.elements(l, d, h); w];
    let (shards, _) = cluster.run_protocol_round(&cross_tasks, k_inner, |wid| {
        let x = points.get(wid);
        let payload = encode_left(b, h, x)?
            .transpose()
            .matmul(&encode_right(&e, h, x)?)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let cross = decode_inner_product(&shards, h)?;
    let g = cross
        .invert()
        .map_err(|err| degeneracy(err, iteration, "cross Gram matrix BᵀDB"))?
        .matmul(&f)?;

    // Stage 4: B⁺ = EG from plain block recovery.
    let k_blocks = recovery_threshold(DecodeKind::BlockRecovery, h);
    let update_tasks = vec![IterationStage::Update.elements(l, d, h); w];
    let (shards, _) = cluster.run_protocol_round(&update_tasks, k_blocks, |wid| {
        let x = points.get(wid);
        let payload = encode_right(&e, h, x)?.matmul(&g)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let b_next = decode_right_blocks(&shards, h)?;

    let change = crate::linalg::rel_diff(&b_next, b);
    let mut change_history = state.change_history.clone();
    change_history.push(change);
    Ok(IterState {
        t: iteration,
        b: b_next,
        e: Some(e),
        f: Some(f),
        g: Some(g),
        change_history,
    })
}

/// Final phase: computes H = B(BᵀB)⁻¹ through two coded rounds, then one
/// coded product against the data matrix to recover the complementary
/// factor. Returns (U, V).
pub fn post_compute(
    b_final: &Matrix,
    data: &Matrix,
    orientation: Orientation,
    cluster: &mut Cluster,
    points: &EvalPoints,
    h: usize,
) -> Result<(Matrix, Matrix)> {
    let (l, d) = b_final.shape();
    let w = cluster.workers();

    // Final Gram matrix from 2h−1 responses.
    let k_inner = recovery_threshold(DecodeKind::InnerProduct, h);
    let gram_tasks = vec![IterationStage::Gram.elements(l, d, h); w];
    let (shards, _) = cluster.run_protocol_round(&gram_tasks, k_inner, |wid| {
        let x = points.get(wid);
        let payload = encode_left(b_final, h, x)?
            .transpose()
            .matmul(&encode_right(b_final, h, x)?)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let f_final = decode_inner_product(&shards, h)?.symmetrized()?;
    let f_inv = f_final
        .invert()
        .map_err(|err| degeneracy(err, 0, "final Gram matrix"))?;

    // H = B·F⁻¹, recovered from h responses of the ascending-encoded form.
    let k_blocks = recovery_threshold(DecodeKind::BlockRecovery, h);
    let h_tasks = vec![IterationStage::Update.elements(l, d, h); w];
    let (shards, _) = cluster.run_protocol_round(&h_tasks, k_blocks, |wid| {
        let x = points.get(wid);
        let payload = encode_left(b_final, h, x)?.matmul(&f_inv)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let h_matrix = decode_left_blocks(&shards, h)?;

    // Complementary factor: R·H (ColumnSide, giving U) or RᵀH (RowSide,
    // giving V), both as a coded inner product along the l-dimension.
    let left_operand = match orientation.side {
        Side::ColumnSide => data.transpose(), // (Rᵀ)ᵀ·H = R·H
        Side::RowSide => data.clone(),        // Rᵀ·H
    };
    let other_dim = left_operand.cols();
    let product_tasks = vec![(other_dim * (l / h) * d) as u64; w];
    let (shards, _) = cluster.run_protocol_round(&product_tasks, k_inner, |wid| {
        let x = points.get(wid);
        let payload = encode_left(&left_operand, h, x)?
            .transpose()
            .matmul(&encode_right(&h_matrix, h, x)?)?;
        Ok(CodedShard {
            worker_id: wid,
            point: x,
            payload,
        })
    })?;
    let shards: Vec<CodedShard> = shards.into_iter().map(|(_, s)| s).collect();
    let partner = decode_inner_product(&shards, h)?;

    Ok(match orientation.side {
        Side::ColumnSide => (partner, b_final.clone()),
        Side::RowSide => (b_final.clone(), partner),
    })
}

/// Loss of the factor pair implied by the current iterate: the partner is
/// recomputed centrally as R·B(BᵀB)⁻¹ (or the transposed mirror). Used
/// only for optional per-iteration loss tracking.
fn implied_loss(data: &Matrix, orientation: Orientation, b: &Matrix) -> Result<f64> {
    let gram_inv = b
        .transpose()
        .matmul(b)?
        .invert()
        .map_err(|err| degeneracy(err, 0, "iterate Gram matrix"))?;
    let h_matrix = b.matmul(&gram_inv)?;
    let partner = match orientation.side {
        Side::ColumnSide => data.matmul(&h_matrix)?,
        Side::RowSide => data.transpose().matmul(&h_matrix)?,
    };
    let (u, v) = arrange(orientation, b, &partner);
    loss(data, u, v)
}

/// End-to-end coded factorization: orientation, feasibility checks,
/// coded pre-computation of D, the iterative protocol, and the coded
/// post-computation of the complementary factor.
pub fn factorize_coded(
    problem: &Problem,
    cluster: &mut Cluster,
    h: usize,
) -> Result<FactorizationResult> {
    if h == 0 {
        return Err(Error::InvalidArgument("partition count must be positive".into()));
    }
    let (m, n) = problem.data.shape();
    let orientation = Orientation::for_shape(m, n);
    let l = orientation.l;
    let w = cluster.workers();
    let k_iter = epc::iteration_threshold(h);
    let budget = cluster.config().policy.budget();
    if k_iter + budget > w {
        return Err(Error::Infeasible(format!(
            "partition count {h} needs {k_iter} responses plus {budget} straggler allowance, \
             but the cluster has only {w} workers"
        )));
    }
    if l % h != 0 {
        return Err(Error::NotDivisible { dim: l, parts: h });
    }

    let points = EvalPoints::chebyshev(w)?;
    let contracted = m + n - l; // the dimension summed over in D
    let d_matrix = precompute_d(
        &problem.data,
        orientation,
        cluster,
        &points,
        precompute_params(contracted, h),
    )?;

    let mut state = IterState::new(initial_factor(l, problem.d, problem.seed));
    let mut loss_history = Vec::new();
    for _ in 0..problem.max_iterations {
        state = run_iteration(&state, &d_matrix, cluster, h, &points)?;
        if problem.track_loss {
            loss_history.push(implied_loss(&problem.data, orientation, &state.b)?);
        }
        if state
            .change_history
            .last()
            .is_some_and(|&c| c < problem.tol)
        {
            break;
        }
    }

    let (u, v) = post_compute(&state.b, &problem.data, orientation, cluster, &points, h)?;
    Ok(FactorizationResult {
        u,
        v,
        iterations_run: state.t,
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{SimConfig, StragglerPolicy, WorkerProfile};
    use crate::linalg::{max_abs_diff, rel_diff};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::random_standard_normal(rows, cols, &mut rng)
    }

    fn quiet_cluster(w: usize, policy: StragglerPolicy, seed: u64) -> Cluster {
        let profile = WorkerProfile::new(1e-6, 1e-7).unwrap();
        Cluster::new(SimConfig::uniform(w, profile, policy, seed).unwrap())
    }

    /// Gram-Schmidt orthonormalization of a random tall matrix.
    fn orthonormal(rows: usize, cols: usize, seed: u64) -> Matrix {
        let a = random_matrix(rows, cols, seed);
        let mut cols_v: Vec<Vec<f64>> = Vec::new();
        for j in 0..cols {
            let mut v: Vec<f64> = (0..rows).map(|i| a.get(i, j)).collect();
            for prev in &cols_v {
                let dot: f64 = v.iter().zip(prev).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(prev) {
                    *x -= dot * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
            cols_v.push(v);
        }
        let mut out = Matrix::zeros(rows, cols);
        for (j, v) in cols_v.iter().enumerate() {
            for (i, &x) in v.iter().enumerate() {
                out.set(i, j, x);
            }
        }
        out
    }

    #[test]
    fn direct_update_composes_the_two_classical_half_updates() {
        let r = random_matrix(8, 5, 1);
        let v0 = random_matrix(5, 2, 2);
        let d = r.transpose().matmul(&r).unwrap();
        let got = direct_update(&v0, &d).unwrap();
        // Oracle: U = RV(VᵀV)⁻¹ then V⁺ = RᵀU(UᵀU)⁻¹.
        let u = half_update(&r, &v0, 1).unwrap();
        let want = half_update(&r.transpose(), &u, 1).unwrap();
        assert!(
            rel_diff(&got, &want) < 1e-9,
            "rel err {}",
            rel_diff(&got, &want)
        );
    }

    #[test]
    fn direct_update_fixed_point_and_orthonormal_simplification() {
        // D = I: B(BᵀB)⁻¹BᵀB = B.
        let b = random_matrix(6, 2, 3);
        let got = direct_update(&b, &Matrix::identity(6)).unwrap();
        assert!(rel_diff(&got, &b) < 1e-12);

        // Orthonormal B: BᵀB = I, so the update is DB(BᵀDB)⁻¹.
        let q = orthonormal(6, 2, 4);
        let a = random_matrix(6, 6, 5);
        let spd = a.matmul(&a.transpose()).unwrap().add(&Matrix::identity(6).scale(6.0).unwrap()).unwrap();
        let got = direct_update(&q, &spd).unwrap();
        let e = spd.matmul(&q).unwrap();
        let want = e
            .matmul(&q.transpose().matmul(&e).unwrap().invert().unwrap())
            .unwrap();
        assert!(rel_diff(&got, &want) < 1e-10);
    }

    #[test]
    fn direct_update_sequence_tracks_classical_sequence() {
        // Five iterations on seeded 10×8 instances, d = 2.
        for seed in [10u64, 11, 12] {
            let r = random_matrix(10, 8, seed);
            let d = r.transpose().matmul(&r).unwrap();
            let mut v_direct = initial_factor(8, 2, seed);
            let mut v_classical = v_direct.clone();
            for _ in 0..5 {
                v_direct = direct_update(&v_direct, &d).unwrap();
                let u = half_update(&r, &v_classical, 1).unwrap();
                v_classical = half_update(&r.transpose(), &u, 1).unwrap();
                assert!(
                    rel_diff(&v_direct, &v_classical) < 1e-7,
                    "seed {seed}: rel err {}",
                    rel_diff(&v_direct, &v_classical)
                );
            }
        }
    }

    #[test]
    fn baseline_recovers_exact_low_rank_data() {
        let u_star = random_matrix(10, 2, 20);
        let v_star = random_matrix(8, 2, 21);
        let r = u_star.matmul(&v_star.transpose()).unwrap();
        let problem = Problem::new(r.clone(), 2, 30, 1e-12, 7).unwrap();
        let result = als_baseline(&problem).unwrap();
        let final_loss = loss(&r, &result.u, &result.v).unwrap();
        assert!(
            final_loss < 1e-10 * r.frobenius_sq(),
            "loss {final_loss}"
        );
    }

    #[test]
    fn baseline_full_rank_square_converges_immediately() {
        let r = random_matrix(4, 4, 22);
        let problem = Problem::new(r.clone(), 4, 30, 1e-9, 8).unwrap();
        let result = als_baseline(&problem).unwrap();
        assert!(loss(&r, &result.u, &result.v).unwrap() < 1e-10);
    }

    #[test]
    fn baseline_loss_is_monotone_after_first_iteration() {
        let r = random_matrix(20, 15, 23);
        let problem = Problem::new(r, 3, 12, 1e-12, 9)
            .unwrap()
            .with_loss_tracking(true);
        let result = als_baseline(&problem).unwrap();
        assert!(result.loss_history.len() >= 2);
        for pair in result.loss_history.windows(2) {
            assert!(
                pair[1] <= pair[0] * (1.0 + 1e-12),
                "loss increased: {pair:?}"
            );
        }
    }

    #[test]
    fn loss_trivial_values() {
        let u = random_matrix(5, 2, 30);
        let v = random_matrix(4, 2, 31);
        let r = u.matmul(&v.transpose()).unwrap();
        assert_eq!(loss(&r, &u, &v).unwrap(), 0.0);
        let zero_u = Matrix::zeros(5, 2);
        assert_eq!(loss(&r, &zero_u, &v).unwrap(), r.frobenius_sq());
        // Componentwise oracle on a random instance.
        let u2 = random_matrix(5, 2, 32);
        let mut want = 0.0;
        let prod = u2.matmul(&v.transpose()).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let diff = r.get(i, j) - prod.get(i, j);
                want += diff * diff;
            }
        }
        assert!((loss(&r, &u2, &v).unwrap() - want).abs() < 1e-12 * want.max(1.0));
    }

    #[test]
    fn precomputed_gram_matches_central_products() {
        // Scalar case: R = [c] gives D = [c²].
        let r = Matrix::new(1, 1, vec![3.0]).unwrap();
        let mut cluster = quiet_cluster(1, StragglerPolicy::FixedSet(vec![]), 1);
        let points = EvalPoints::chebyshev(1).unwrap();
        let d = precompute_d(
            &r,
            Orientation::for_shape(1, 1),
            &mut cluster,
            &points,
            precompute_params(1, 1),
        )
        .unwrap();
        assert_eq!(d.get(0, 0), 9.0);

        // Tall data: D = RᵀR.
        let r = random_matrix(8, 6, 40);
        let orientation = Orientation::for_shape(8, 6);
        assert_eq!(orientation.side, Side::ColumnSide);
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 2);
        let points = EvalPoints::chebyshev(8).unwrap();
        let params = precompute_params(8, 2);
        assert_eq!(params, EpcParams { p: 2, q: 1, r: 2 });
        let d = precompute_d(&r, orientation, &mut cluster, &points, params).unwrap();
        let want = r.transpose().matmul(&r).unwrap();
        assert!(rel_diff(&d, &want) < 1e-8);

        // Wide data: D = RRᵀ.
        let r = random_matrix(4, 10, 41);
        let orientation = Orientation::for_shape(4, 10);
        assert_eq!(orientation.side, Side::RowSide);
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 3);
        let params = precompute_params(10, 2);
        let d = precompute_d(&r, orientation, &mut cluster, &points, params).unwrap();
        let want = r.matmul(&r.transpose()).unwrap();
        assert!(rel_diff(&d, &want) < 1e-8);

        // A straggler-tolerant pre-computation still succeeds: threshold
        // r(h+1)−1 = 5 of 8 workers with three fixed stragglers.
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![0, 4, 7]), 4);
        let d = precompute_d(&r, orientation, &mut cluster, &points, params).unwrap();
        assert!(rel_diff(&d, &want) < 1e-8);
    }

    #[test]
    fn uncoded_single_worker_iteration_is_bit_identical_to_direct() {
        let r = random_matrix(7, 5, 50);
        let d = r.transpose().matmul(&r).unwrap();
        let b0 = initial_factor(5, 2, 51);
        let mut cluster = quiet_cluster(1, StragglerPolicy::FixedSet(vec![]), 5);
        let points = EvalPoints::chebyshev(1).unwrap();
        let state = IterState::new(b0.clone());
        let next = run_iteration(&state, &d, &mut cluster, 1, &points).unwrap();
        let want = direct_update(&b0, &d).unwrap();
        assert_eq!(max_abs_diff(&next.b, &want), 0.0);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn every_small_straggler_pattern_reproduces_direct_update() {
        // h = 2 on an 8-worker cluster tolerates any 3 stragglers.
        let r = random_matrix(24, 16, 60);
        let d = r.transpose().matmul(&r).unwrap();
        let b0 = initial_factor(16, 2, 61);
        let want = direct_update(&b0, &d).unwrap();
        let points = EvalPoints::chebyshev(8).unwrap();
        let mut patterns = 0;
        for mask in 0u32..256 {
            if mask.count_ones() > 3 {
                continue;
            }
            let stragglers: Vec<usize> = (0..8).filter(|i| mask & (1 << i) != 0).collect();
            let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(stragglers.clone()), 6);
            let state = IterState::new(b0.clone());
            let next = run_iteration(&state, &d, &mut cluster, 2, &points).unwrap();
            assert!(
                rel_diff(&next.b, &want) < 1e-8,
                "stragglers {stragglers:?}: rel err {}",
                rel_diff(&next.b, &want)
            );
            patterns += 1;
        }
        assert_eq!(patterns, 93); // C(8,0)+C(8,1)+C(8,2)+C(8,3)

        // One straggler too many starves the grid decode.
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![0, 1, 2, 3]), 7);
        let state = IterState::new(b0);
        match run_iteration(&state, &d, &mut cluster, 2, &points) {
            Err(Error::InsufficientResponses { needed, got }) => {
                assert_eq!((needed, got), (5, 4));
            }
            other => panic!("expected insufficient responses, got {other:?}"),
        }
    }

    #[test]
    fn decoded_gram_is_symmetric_and_positive() {
        let r = random_matrix(24, 16, 70);
        let d = r.transpose().matmul(&r).unwrap();
        let b0 = initial_factor(16, 3, 71);
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 8);
        let points = EvalPoints::chebyshev(8).unwrap();
        let state = run_iteration(&IterState::new(b0.clone()), &d, &mut cluster, 2, &points).unwrap();
        let f = state.f.as_ref().unwrap();
        // Raw decode asymmetry: re-derive without the symmetrization.
        let raw: Vec<CodedShard> = (0..3)
            .map(|wid| {
                let x = points.get(wid);
                CodedShard {
                    worker_id: wid,
                    point: x,
                    payload: encode_left(&b0, 2, x)
                        .unwrap()
                        .transpose()
                        .matmul(&encode_right(&b0, 2, x).unwrap())
                        .unwrap(),
                }
            })
            .collect();
        let raw_f = decode_inner_product(&raw, 2).unwrap();
        assert!(raw_f.asymmetry().unwrap() < 1e-10 * raw_f.max_abs().max(1.0));
        // Positive semidefinite within decode noise: random quadratic forms.
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for _ in 0..20 {
            let x = Matrix::random_standard_normal(3, 1, &mut rng);
            let q = x.transpose().matmul(&f.matmul(&x).unwrap()).unwrap().get(0, 0);
            assert!(q >= -1e-9 * f.max_abs(), "quadratic form {q}");
        }
    }

    #[test]
    fn post_compute_matches_central_normal_equations() {
        // Orthonormal final iterate: H = B exactly (F = I).
        let q = orthonormal(8, 2, 80);
        let r = random_matrix(10, 8, 81);
        let orientation = Orientation::for_shape(10, 8);
        let points = EvalPoints::chebyshev(8).unwrap();
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 9);
        let (u, v) = post_compute(&q, &r, orientation, &mut cluster, &points, 2).unwrap();
        assert!(max_abs_diff(&v, &q) < 1e-15); // V is B itself
        let want_u = r.matmul(&q).unwrap(); // R·B(BᵀB)⁻¹ with BᵀB = I
        assert!(rel_diff(&u, &want_u) < 1e-8);

        // Random final iterate against the central computation.
        let b = random_matrix(8, 2, 82);
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 10);
        let (u, v) = post_compute(&b, &r, orientation, &mut cluster, &points, 2).unwrap();
        let central_h = b
            .matmul(&b.transpose().matmul(&b).unwrap().invert().unwrap())
            .unwrap();
        let want_u = r.matmul(&central_h).unwrap();
        assert!(rel_diff(&u, &want_u) < 1e-8);
        // The pair satisfies the normal-equation relation U = RV(VᵀV)⁻¹.
        let relation = r
            .matmul(&v.matmul(&v.transpose().matmul(&v).unwrap().invert().unwrap()).unwrap())
            .unwrap();
        assert!(rel_diff(&u, &relation) < 1e-6);
    }

    #[test]
    fn coded_factorization_matches_centralized_pipeline() {
        let r = random_matrix(24, 16, 90);
        let problem = Problem::new(r.clone(), 2, 5, 1e-12, 91).unwrap();
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 11);
        let coded = factorize_coded(&problem, &mut cluster, 2).unwrap();

        // Centralized oracle: direct updates then the normal equations.
        let d = r.transpose().matmul(&r).unwrap();
        let mut b = initial_factor(16, 2, 91);
        for _ in 0..5 {
            b = direct_update(&b, &d).unwrap();
        }
        let u = r
            .matmul(&b.matmul(&b.transpose().matmul(&b).unwrap().invert().unwrap()).unwrap())
            .unwrap();
        let coded_loss = loss(&r, &coded.u, &coded.v).unwrap();
        let central_loss = loss(&r, &u, &b).unwrap();
        assert!(
            (coded_loss - central_loss).abs() <= 1e-7 * central_loss.max(1e-300),
            "coded {coded_loss} vs central {central_loss}"
        );
        assert_eq!(coded.iterations_run, 5);
    }

    #[test]
    fn result_is_independent_of_which_workers_straggle() {
        let r = random_matrix(24, 16, 100);
        let problem = Problem::new(r, 2, 10, 1e-12, 101).unwrap();
        let mut reference: Option<FactorizationResult> = None;
        for stragglers in [vec![0, 1], vec![3, 6], vec![5, 7], vec![2, 4]] {
            let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(stragglers), 12);
            let result = factorize_coded(&problem, &mut cluster, 2).unwrap();
            if let Some(ref want) = reference {
                assert!(rel_diff(&result.u, &want.u) < 1e-8);
                assert!(rel_diff(&result.v, &want.v) < 1e-8);
            } else {
                reference = Some(result);
            }
        }
        // Same straggler set, different timing seed: bit-identical output.
        let run = |seed| {
            let problem = Problem::new(random_matrix(24, 16, 100), 2, 10, 1e-12, 101).unwrap();
            let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![1, 4]), seed);
            factorize_coded(&problem, &mut cluster, 2).unwrap()
        };
        let (a, b) = (run(13), run(777));
        assert_eq!(max_abs_diff(&a.u, &b.u), 0.0);
        assert_eq!(max_abs_diff(&a.v, &b.v), 0.0);
    }

    #[test]
    fn infeasible_partitions_are_rejected_before_any_work() {
        let r = random_matrix(24, 16, 110);
        let problem = Problem::new(r, 2, 5, 1e-12, 111).unwrap();
        // h = 3 needs 11 responses; the cluster has 8 workers.
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 14);
        assert!(matches!(
            factorize_coded(&problem, &mut cluster, 3),
            Err(Error::Infeasible(_))
        ));
        assert!(cluster.traces().is_empty(), "work happened before the check");

        // Straggler budget counts against feasibility too: K=5, s=4, W=8.
        let mut cluster = quiet_cluster(8, StragglerPolicy::RandomPerRound(4), 15);
        let problem = Problem::new(random_matrix(24, 16, 110), 2, 5, 1e-12, 111).unwrap();
        assert!(matches!(
            factorize_coded(&problem, &mut cluster, 2),
            Err(Error::Infeasible(_))
        ));

        // Non-divisible factor height.
        let problem = Problem::new(random_matrix(24, 15, 112), 2, 5, 1e-12, 113).unwrap();
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 16);
        assert!(matches!(
            factorize_coded(&problem, &mut cluster, 2),
            Err(Error::NotDivisible { dim: 15, parts: 2 })
        ));
    }

    #[test]
    fn wide_data_runs_on_the_row_side() {
        let r = random_matrix(16, 24, 120);
        let problem = Problem::new(r.clone(), 2, 6, 1e-12, 121).unwrap();
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![2]), 17);
        let coded = factorize_coded(&problem, &mut cluster, 2).unwrap();
        assert_eq!(coded.u.shape(), (16, 2));
        assert_eq!(coded.v.shape(), (24, 2));
        let baseline = als_baseline(&problem).unwrap();
        let coded_loss = loss(&r, &coded.u, &coded.v).unwrap();
        let base_loss = loss(&r, &baseline.u, &baseline.v).unwrap();
        assert!(
            (coded_loss - base_loss).abs() <= 1e-6 * base_loss.max(1e-300),
            "coded {coded_loss} vs baseline {base_loss}"
        );
    }

    #[test]
    fn coded_loss_history_is_recorded_when_requested() {
        let r = random_matrix(24, 16, 130);
        let problem = Problem::new(r, 2, 4, 1e-12, 131)
            .unwrap()
            .with_loss_tracking(true);
        let mut cluster = quiet_cluster(8, StragglerPolicy::FixedSet(vec![]), 18);
        let result = factorize_coded(&problem, &mut cluster, 2).unwrap();
        assert_eq!(result.loss_history.len(), result.iterations_run);
        assert!(result.loss_history.iter().all(|l| l.is_finite()));
        for pair in result.loss_history.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-9), "loss rose: {pair:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prop_coded_iteration_equals_direct_update(
            seed in 0u64..2000,
            h in 1usize..3,
            w in 5usize..9,
        ) {
            let r = random_matrix(12, 8, seed);
            let d = r.transpose().matmul(&r).unwrap();
            let b0 = initial_factor(8, 2, seed ^ 0xABCD);
            let budget = w - epc::iteration_threshold(h);
            let stragglers: Vec<usize> = (0..budget.min(seed as usize % (budget + 1))).collect();
            let mut cluster = quiet_cluster(w, StragglerPolicy::FixedSet(stragglers), seed);
            let points = EvalPoints::chebyshev(w).unwrap();
            let next = run_iteration(&IterState::new(b0.clone()), &d, &mut cluster, h, &points).unwrap();
            let want = direct_update(&b0, &d).unwrap();
            prop_assert!(rel_diff(&next.b, &want) < 1e-8);
        }
    }
}
