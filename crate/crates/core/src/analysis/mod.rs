//! Closed-form design formulas: storage redundancy, recovery-threshold
//! relations, the optimal partition count under a straggler budget,
//! leading-order complexity estimates, and the sign analysis of the
//! expected-round-time objective used to justify "finer is faster".

use crate::cluster::{self, WorkerProfile, ROYSTON_ALPHA};
use crate::error::{Error, Result};

/// Sufficient-condition constant: when `μ_u·n·√d/(h³·σ_u)` is at least
/// this large, the round-time objective is strictly decreasing in h
/// (valid for W−s ≤ 100, where the standard-normal density at the
/// relevant quantiles stays within [0.246, 0.398]).
pub const DECREASING_CONDITION_BOUND: f64 = 8.5975;

/// A cluster/partition design point with its derived coding quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    pub w: usize,
    pub s: usize,
    pub h: usize,
    /// Storage redundancy μ = W/h² (> 1 at any feasible point).
    pub mu: f64,
    /// Recovery threshold K = h²+h−1.
    pub k: usize,
}

impl DesignPoint {
    /// Derives μ and K, requiring the point to be feasible: the threshold
    /// plus the straggler budget must fit in the cluster.
    pub fn new(w: usize, s: usize, h: usize) -> Result<DesignPoint> {
        let k = crate::epc::iteration_threshold(h);
        if k + s > w {
            return Err(Error::Infeasible(format!(
                "design point (W={w}, s={s}, h={h}) needs {k} responses plus \
                 {s} straggler allowance"
            )));
        }
        Ok(DesignPoint {
            w,
            s,
            h,
            mu: redundancy(w, h)?,
            k,
        })
    }
}

/// Storage redundancy μ = W/h²: each of the W workers holds a 1/h² share
/// of the data matrix. Requires W ≥ h² (redundancy below 1 means the
/// cluster cannot even hold one copy).
pub fn redundancy(w: usize, h: usize) -> Result<f64> {
    if h == 0 {
        return Err(Error::InvalidArgument("partition count must be positive".into()));
    }
    if w < h * h {
        return Err(Error::Infeasible(format!(
            "redundancy needs at least h² = {} workers, got {w}",
            h * h
        )));
    }
    Ok(w as f64 / (h * h) as f64)
}

/// Recovery threshold as a function of redundancy:
/// `K = W/μ + √(W/μ) − 1`. Real-valued: it is an integer (and equals
/// h²+h−1) exactly when W/μ is a perfect square h².
pub fn threshold_from_redundancy(w: usize, mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold formula needs redundancy > 1, got {mu}"
        )));
    }
    let ratio = w as f64 / mu;
    Ok(ratio + ratio.sqrt() - 1.0)
}

/// The largest partition count h whose recovery threshold still fits in
/// the cluster alongside the straggler budget: max h with
/// h²+h−1+s ≤ W. Errors when not even h = 1 fits (W < s+1).
pub fn optimal_partitions(w: usize, s: usize) -> Result<usize> {
    let mut best = None;
    let mut h = 1usize;
    while h * h + h - 1 + s <= w {
        best = Some(h);
        h += 1;
    }
    best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no partition count fits: even h = 1 needs {} workers, got {w}",
            s + 1
        ))
    })
}

/// The closed-form shortcut `⌊√(W + 3/4 − s)⌋` for the optimal partition
/// count. Overshoots [`optimal_partitions`] by one when W−s lies in the
/// band [h², h²+h−2] for some h ≥ 2 (e.g. W=4, s=0: shortcut 2, true
/// optimum 1); exact elsewhere.
pub fn partition_sqrt_heuristic(w: usize, s: usize) -> Result<usize> {
    if w < s + 1 {
        return Err(Error::Infeasible(format!(
            "heuristic needs at least s+1 = {} workers, got {w}",
            s + 1
        )));
    }
    Ok((w as f64 + 0.75 - s as f64).sqrt().floor() as usize)
}

/// Leading-order operation counts (unitless, constant factor 1) for a
/// coded factorization with W workers at redundancy μ, data m×n, latent
/// dimension d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityEstimates {
    /// One-time Gram pre-computation: min{mn², nm²}.
    pub pre_computation: f64,
    /// Per-worker, per-iteration dominant product: n²dμ/W (= n²d/h²).
    pub per_worker: f64,
    /// Master-side encoding per iteration: nd√(Wμ).
    pub encoding: f64,
    /// Master-side decoding per iteration: nd(W/μ + √(W/μ)).
    pub decoding: f64,
}

/// Evaluates the four leading-order counts. `n` is the iterated-factor
/// height (the smaller data dimension once orientation is fixed).
pub fn complexity_estimates(
    w: usize,
    mu: f64,
    m: usize,
    n: usize,
    d: usize,
) -> Result<ComplexityEstimates> {
    if w == 0 || m == 0 || n == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "complexity estimates need positive dimensions".into(),
        ));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "redundancy must be positive, got {mu}"
        )));
    }
    let (wf, mf, nf, df) = (w as f64, m as f64, n as f64, d as f64);
    let ratio = wf / mu; // h² when μ = W/h²
    Ok(ComplexityEstimates {
        pre_computation: (mf * nf * nf).min(nf * mf * mf),
        per_worker: nf * nf * df * mu / wf,
        encoding: nf * df * (wf * mu).sqrt(),
        decoding: nf * df * (ratio + ratio.sqrt()),
    })
}

/// Decoding count parameterized by the partition count instead of the
/// redundancy: nd(h²+h). Equals [`ComplexityEstimates::decoding`]
/// exactly when μ = W/h².
pub fn decode_complexity_h_form(n: usize, d: usize, h: usize) -> f64 {
    (n * d) as f64 * ((h * h + h) as f64)
}

/// Normalized round-time objective
/// `θ₂(h) = μ_u·n·√d/(2σ_u·h²) + Φ⁻¹(ρ(h))/(2h)` with
/// `ρ(h) = (h²+h−1−α)/(W−s−2α+1)` — the expected per-round time divided
/// by 2n√d·σ_u, as a function of a continuous partition count h.
pub fn theta2(h: f64, w: usize, s: usize, n: usize, d: usize, profile: &WorkerProfile) -> Result<f64> {
    let rho = feasible_quantile_arg(h, w, s)?;
    let scale = profile.mu_u * (n as f64) * (d as f64).sqrt() / profile.sigma_u;
    Ok(scale / (2.0 * h * h) + cluster::normal::inv_cdf(rho) / (2.0 * h))
}

/// Exact derivative of [`theta2`] in h:
/// `θ₂′(h) = −μ_u·n·√d/(σ_u·h³)
///          + (2h+1)/(2h·(W−s−2α+1)·φ(Φ⁻¹(ρ)))
///          − Φ⁻¹(ρ)/(2h²)`.
/// Negative θ₂′ means a finer partitioning lowers the expected round
/// time. Returns −∞ in the σ_u → 0 limit (the deterministic term
/// dominates).
pub fn theta2_derivative(
    h: f64,
    w: usize,
    s: usize,
    n: usize,
    d: usize,
    profile: &WorkerProfile,
) -> Result<f64> {
    let rho = feasible_quantile_arg(h, w, s)?;
    let span = w as f64 - s as f64 - 2.0 * ROYSTON_ALPHA + 1.0;
    let quantile = cluster::normal::inv_cdf(rho);
    let deterministic = -profile.mu_u * (n as f64) * (d as f64).sqrt() / (profile.sigma_u * h * h * h);
    let quantile_growth = (2.0 * h + 1.0) / (2.0 * h * span * cluster::normal::pdf(quantile));
    let rescaling = -quantile / (2.0 * h * h);
    Ok(deterministic + quantile_growth + rescaling)
}

/// Sufficient condition for θ₂′(h) < 0: `μ_u·n·√d/(h³·σ_u) ≥ 8.5975`.
/// Valid for W−s ≤ 100.
pub fn theta2_condition_holds(h: f64, n: usize, d: usize, profile: &WorkerProfile) -> bool {
    profile.mu_u * (n as f64) * (d as f64).sqrt() / (h * h * h * profile.sigma_u)
        >= DECREASING_CONDITION_BOUND
}

/// Validates (h, W, s) and returns the order-statistic quantile argument
/// ρ(h) = (h²+h−1−α)/(W−s−2α+1), which feasibility keeps inside (0, 1).
fn feasible_quantile_arg(h: f64, w: usize, s: usize) -> Result<f64> {
    if !(h.is_finite() && h >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "partition count must be at least 1, got {h}"
        )));
    }
    let k = h * h + h - 1.0;
    let live = w as f64 - s as f64;
    if k > live {
        return Err(Error::Infeasible(format!(
            "partition count {h} needs {k:.2} responses but only {live} workers \
             can respond (W = {w}, s = {s})"
        )));
    }
    Ok((k - ROYSTON_ALPHA) / (live - 2.0 * ROYSTON_ALPHA + 1.0))
}
