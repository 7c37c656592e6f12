//! Discrete-event master/worker cluster simulation.
//!
//! Workers never run real code here: each round draws per-worker compute
//! times from a Gaussian element-cost model, applies a straggler policy,
//! and reports the K-th order statistic as the round's elapsed time. The
//! matrix payloads themselves are computed deterministically by callbacks,
//! so simulated timing and numerical results stay strictly separated: the
//! decode set is chosen by worker id, never by the timing draws.
//!
//! The module also carries the closed-form timing estimates used for
//! design-space exploration: the Royston order-statistic approximation and
//! the per-round expected time of the dominant protocol stage.

pub mod normal;

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::Write;

/// Royston's plotting-position constant for normal order statistics.
pub const ROYSTON_ALPHA: f64 = 0.375;

/// Offset separating the straggler-policy RNG stream from the timing
/// stream derived from the same user-facing seed.
const POLICY_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Per-worker compute-cost model: seconds per elementwise multiplication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerProfile {
    /// Mean seconds per multiplication (μ_u > 0).
    pub mu_u: f64,
    /// Standard deviation per multiplication (σ_u ≥ 0).
    pub sigma_u: f64,
}

impl WorkerProfile {
    pub fn new(mu_u: f64, sigma_u: f64) -> Result<Self> {
        if !(mu_u.is_finite() && mu_u > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mean time per multiplication must be positive, got {mu_u}"
            )));
        }
        if !(sigma_u.is_finite() && sigma_u >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time std per multiplication must be nonnegative, got {sigma_u}"
            )));
        }
        Ok(WorkerProfile { mu_u, sigma_u })
    }
}

/// How stragglers are injected each round.
#[derive(Debug, Clone, PartialEq)]
pub enum StragglerPolicy {
    /// These workers never respond, every round.
    FixedSet(Vec<usize>),
    /// A fresh uniformly random set of this many workers never responds
    /// each round (drawn from a stream independent of the timing draws).
    RandomPerRound(usize),
    /// These workers respond, but slower by the given factor (> 1).
    DelayFactor { workers: Vec<usize>, factor: f64 },
}

impl StragglerPolicy {
    /// Number of workers that can fail to respond under this policy.
    /// Delayed workers still respond, so they consume no budget.
    pub fn budget(&self) -> usize {
        match self {
            StragglerPolicy::FixedSet(ids) => ids.len(),
            StragglerPolicy::RandomPerRound(s) => *s,
            StragglerPolicy::DelayFactor { .. } => 0,
        }
    }
}

/// Full simulator configuration: worker count, per-worker cost profiles,
/// straggler policy, and the seed that makes traces reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub workers: usize,
    pub profiles: Vec<WorkerProfile>,
    pub policy: StragglerPolicy,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        workers: usize,
        profiles: Vec<WorkerProfile>,
        policy: StragglerPolicy,
        seed: u64,
    ) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        if profiles.len() != workers {
            return Err(Error::InvalidArgument(format!(
                "got {} profiles for {workers} workers",
                profiles.len()
            )));
        }
        match &policy {
            StragglerPolicy::FixedSet(ids) => {
                if let Some(&bad) = ids.iter().find(|&&i| i >= workers) {
                    return Err(Error::InvalidArgument(format!(
                        "straggler id {bad} out of range for {workers} workers"
                    )));
                }
            }
            StragglerPolicy::RandomPerRound(s) => {
                if *s >= workers {
                    return Err(Error::InvalidArgument(format!(
                        "cannot make {s} of {workers} workers stragglers"
                    )));
                }
            }
            StragglerPolicy::DelayFactor { workers: ids, factor } => {
                if let Some(&bad) = ids.iter().find(|&&i| i >= workers) {
                    return Err(Error::InvalidArgument(format!(
                        "delayed worker id {bad} out of range for {workers} workers"
                    )));
                }
                if !(factor.is_finite() && *factor > 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "delay factor must exceed 1, got {factor}"
                    )));
                }
            }
        }
        Ok(SimConfig {
            workers,
            profiles,
            policy,
            seed,
        })
    }

    /// All workers share one profile.
    pub fn uniform(
        workers: usize,
        profile: WorkerProfile,
        policy: StragglerPolicy,
        seed: u64,
    ) -> Result<Self> {
        SimConfig::new(workers, vec![profile; workers], policy, seed)
    }
}

/// Timing record of one simulated round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub round: usize,
    /// Per-worker completion time in seconds; infinity marks a worker that
    /// never responded this round.
    pub completion: Vec<f64>,
    /// The K earliest finishers (ties broken by worker id), stored as
    /// ascending worker ids.
    pub responders: Vec<usize>,
    /// K-th smallest completion time = the slowest responder's time.
    pub elapsed: f64,
}

/// One Gaussian compute-time draw for a task of `elements` multiplications:
/// mean `elements·μ_u`, variance `elements·σ_u²`, redrawn while negative.
/// With σ_u = 0 the time is exact and no randomness is consumed.
pub fn sample_task_time<R: Rng + ?Sized>(
    profile: &WorkerProfile,
    elements: u64,
    rng: &mut R,
) -> f64 {
    assert!(elements >= 1, "a task must contain at least one multiplication");
    let mean = elements as f64 * profile.mu_u;
    if profile.sigma_u == 0.0 {
        return mean;
    }
    let sd = (elements as f64).sqrt() * profile.sigma_u;
    let normal = Normal::new(mean, sd).expect("validated profile");
    loop {
        let t = normal.sample(rng);
        if t >= 0.0 {
            return t;
        }
    }
}

/// The simulator: owns the two RNG streams (timing and straggler policy)
/// and the accumulated round traces.
#[derive(Debug, Clone)]
pub struct Cluster {
    config: SimConfig,
    timing_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    rounds_run: usize,
    traces: Vec<RoundTrace>,
}

impl Cluster {
    pub fn new(config: SimConfig) -> Cluster {
        let timing_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let policy_rng = ChaCha8Rng::seed_from_u64(config.seed ^ POLICY_STREAM_SALT);
        Cluster {
            config,
            timing_rng,
            policy_rng,
            rounds_run: 0,
            traces: Vec::new(),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn workers(&self) -> usize {
        self.config.workers
    }

    pub fn traces(&self) -> &[RoundTrace] {
        &self.traces
    }

    /// Simulates one round: per-worker times are drawn in worker-id order
    /// (so a prefix of workers sees identical draws regardless of W or K),
    /// the policy is applied, and the K earliest finishers become the
    /// round's responder set.
    pub fn simulate_round(&mut self, tasks: &[u64], k: usize) -> Result<RoundTrace> {
        let w = self.config.workers;
        if tasks.len() != w {
            return Err(Error::InvalidArgument(format!(
                "got {} task sizes for {w} workers",
                tasks.len()
            )));
        }
        if k == 0 || k > w {
            return Err(Error::InvalidArgument(format!(
                "responder count {k} out of range for {w} workers"
            )));
        }
        let mut completion: Vec<f64> = (0..w)
            .map(|i| sample_task_time(&self.config.profiles[i], tasks[i], &mut self.timing_rng))
            .collect();
        match &self.config.policy {
            StragglerPolicy::FixedSet(ids) => {
                for &i in ids {
                    completion[i] = f64::INFINITY;
                }
            }
            StragglerPolicy::RandomPerRound(s) => {
                for i in sample_distinct(w, *s, &mut self.policy_rng) {
                    completion[i] = f64::INFINITY;
                }
            }
            StragglerPolicy::DelayFactor { workers, factor } => {
                for &i in workers {
                    completion[i] *= factor;
                }
            }
        }
        let mut order: Vec<usize> = (0..w).filter(|&i| completion[i].is_finite()).collect();
        if order.len() < k {
            return Err(Error::InsufficientResponses {
                needed: k,
                got: order.len(),
            });
        }
        order.sort_by(|&a, &b| {
            completion[a]
                .partial_cmp(&completion[b])
                .expect("finite times")
                .then(a.cmp(&b))
        });
        let mut responders = order[..k].to_vec();
        let elapsed = responders
            .iter()
            .map(|&i| completion[i])
            .fold(f64::NEG_INFINITY, f64::max);
        responders.sort_unstable();
        let trace = RoundTrace {
            round: self.rounds_run,
            completion,
            responders,
            elapsed,
        };
        self.rounds_run += 1;
        self.traces.push(trace.clone());
        Ok(trace)
    }

    /// The K lowest-id workers that responded in the given round's trace
    /// (enumeration order is already ascending by id).
    fn decode_set(trace: &RoundTrace, k: usize) -> Vec<usize> {
        trace
            .completion
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_finite())
            .map(|(i, _)| i)
            .take(k)
            .collect()
    }

    /// One protocol step: simulates the timing round, then computes the
    /// payloads of the decode set — the K lowest-id responding workers —
    /// via the callback. Keying the decode set on worker ids (not finish
    /// order) makes the numerical results independent of the timing seed.
    pub fn run_protocol_round<T>(
        &mut self,
        tasks: &[u64],
        k: usize,
        compute: impl Fn(usize) -> Result<T>,
    ) -> Result<(Vec<(usize, T)>, RoundTrace)> {
        let trace = self.simulate_round(tasks, k)?;
        let mut shards = Vec::with_capacity(k);
        for w in Self::decode_set(&trace, k) {
            shards.push((w, compute(w)?));
        }
        Ok((shards, trace))
    }

    /// Writes every recorded round as CSV rows:
    /// `round, worker_id, completion_time, used (0/1), elapsed`.
    pub fn write_trace_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "round,worker_id,completion_time,used,elapsed")?;
        for trace in &self.traces {
            for (w, t) in trace.completion.iter().enumerate() {
                let used = trace.responders.binary_search(&w).is_ok() as u8;
                writeln!(out, "{},{},{},{},{}", trace.round, w, t, used, trace.elapsed)?;
            }
        }
        Ok(())
    }
}

/// `count` distinct values from `0..n`, via a partial Fisher-Yates shuffle.
fn sample_distinct<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(count <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

/// Royston's approximation of the expected r-th order statistic of n
/// i.i.d. N(μ, σ²) samples: `μ + Φ⁻¹((r − α)/(n − 2α + 1))·σ`, α = 0.375.
pub fn expected_order_stat(r: usize, n: usize, mu: f64, sigma: f64) -> Result<f64> {
    if r < 1 || r > n {
        return Err(Error::InvalidArgument(format!(
            "order statistic rank {r} out of range 1..={n}"
        )));
    }
    let p = (r as f64 - ROYSTON_ALPHA) / (n as f64 - 2.0 * ROYSTON_ALPHA + 1.0);
    Ok(mu + normal::inv_cdf(p) * sigma)
}

/// Closed-form estimate of one round's elapsed time for the dominant
/// stage: each of the W−s live workers multiplies an (n/h)×(n/h) block by
/// an (n/h)×d block (n²d/h² multiplications), and the round ends at the
/// K-th finisher, K = h²+h−1:
///
/// `n²d/h²·μ_u + Φ⁻¹((K−α)/(W−s−2α+1))·(n√d/h)·σ_u`
pub fn expected_round_time(
    h: usize,
    w: usize,
    s: usize,
    n: usize,
    d: usize,
    profile: &WorkerProfile,
) -> Result<f64> {
    if h == 0 {
        return Err(Error::InvalidArgument("partition count must be positive".into()));
    }
    let k = h * h + h - 1;
    if s >= w || k > w - s {
        return Err(Error::Infeasible(format!(
            "h={h} needs {k} responses but only {} workers stay live (W={w}, s={s})",
            w.saturating_sub(s)
        )));
    }
    let mean = (n * n) as f64 * d as f64 / (h * h) as f64 * profile.mu_u;
    let scale = (d as f64).sqrt() * n as f64 / h as f64 * profile.sigma_u;
    expected_order_stat(k, w - s, mean, scale)
}

/// The four per-worker compute tasks inside one iteration, with their
/// multiply-accumulate counts for an l×d factor at partition count h.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationStage {
    /// Grid-encoded D times right-encoded B: (l/h)·(l/h)·d.
    EProduct,
    /// Left-encoded Bᵀ times right-encoded B: (l/h)·d².
    Gram,
    /// Left-encoded Bᵀ times right-encoded E: (l/h)·d².
    CrossGram,
    /// Right-encoded E times the d×d combiner: (l/h)·d².
    Update,
}

impl IterationStage {
    /// Elementwise multiplication count of this stage's per-worker task.
    /// Non-divisible l rounds the block size up, matching the zero-padding
    /// the factorization pipeline applies before partitioning.
    pub fn elements(&self, l: usize, d: usize, h: usize) -> u64 {
        let block = l.div_ceil(h) as u64;
        match self {
            IterationStage::EProduct => block * block * d as u64,
            IterationStage::Gram | IterationStage::CrossGram | IterationStage::Update => {
                block * d as u64 * d as u64
            }
        }
    }
}
