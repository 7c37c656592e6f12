//! Flat key=value experiment configuration with command-line overrides.
//!
//! The same keys work in a config file (one `key=value` per line, `#`
//! comments) and as `--key value` command-line overrides; overrides win.
//! The effective configuration echoes back through [`ExperimentConfig::echo`]
//! in a form that reparses to the identical configuration.

use coded_als::cluster::StragglerPolicy;
use coded_als::{Error, Result};
use std::path::{Path, PathBuf};

/// Partition count: a fixed value or "auto" (largest feasible).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionChoice {
    Auto,
    Fixed(usize),
}

/// Which workers straggle in the simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyChoice {
    /// `s` uniformly chosen non-responders per round.
    Random,
    /// The listed worker ids never respond.
    Fixed(Vec<usize>),
    /// The listed worker ids respond late by `delay_factor`.
    Delay(Vec<usize>),
}

/// All experiment parameters. Desk-scale defaults keep every command
/// under a minute; the timing constants `mu_u`/`sigma_u` are arbitrary
/// placeholders for real cluster calibration and freely overridable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Data matrix height.
    pub m: usize,
    /// Data matrix width.
    pub n: usize,
    /// Latent dimension.
    pub d: usize,
    /// Iteration budget (key `T`).
    pub t: usize,
    /// Cluster size.
    pub w: usize,
    /// Straggler budget for the random policy.
    pub s: usize,
    pub policy: PolicyChoice,
    /// Slowdown multiplier for the delay policy.
    pub delay_factor: f64,
    pub h: PartitionChoice,
    /// Mean seconds per multiplication.
    pub mu_u: f64,
    /// Standard deviation of seconds per multiplication.
    pub sigma_u: f64,
    /// Synthetic-data noise level.
    pub noise_std: f64,
    pub seed: u64,
    /// Monte Carlo repetitions per sweep cell.
    pub rounds: usize,
    pub output_dir: PathBuf,
    /// Row values (cluster sizes) of the sweep grid.
    pub k_list: Vec<usize>,
    /// Column values (partition counts) of the sweep grid.
    pub h_list: Vec<usize>,
    /// Convergence threshold on the relative factor change.
    pub tol: f64,
    /// Record per-iteration loss in factorization reports.
    pub track_loss: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 240,
            n: 160,
            d: 8,
            t: 10,
            w: 24,
            s: 2,
            policy: PolicyChoice::Random,
            delay_factor: 4.0,
            h: PartitionChoice::Auto,
            mu_u: 1e-7,
            sigma_u: 2e-8,
            noise_std: 0.1,
            seed: 7,
            rounds: 1000,
            output_dir: PathBuf::from("out"),
            k_list: vec![10, 20, 30, 40, 50],
            h_list: vec![2, 3, 4, 5, 6],
            tol: 1e-12,
            track_loss: false,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "m", "n", "d", "T", "W", "s", "policy", "straggler_ids", "delay_factor", "h", "mu_u",
    "sigma_u", "noise_std", "seed", "rounds", "output_dir", "k_list", "h_list", "tol",
    "track_loss",
];

fn config_err(msg: String) -> Error {
    Error::Config(msg)
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| config_err(format!("{key} expects a non-negative integer, got '{value}'")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| config_err(format!("{key} expects a non-negative integer, got '{value}'")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| config_err(format!("{key} expects a number, got '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| parse_usize(key, item.trim()))
        .collect()
}

fn render_list(list: &[usize]) -> String {
    list.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "m" => self.m = parse_usize(key, value)?,
            "n" => self.n = parse_usize(key, value)?,
            "d" => self.d = parse_usize(key, value)?,
            "T" => self.t = parse_usize(key, value)?,
            "W" => self.w = parse_usize(key, value)?,
            "s" => self.s = parse_usize(key, value)?,
            "policy" => {
                self.policy = match value {
                    "random" => PolicyChoice::Random,
                    "fixed" => PolicyChoice::Fixed(match &self.policy {
                        PolicyChoice::Fixed(ids) | PolicyChoice::Delay(ids) => ids.clone(),
                        PolicyChoice::Random => Vec::new(),
                    }),
                    "delay" => PolicyChoice::Delay(match &self.policy {
                        PolicyChoice::Fixed(ids) | PolicyChoice::Delay(ids) => ids.clone(),
                        PolicyChoice::Random => Vec::new(),
                    }),
                    other => {
                        return Err(config_err(format!(
                            "policy must be random, fixed, or delay; got '{other}'"
                        )))
                    }
                }
            }
            "straggler_ids" => {
                let ids = parse_list(key, value)?;
                self.policy = match &self.policy {
                    PolicyChoice::Delay(_) => PolicyChoice::Delay(ids),
                    _ => PolicyChoice::Fixed(ids),
                };
            }
            "delay_factor" => self.delay_factor = parse_f64(key, value)?,
            "h" => {
                self.h = if value == "auto" {
                    PartitionChoice::Auto
                } else {
                    PartitionChoice::Fixed(parse_usize(key, value)?)
                }
            }
            "mu_u" => self.mu_u = parse_f64(key, value)?,
            "sigma_u" => self.sigma_u = parse_f64(key, value)?,
            "noise_std" => self.noise_std = parse_f64(key, value)?,
            "seed" => self.seed = parse_u64(key, value)?,
            "rounds" => self.rounds = parse_usize(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "k_list" => self.k_list = parse_list(key, value)?,
            "h_list" => self.h_list = parse_list(key, value)?,
            "tol" => self.tol = parse_f64(key, value)?,
            "track_loss" => {
                self.track_loss = match value {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => {
                        return Err(config_err(format!(
                            "track_loss expects 0/1 or true/false, got '{other}'"
                        )))
                    }
                }
            }
            unknown => {
                return Err(config_err(format!(
                    "unknown configuration key '{unknown}'; known keys: {}",
                    KNOWN_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Parses a flat key=value file on top of the current values.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                config_err(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// The effective configuration as key=value lines, reparseable to an
    /// identical configuration.
    pub fn echo(&self) -> String {
        let mut lines = vec![
            format!("m={}", self.m),
            format!("n={}", self.n),
            format!("d={}", self.d),
            format!("T={}", self.t),
            format!("W={}", self.w),
            format!("s={}", self.s),
        ];
        match &self.policy {
            PolicyChoice::Random => lines.push("policy=random".into()),
            PolicyChoice::Fixed(ids) => {
                lines.push("policy=fixed".into());
                lines.push(format!("straggler_ids={}", render_list(ids)));
            }
            PolicyChoice::Delay(ids) => {
                lines.push("policy=delay".into());
                lines.push(format!("straggler_ids={}", render_list(ids)));
            }
        }
        lines.push(format!("delay_factor={}", self.delay_factor));
        match self.h {
            PartitionChoice::Auto => lines.push("h=auto".into()),
            PartitionChoice::Fixed(h) => lines.push(format!("h={h}")),
        }
        lines.extend([
            format!("mu_u={:e}", self.mu_u),
            format!("sigma_u={:e}", self.sigma_u),
            format!("noise_std={}", self.noise_std),
            format!("seed={}", self.seed),
            format!("rounds={}", self.rounds),
            format!("output_dir={}", self.output_dir.display()),
            format!("k_list={}", render_list(&self.k_list)),
            format!("h_list={}", render_list(&self.h_list)),
            format!("tol={:e}", self.tol),
            format!("track_loss={}", if self.track_loss { 1 } else { 0 }),
        ]);
        lines.join("\n") + "\n"
    }

    /// Basic value checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.d == 0 {
            return Err(config_err(format!(
                "dimensions must be positive, got m={}, n={}, d={}",
                self.m, self.n, self.d
            )));
        }
        if self.d > self.m.min(self.n) {
            return Err(config_err(format!(
                "latent dimension d={} exceeds min(m,n)={}",
                self.d,
                self.m.min(self.n)
            )));
        }
        if self.t == 0 {
            return Err(config_err("T must be at least 1".into()));
        }
        if self.w == 0 {
            return Err(config_err("W must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(config_err("rounds must be at least 1".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(config_err(format!(
                "noise_std must be a non-negative number, got {}",
                self.noise_std
            )));
        }
        if !(self.mu_u.is_finite() && self.mu_u > 0.0) {
            return Err(config_err(format!("mu_u must be positive, got {}", self.mu_u)));
        }
        if !(self.sigma_u.is_finite() && self.sigma_u >= 0.0) {
            return Err(config_err(format!(
                "sigma_u must be non-negative, got {}",
                self.sigma_u
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(config_err(format!("tol must be positive, got {}", self.tol)));
        }
        match &self.policy {
            PolicyChoice::Random => {
                if self.s >= self.w {
                    return Err(config_err(format!(
                        "straggler budget s={} must be below W={}",
                        self.s, self.w
                    )));
                }
            }
            PolicyChoice::Fixed(ids) | PolicyChoice::Delay(ids) => {
                if let Some(&bad) = ids.iter().find(|&&id| id >= self.w) {
                    return Err(config_err(format!(
                        "straggler id {bad} out of range for W={}",
                        self.w
                    )));
                }
            }
        }
        if matches!(self.policy, PolicyChoice::Delay(_)) && !(self.delay_factor > 1.0) {
            return Err(config_err(format!(
                "delay_factor must exceed 1, got {}",
                self.delay_factor
            )));
        }
        Ok(())
    }

    /// The simulator policy this configuration describes.
    pub fn straggler_policy(&self) -> StragglerPolicy {
        match &self.policy {
            PolicyChoice::Random => {
                if self.s == 0 {
                    StragglerPolicy::FixedSet(Vec::new())
                } else {
                    StragglerPolicy::RandomPerRound(self.s)
                }
            }
            PolicyChoice::Fixed(ids) => StragglerPolicy::FixedSet(ids.clone()),
            PolicyChoice::Delay(ids) => StragglerPolicy::DelayFactor {
                workers: ids.clone(),
                factor: self.delay_factor,
            },
        }
    }

    /// Resolves the partition count: a fixed h as given, or the largest
    /// feasible one for (W, straggler budget).
    pub fn resolve_h(&self) -> Result<usize> {
        match self.h {
            PartitionChoice::Fixed(h) => {
                if h == 0 {
                    return Err(config_err("h must be at least 1 (or 'auto')".into()));
                }
                Ok(h)
            }
            PartitionChoice::Auto => {
                coded_als::analysis::optimal_partitions(self.w, self.straggler_policy().budget())
            }
        }
    }
}
