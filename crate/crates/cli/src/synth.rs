//! Seeded synthetic data: a planted low-rank product plus Gaussian noise.

use coded_als::{Error, Matrix, Result};

/// Seed salts keeping the three draws (left factor, right factor, noise)
/// on independent streams derived from one user-facing seed.
const RIGHT_FACTOR_SALT: u64 = 0x517c_c1b7_2722_0a95;
const NOISE_SALT: u64 = 0x2545_f491_4f6c_dd1d;

/// A generated instance with its planted factors kept for diagnostics.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// R = U*V*ᵀ + noise_std·N, all entries i.i.d. standard normal.
    pub data: Matrix,
    pub planted_u: Matrix,
    pub planted_v: Matrix,
}

/// Generates R = U*V*ᵀ + N with i.i.d. standard-normal factors and noise
/// scaled by `noise_std`, all determined by `seed`.
pub fn generate_synthetic(
    m: usize,
    n: usize,
    d: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticData> {
    if m == 0 || n == 0 || d == 0 || d > m.min(n) {
        return Err(Error::Config(format!(
            "synthetic data needs 1 ≤ d ≤ min(m,n), got m={m}, n={n}, d={d}"
        )));
    }
    if !(noise_std.is_finite() && noise_std >= 0.0) {
        return Err(Error::Config(format!(
            "noise_std must be a non-negative number, got {noise_std}"
        )));
    }
    let planted_u = Matrix::seeded_standard_normal(m, d, seed);
    let planted_v = Matrix::seeded_standard_normal(n, d, seed ^ RIGHT_FACTOR_SALT);
    let mut data = planted_u.matmul(&planted_v.transpose())?;
    if noise_std > 0.0 {
        let noise = Matrix::seeded_standard_normal(m, n, seed ^ NOISE_SALT);
        data = data.add(&noise.scale(noise_std)?)?;
    }
    Ok(SyntheticData {
        data,
        planted_u,
        planted_v,
    })
}
