//! Seeded random networks.
//!
//! Generator `chacha20-polar-v1`: a ChaCha20 stream (`rand_chacha`, seeded
//! through `SeedableRng::seed_from_u64`), uniforms built from the top 53 bits
//! of each `u64`, and standard normals from the Marsaglia polar method. For
//! each layer the weight entries are drawn in row-major order, then one
//! uniform picks the target spectral norm.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::Network;
use crate::error::{Error, Result};
use crate::spectral::{spectral_norm, Matrix};

pub const RNG_VERSION: &str = "chacha20-polar-v1";

/// Range the per-layer spectral norms are drawn from.
pub const DEFAULT_NORM_RANGE: [f64; 2] = [0.4, 1.8];

pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent sub-stream `stream` of the generator seeded by `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NormalStream { rng, spare: None }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(x) = self.spare.take() {
            return x;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let k = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * k);
                return u * k;
            }
        }
    }
}

/// `[4, width, …, width, 1]` with `depth` weight layers: the input/output
/// sizes used for the random-network experiments.
pub fn bench_dims(depth: usize, width: usize) -> Vec<usize> {
    let mut dims = vec![4];
    dims.extend(std::iter::repeat(width).take(depth.saturating_sub(1)));
    dims.push(1);
    dims
}

/// Random bias-free ReLU network with layer sizes `dims = [d_0, …, d_l]`.
///
/// Each `W_i` has i.i.d. standard normal entries and is rescaled so that
/// its spectral norm equals a uniform draw from `norm_range`.
pub fn random_network(dims: &[usize], seed: u64, norm_range: [f64; 2]) -> Result<Network> {
    if dims.len() < 2 {
        return Err(Error::Argument("need at least one layer (two dimensions)".into()));
    }
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(Error::Argument(format!("dimension {i} is zero")));
    }
    let [lo, hi] = norm_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::Argument(format!(
            "norm range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }

    let mut stream = NormalStream::new(seed);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    for (i, pair) in dims.windows(2).enumerate() {
        let (cols, rows) = (pair[0], pair[1]);
        let mut w = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                w[(r, c)] = stream.normal();
            }
        }
        let target = lo + (hi - lo) * stream.uniform();
        let norm = spectral_norm(&w)?;
        if norm == 0.0 {
            return Err(Error::Value(format!("layer {} drew an all-zero matrix", i + 1)));
        }
        w *= target / norm;
        weights.push(w);
    }
    Network::from_weights(weights)
}
