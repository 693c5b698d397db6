//! Network data model, weight-file formats and the seeded random generator.

mod format;
mod random;

pub use format::{load_network, load_network_any, network_from_bytes, network_from_json, network_to_bytes, network_to_json, save_network, NetFormat};
pub use random::{bench_dims, random_network, NormalStream, DEFAULT_NORM_RANGE, RNG_VERSION};

use crate::error::{Error, Result};
use crate::spectral::{Matrix, Vector};

/// Slope bounds `[alpha, beta]` of the elementwise activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationBounds {
    alpha: f64,
    beta: f64,
}

impl ActivationBounds {
    /// ReLU, sigmoid, tanh and friends.
    pub const RELU: ActivationBounds = ActivationBounds {
        alpha: 0.0,
        beta: 1.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Value(format!(
                "activation slopes must be finite, got [{alpha}, {beta}]"
            )));
        }
        if alpha >= beta {
            return Err(Error::Value(format!(
                "activation slopes need alpha < beta, got [{alpha}, {beta}]"
            )));
        }
        Ok(ActivationBounds { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `alpha * beta`
    pub fn p(&self) -> f64 {
        self.alpha * self.beta
    }

    /// `(alpha + beta) / 2`
    pub fn m(&self) -> f64 {
        (self.alpha + self.beta) / 2.0
    }

    /// The compositional estimators only handle slopes in `[0, 1]`.
    pub fn is_unit_relu(&self) -> bool {
        self.alpha == 0.0 && self.beta == 1.0
    }
}

impl Default for ActivationBounds {
    fn default() -> Self {
        Self::RELU
    }
}

/// Weight `W` (`d_i × d_{i-1}`) and bias `b` (`d_i`) of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    w: Matrix,
    b: Vector,
}

impl LayerWeights {
    pub fn new(w: Matrix, b: Vector) -> Result<Self> {
        let layer = LayerWeights { w, b };
        layer.validate(1)?;
        Ok(layer)
    }

    pub fn without_bias(w: Matrix) -> Result<Self> {
        let rows = w.nrows();
        Self::new(w, Vector::zeros(rows))
    }

    pub fn weight(&self) -> &Matrix {
        &self.w
    }

    pub fn bias(&self) -> &Vector {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.w.nrows()
    }

    pub fn cols(&self) -> usize {
        self.w.ncols()
    }

    fn validate(&self, layer: usize) -> Result<()> {
        if self.w.nrows() == 0 || self.w.ncols() == 0 {
            return Err(Error::shape(layer, "weight matrix has an empty dimension"));
        }
        if self.b.len() != self.w.nrows() {
            return Err(Error::shape(
                layer,
                format!("bias has length {}, expected {}", self.b.len(), self.w.nrows()),
            ));
        }
        if self.w.iter().chain(self.b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Value(format!("layer {layer} has a non-finite entry")));
        }
        if self.w.iter().all(|&x| x == 0.0) {
            return Err(Error::Value(format!("layer {layer} has an all-zero weight matrix")));
        }
        Ok(())
    }
}

/// A feed-forward network `z ↦ W_l φ(… φ(W_1 z + b_1) …) + b_l`.
///
/// The last layer is linear. Invariants are checked when the value is built
/// and the fields cannot be mutated afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerWeights>,
    activation: ActivationBounds,
}

impl Network {
    pub fn new(layers: Vec<LayerWeights>, activation: ActivationBounds) -> Result<Self> {
        let net = Network { layers, activation };
        net.validate()?;
        Ok(net)
    }

    /// Bias-free network with ReLU-class activation.
    pub fn from_weights(weights: Vec<Matrix>) -> Result<Self> {
        let layers = weights
            .into_iter()
            .map(|w| {
                let rows = w.nrows();
                LayerWeights { w, b: Vector::zeros(rows) }
            })
            .collect();
        Self::new(layers, ActivationBounds::RELU)
    }

    /// `depth` identity layers of size `width`.
    pub fn identity(depth: usize, width: usize) -> Result<Self> {
        Self::from_weights(vec![Matrix::identity(width, width); depth])
    }

    /// One neuron per layer with the given scalar weights.
    pub fn scalar_chain(weights: &[f64]) -> Result<Self> {
        Self::from_weights(weights.iter().map(|&w| Matrix::from_element(1, 1, w)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape(0, "network needs at least one layer"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i + 1)?;
            if i > 0 {
                let prev = self.layers[i - 1].rows();
                if layer.cols() != prev {
                    return Err(Error::shape(
                        i + 1,
                        format!(
                            "weight has {} columns but layer {} outputs {}",
                            layer.cols(),
                            i,
                            prev
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[LayerWeights] {
        &self.layers
    }

    pub fn activation(&self) -> ActivationBounds {
        self.activation
    }

    /// Number of weight layers `l`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `W_{i+1}` for zero-based `i`.
    pub fn weight(&self, i: usize) -> &Matrix {
        &self.layers[i].w
    }

    pub fn weights(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().map(|l| &l.w)
    }

    /// `[d_0, d_1, …, d_l]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].cols())
            .chain(self.layers.iter().map(LayerWeights::rows))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows()
    }

    /// `d_1 + … + d_{l-1}`.
    pub fn hidden_size(&self) -> usize {
        self.layers[..self.layers.len() - 1].iter().map(LayerWeights::rows).sum()
    }

    /// Consecutive layers `range` as a standalone network (last layer linear).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Network> {
        if range.start >= range.end || range.end > self.layers.len() {
            return Err(Error::Argument(format!(
                "layer range {range:?} is invalid for a depth-{} network",
                self.layers.len()
            )));
        }
        Ok(Network {
            layers: self.layers[range].to_vec(),
            activation: self.activation,
        })
    }

    /// Evaluates the network with the piecewise-linear activation whose
    /// slopes are `beta` on positive and `alpha` on negative inputs
    /// (ReLU for `[0, 1]`).
    pub fn forward(&self, z: &Vector) -> Vector {
        let mut x = z.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut v = &layer.w * &x + &layer.b;
            if i < last {
                v.apply(|t| *t = self.activate(*t));
            }
            x = v;
        }
        x
    }

    pub(crate) fn activate(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.activation.beta * t
        } else {
            self.activation.alpha * t
        }
    }

    pub(crate) fn slope(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.activation.beta
        } else {
            self.activation.alpha
        }
    }
}
