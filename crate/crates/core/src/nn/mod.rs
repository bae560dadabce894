//! Minimal dense neural-network core: forward/backward passes over stacks
//! of fully connected layers, Adam optimization, regression training with
//! early stopping, k-fold cross-validation, and grid search.
//!
//! Everything is 64-bit and deterministic given a seed. Shape mismatches
//! between a network and its inputs are programmer errors and panic via
//! `assert!`; data-level problems (bad datasets, bad configs) surface as
//! [`NnError`].

mod adam;
mod dataset;
mod train;

pub use adam::{adam_step, AdamState};
pub use dataset::{r2_score, Dataset, R2Score};
pub use train::{
    grid_search, kfold_cv, train_regressor, EpochStats, GridCell, GridResult, KfoldReport,
    TrainConfig, TrainHistory,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dataset has {rows} rows, need at least {min}")]
    DatasetTooSmall { rows: usize, min: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model io failed for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Elementwise nonlinearity applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed in terms of the activation output.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Identity => write!(f, "identity"),
        }
    }
}

/// Architecture of a regression MLP: layer widths from input to output,
/// one hidden activation, identity output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Layer widths, input first and output last. At least two entries.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    /// Regressor spec from input/hidden/output widths with the given hidden
    /// activation and identity output.
    pub fn regressor(input: usize, hidden: &[usize], output: usize, hidden_activation: Activation) -> Self {
        let mut layer_sizes = Vec::with_capacity(hidden.len() + 2);
        layer_sizes.push(input);
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(output);
        MlpSpec { layer_sizes, hidden_activation, output_activation: Activation::Identity }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_sizes.len() < 2 {
            return Err(NnError::InvalidSpec(format!(
                "need at least 2 layer sizes, got {}",
                self.layer_sizes.len()
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(NnError::InvalidSpec("layer sizes must be >= 1".into()));
        }
        if self.output_activation != Activation::Identity {
            return Err(NnError::InvalidSpec(format!(
                "output activation must be identity, got {}",
                self.output_activation
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }
}

/// One dense layer: `y = act(W x + b)` with `W` stored row-major as
/// `out_dim` rows of `in_dim` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero biases.
    fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.random_range(-limit..limit)).collect();
        DenseLayer { in_dim, out_dim, activation, weights, biases: vec![0.0; out_dim] }
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.biases[o];
            out.push(self.activation.apply(z));
        }
    }
}

/// Full parameter set of a dense network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_dim: usize,
    pub layers: Vec<DenseLayer>,
}

/// Post-activation outputs of every layer for one input, with the input
/// itself at index 0. Produced by [`MlpParams::forward`] and consumed by
/// [`MlpParams::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Network output from the most recent forward pass.
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Parameter gradients, shaped like the network they belong to.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_weights: Vec<f64>,
    pub d_biases: Vec<f64>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| LayerGrads {
                d_weights: vec![0.0; l.weights.len()],
                d_biases: vec![0.0; l.biases.len()],
            })
            .collect();
        MlpGrads { layers }
    }

    pub fn zero(&mut self) {
        for layer in &mut self.layers {
            layer.d_weights.fill(0.0);
            layer.d_biases.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for g in layer.d_weights.iter_mut().chain(layer.d_biases.iter_mut()) {
                *g *= factor;
            }
        }
    }
}

/// Deterministic network initialization: Glorot-uniform weights scaled by
/// fan-in/fan-out, zero biases.
pub fn init_params(spec: &MlpSpec, seed: u64) -> Result<MlpParams, NnError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = spec.layer_sizes.len() - 2;
    let layers = spec
        .layer_sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let activation = if i == last { spec.output_activation } else { spec.hidden_activation };
            DenseLayer::init(w[0], w[1], activation, &mut rng)
        })
        .collect();
    Ok(MlpParams { input_dim: spec.input_dim(), layers })
}

impl MlpParams {
    /// Builds a custom layer stack (width, activation per layer) with
    /// Glorot initialization from the caller's RNG. Used for network shapes
    /// the regressor [`MlpSpec`] cannot express, like activated trunks.
    pub fn from_layer_plan(input_dim: usize, plan: &[(usize, Activation)], rng: &mut impl Rng) -> Self {
        assert!(input_dim > 0 && !plan.is_empty(), "need an input dim and at least one layer");
        let mut layers = Vec::with_capacity(plan.len());
        let mut in_dim = input_dim;
        for (out_dim, activation) in plan {
            layers.push(DenseLayer::init(in_dim, *out_dim, *activation, rng));
            in_dim = *out_dim;
        }
        MlpParams { input_dim, layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("network has layers").out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Forward pass. Panics if `input` width does not match the network.
    pub fn forward(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.input_dim, "input width {} does not match network input {}", input.len(), self.input_dim);
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.forward_into(activations.last().unwrap(), &mut out);
            activations.push(out);
        }
        ForwardCache { activations }
    }

    /// Convenience forward pass returning only the output vector.
    pub fn output(&self, input: &[f64]) -> Vec<f64> {
        self.forward(input).output().to_vec()
    }

    /// Reverse-mode gradients of the forward map for one sample.
    ///
    /// `d_output` is the loss gradient at the network output; parameter
    /// gradients are *accumulated* into `grads` (zero it between batches).
    /// Returns the loss gradient at the network input.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], grads: &mut MlpGrads) -> Vec<f64> {
        assert_eq!(cache.activations.len(), self.layers.len() + 1, "cache does not match network depth");
        assert_eq!(d_output.len(), self.output_dim(), "output gradient width mismatch");
        assert_eq!(grads.layers.len(), self.layers.len(), "gradient buffer does not match network depth");

        let mut d_current = d_output.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let layer_input = &cache.activations[idx];
            let layer_output = &cache.activations[idx + 1];
            let layer_grads = &mut grads.layers[idx];

            // d_z = d_y * act'(y)
            for (dz, y) in d_current.iter_mut().zip(layer_output) {
                *dz *= layer.activation.grad_from_output(*y);
            }

            let mut d_input = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let dz = d_current[o];
                layer_grads.d_biases[o] += dz;
                let w_row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let g_row = &mut layer_grads.d_weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    g_row[i] += dz * layer_input[i];
                    d_input[i] += dz * w_row[i];
                }
            }
            d_current = d_input;
        }
        d_current
    }

    /// Serializes the architecture and row-major weight/bias arrays.
    pub fn to_json(&self) -> Result<String, NnError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, NnError> {
        let params: MlpParams = serde_json::from_str(json)?;
        params.check_consistent()?;
        Ok(params)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()?).map_err(|source| NnError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, NnError> {
        let json = std::fs::read_to_string(path).map_err(|source| NnError::Io {
            path: path.display().to_string(),
            source,
        })?;
        MlpParams::from_json(&json)
    }

    fn check_consistent(&self) -> Result<(), NnError> {
        let mut in_dim = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim != in_dim
                || layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.biases.len() != layer.out_dim
            {
                return Err(NnError::InvalidSpec(format!("layer {i} shapes are inconsistent")));
            }
            in_dim = layer.out_dim;
        }
        Ok(())
    }
}
