//! Feed-forward network with hand-written reverse-mode gradients.
//!
//! Weights are stored row-major (`out x in`). Shared by the classifier and
//! the VAE encoder/decoder.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("network has no layers")]
    Empty,
    #[error("layer {layer}: input dimension {got} does not match previous output {expected}")]
    LayerChain { layer: usize, expected: usize, got: usize },
    #[error("layer {layer}: parameter shape does not match {out_dim}x{in_dim}")]
    ParameterShape { layer: usize, out_dim: usize, in_dim: usize },
    #[error("layer {0}: parameters must be finite")]
    NonFiniteParameter(usize),
    #[error("input has dimension {got}, network expects {expected}")]
    InputDimension { expected: usize, got: usize },
    #[error("upstream gradient has dimension {got}, network outputs {expected}")]
    UpstreamDimension { expected: usize, got: usize },
    #[error("gradient does not match the network's shape")]
    GradientShape,
    #[error("layer {0}: gradient is not finite")]
    NonFiniteGradient(usize),
    #[error("label {label} out of range for {classes} outputs")]
    LabelOutOfRange { label: u32, classes: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training samples")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Softplus,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Softplus => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { in_dim, out_dim, activation, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
}

#[derive(Deserialize)]
struct RawNetwork {
    layers: Vec<DenseLayer>,
}

impl TryFrom<RawNetwork> for DenseNetwork {
    type Error = NetError;

    fn try_from(raw: RawNetwork) -> Result<Self, NetError> {
        DenseNetwork::new(raw.layers)
    }
}

/// Per-layer activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `inputs[l]` is the input of layer `l`; the last entry is the network output.
    pub inputs: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("trace holds the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    /// Gradient with respect to the network input.
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
        self.input.iter_mut().zip(&other.input).for_each(|(x, y)| *x += y);
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x *= factor);
        }
        self.input.iter_mut().for_each(|x| *x *= factor);
    }

    /// Parameter gradients in [`DenseNetwork::parameters`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Empty);
        }
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 || l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(NetError::ParameterShape { layer: i, out_dim: l.out_dim, in_dim: l.in_dim });
            }
            if i > 0 && l.in_dim != layers[i - 1].out_dim {
                return Err(NetError::LayerChain { layer: i, expected: layers[i - 1].out_dim, got: l.in_dim });
            }
            if !l.weights.iter().chain(&l.bias).all(|v| v.is_finite()) {
                return Err(NetError::NonFiniteParameter(i));
            }
        }
        Ok(Self { layers })
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    /// `dims` lists layer widths from input to output.
    pub fn init(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self, NetError> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(NetError::Empty);
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .enumerate()
            .map(|(i, (w, &act))| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut rng = rng_for(seed, "init", &[i as u64]);
                let mut layer = DenseLayer::zeros(fan_in, fan_out, act);
                layer.weights.iter_mut().for_each(|x| *x = rng.random_range(-limit..=limit));
                layer
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for l in &self.layers {
            x = l.pre_activation(&x).into_iter().map(|z| l.activation.apply(z)).collect();
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace, NetError> {
        self.check_input(input)?;
        let mut inputs = vec![input.to_vec()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let z = l.pre_activation(inputs.last().unwrap());
            inputs.push(z.iter().map(|&v| l.activation.apply(v)).collect());
            pre_activations.push(z);
        }
        Ok(Trace { inputs, pre_activations })
    }

    /// Gradients of a scalar loss whose gradient with respect to the network
    /// output is `upstream`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Gradients, NetError> {
        let trace = self.forward_trace(input)?;
        self.backward_from_trace(&trace, upstream)
    }

    pub fn backward_from_trace(&self, trace: &Trace, upstream: &[f64]) -> Result<Gradients, NetError> {
        if upstream.len() != self.output_dim() {
            return Err(NetError::UpstreamDimension { expected: self.output_dim(), got: upstream.len() });
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut grad_out = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let delta: Vec<f64> = grad_out
                .iter()
                .zip(&trace.pre_activations[l])
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let x = &trace.inputs[l];
            let mut weights = vec![0.0; layer.weights.len()];
            for (row, &dz) in weights.chunks_exact_mut(layer.in_dim).zip(&delta) {
                row.iter_mut().zip(x).for_each(|(w, xi)| *w = dz * xi);
            }
            let mut grad_in = vec![0.0; layer.in_dim];
            for (row, &dz) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                grad_in.iter_mut().zip(row).for_each(|(g, w)| *g += w * dz);
            }
            layers.push(LayerGradient { weights, bias: delta });
            grad_out = grad_in;
        }
        layers.reverse();
        Ok(Gradients { layers, input: grad_out })
    }

    /// `θ ← θ − lr·g`. Rejects mismatched or non-finite gradients before
    /// touching any parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<(), NetError> {
        self.check_gradients(grads)?;
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= learning_rate * d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= learning_rate * d);
        }
        Ok(())
    }

    fn check_gradients(&self, grads: &Gradients) -> Result<(), NetError> {
        if grads.layers.len() != self.layers.len() {
            return Err(NetError::GradientShape);
        }
        for (i, (l, g)) in self.layers.iter().zip(&grads.layers).enumerate() {
            if g.weights.len() != l.weights.len() || g.bias.len() != l.bias.len() {
                return Err(NetError::GradientShape);
            }
            if !g.weights.iter().chain(&g.bias).all(|v| v.is_finite()) {
                return Err(NetError::NonFiniteGradient(i));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), NetError> {
        if values.len() != self.parameter_count() {
            return Err(NetError::GradientShape);
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        serde_json::from_str(text).map_err(|e| NetError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        std::fs::write(path, self.to_json()).map_err(|e| NetError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path).map_err(|e| NetError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NetError> {
        if input.len() != self.input_dim() {
            return Err(NetError::InputDimension { expected: self.input_dim(), got: input.len() });
        }
        Ok(())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, with its gradient
/// `softmax(logits) - one_hot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: u32) -> Result<(f64, Vec<f64>), NetError> {
    let c = label as usize;
    if c >= logits.len() {
        return Err(NetError::LabelOutOfRange { label, classes: logits.len() });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum_exp = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let loss = log_sum_exp - logits[c];
    let mut grad = softmax(logits);
    grad[c] -= 1.0;
    Ok((loss, grad))
}

/// Optimizer and schedule settings shared by the classifier and the VAE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables early stopping.
    pub early_stop_patience: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, batch_size: 32, max_epochs: 200, seed: 0, early_stop_patience: 10, optimizer: Optimizer::Sgd }
    }
}

/// Parameter update rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    /// Fixed-rate stochastic gradient descent.
    #[default]
    Sgd,
    /// Bias-corrected first and second moment estimates.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    fn validate(&self) -> Result<(), NetError> {
        if let Optimizer::Adam { beta1, beta2, epsilon } = *self {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !(unit(beta1) && unit(beta2) && epsilon > 0.0 && epsilon.is_finite()) {
                return Err(NetError::InvalidConfig(format!(
                    "adam needs betas in [0, 1) and a positive epsilon, got {beta1}, {beta2}, {epsilon}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-network optimizer state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    optimizer: Optimizer,
    steps: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(optimizer: Optimizer, net: &DenseNetwork) -> Self {
        let n = if matches!(optimizer, Optimizer::Sgd) { 0 } else { net.parameter_count() };
        Self { optimizer, steps: 0, first: vec![0.0; n], second: vec![0.0; n] }
    }

    /// Applies one update. Leaves `net` untouched on error.
    pub fn step(&mut self, net: &mut DenseNetwork, grads: &Gradients, learning_rate: f64) -> Result<(), NetError> {
        let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer else {
            return net.sgd_step(grads, learning_rate);
        };
        net.check_gradients(grads)?;
        if self.first.len() != net.parameter_count() {
            return Err(NetError::GradientShape);
        }
        self.steps = self.steps.saturating_add(1);
        let c1 = 1.0 - beta1.powi(self.steps);
        let c2 = 1.0 - beta2.powi(self.steps);
        let flat = grads.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias));
        let params = net.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
        for (((p, &g), m), v) in params.zip(flat).zip(&mut self.first).zip(&mut self.second) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
        Ok(())
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NetError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(NetError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

/// Shuffled mini-batches of `0..n` for one epoch.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "epoch", &[epoch as u64]));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}
