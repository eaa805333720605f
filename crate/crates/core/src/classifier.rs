//! Single-hidden-layer MLP classifier trained with mini-batch SGD on
//! softmax cross-entropy, early-stopped on validation loss.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::dense::{epoch_batches, softmax_cross_entropy, Activation, DenseNetwork, Gradients, NetError, OptimizerState, TrainConfig};

/// Per-feature z-scoring fit on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance features keep unit scale.
    pub fn fit(dataset: &EmbeddingDataset) -> Self {
        let d = dataset.dim();
        let n = dataset.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for s in dataset.samples() {
            mean.iter_mut().zip(s.vector.iter()).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for s in dataset.samples() {
            var.iter_mut().zip(s.vector.iter().zip(&mean)).for_each(|(acc, (v, m))| *acc += (v - m).powi(2) / n);
        }
        let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| v * s + m).collect()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub network: DenseNetwork,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
}

impl Classifier {
    /// `dim -> hidden (ReLU) -> classes` with seeded scaled-uniform init.
    pub fn init(dim: usize, hidden: usize, classes: usize, seed: u64) -> Result<Self, NetError> {
        let network = DenseNetwork::init(&[dim, hidden, classes], &[Activation::Relu, Activation::Identity], seed)?;
        Ok(Self { network, standardizer: None })
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    pub fn class_count(&self) -> usize {
        self.network.output_dim()
    }

    fn prepare(&self, x: &[f64]) -> Vec<f64> {
        match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        self.network.forward(&self.prepare(x))
    }

    /// Argmax class; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> Result<u32, NetError> {
        Ok(argmax(&self.logits(x)?) as u32)
    }

    /// Mean cross-entropy over a dataset.
    pub fn mean_loss(&self, dataset: &EmbeddingDataset) -> Result<f64, NetError> {
        let mut total = 0.0;
        for s in dataset.samples() {
            total += softmax_cross_entropy(&self.logits(&s.vector)?, s.label)?.0;
        }
        Ok(total / dataset.len().max(1) as f64)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        let text = serde_json::to_string(self).expect("classifier serializes");
        std::fs::write(path, text).map_err(|e| NetError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = std::fs::read_to_string(path).map_err(|e| NetError::Checkpoint(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| NetError::Checkpoint(e.to_string()))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub hidden_units: usize,
    /// Standardize features with statistics of the training set.
    pub standardize: bool,
    pub train: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { hidden_units: 128, standardize: false, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were returned.
    pub best_epoch: usize,
}

/// Trains a fresh classifier. With a non-empty `valid` set and non-zero
/// patience, returns the parameters of the epoch with the lowest validation loss.
pub fn train_classifier(
    train: &EmbeddingDataset,
    valid: Option<&EmbeddingDataset>,
    config: &ClassifierConfig,
) -> Result<(Classifier, TrainingHistory), NetError> {
    let tc = &config.train;
    tc.validate()?;
    if train.is_empty() {
        return Err(NetError::EmptyTrainingSet);
    }
    let classes = train.class_count() as usize;
    let mut model = Classifier::init(train.dim(), config.hidden_units, classes, tc.seed)?;
    if config.standardize {
        model.standardizer = Some(Standardizer::fit(train));
    }
    let inputs: Vec<Vec<f64>> = train.samples().iter().map(|s| model.prepare(&s.vector)).collect();
    let valid = valid.filter(|v| !v.is_empty() && tc.early_stop_patience > 0);

    let mut history = TrainingHistory::default();
    let mut best: Option<(f64, Classifier)> = None;
    let mut optimizer = OptimizerState::new(tc.optimizer, &model.network);
    for epoch in 0..tc.max_epochs {
        let mut epoch_loss = 0.0;
        for (b, batch) in epoch_batches(train.len(), tc.batch_size, tc.seed, epoch).iter().enumerate() {
            let mut grads = Gradients::zeros_like(&model.network);
            let mut batch_loss = 0.0;
            for &i in batch {
                let trace = model.network.forward_trace(&inputs[i])?;
                let (loss, upstream) = softmax_cross_entropy(trace.output(), train.label(i))?;
                batch_loss += loss;
                grads.add_assign(&model.network.backward_from_trace(&trace, &upstream)?);
            }
            if !batch_loss.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            optimizer.step(&mut model.network, &grads, tc.learning_rate)?;
        }
        history.train_loss.push(epoch_loss / train.len() as f64);

        if let Some(valid) = valid {
            let loss = model.mean_loss(valid)?;
            history.valid_loss.push(loss);
            let improved = best.as_ref().is_none_or(|(b, _)| loss < *b);
            if improved {
                best = Some((loss, model.clone()));
                history.best_epoch = epoch;
            } else if epoch - history.best_epoch >= tc.early_stop_patience {
                break;
            }
        } else {
            history.best_epoch = epoch;
        }
    }
    Ok((best.map(|(_, m)| m).unwrap_or(model), history))
}
