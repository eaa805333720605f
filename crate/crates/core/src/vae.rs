//! Variational autoencoder over embedding vectors.
//!
//! ```text
//! f --encoder--> (mu, log_var) --z = mu + exp(log_var/2)·eps--> z --decoder--> f̂
//! ```
//!
//! The decoder likelihood is a unit-variance Gaussian, so the single-sample
//! ELBO is `-½‖f − f̂‖² − KL(N(mu, diag exp(log_var)) ‖ N(0, I))` with the
//! `2π` constant dropped. One VAE is trained per minority class and sampled
//! by decoding standard-normal latents.
//!
//! By default each feature is standardized with training-set statistics to
//! standard deviation `feature_scale` before encoding, and decoder outputs are
//! mapped back. The fixed decoder variance is then a small fraction of every
//! feature's variance; at or above the data variance the ELBO optimum ignores
//! `z` and every decoded sample lands on the class mean.
//!
//! The default optimizer is Adam at learning rate 1e-3. The loss sums over
//! all `d` coordinates, so fixed-rate SGD steps grow with the dimension and
//! diverge on wide embeddings. Early stopping is off by default: training
//! runs every epoch and keeps the parameters with the best holdout ELBO, since
//! the loss often plateaus near the collapsed solution before `z` is used.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Standardizer;
use crate::dataset::{EmbeddingDataset, EmbeddingVector, LabeledEmbedding, Origin, SyntheticKind};
use crate::dense::{epoch_batches, Activation, DenseNetwork, Gradients, NetError, Optimizer, OptimizerState, TrainConfig};
use crate::resample::{ClassJob, ClassOutput, Method, Provenance, ResampleError};
use crate::seed::{rng_for, sub_seed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VaeError {
    #[error("need at least 2 samples to train, got {0}")]
    TooFewSamples(usize),
    #[error("vectors have mismatched lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("decoder produced a non-finite coordinate")]
    NonFiniteOutput,
    #[error("encoder must output 2 x {latent_dim} values and decoder must map {latent_dim} back to the input dimension")]
    Shape { latent_dim: usize },
    #[error("feature scaling must match the input dimension with positive finite scales")]
    Scaling,
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeOptions {
    /// Clamped to the data dimension.
    pub latent_dim: usize,
    pub hidden_units: usize,
    /// Model standardized features instead of raw coordinates.
    pub standardize: bool,
    /// Standard deviation of each standardized feature. The decoder's unit
    /// variance is then `1 / feature_scale²` of every feature's variance.
    pub feature_scale: f64,
    pub train: TrainConfig,
}

impl Default for VaeOptions {
    fn default() -> Self {
        let train = TrainConfig { learning_rate: 1e-3, optimizer: Optimizer::adam(), early_stop_patience: 0, ..TrainConfig::default() };
        Self { latent_dim: 16, hidden_units: 64, standardize: true, feature_scale: 3.0, train }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVae")]
pub struct VaeModel {
    pub latent_dim: usize,
    pub encoder: DenseNetwork,
    pub decoder: DenseNetwork,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Standardizer>,
}

#[derive(Deserialize)]
struct RawVae {
    latent_dim: usize,
    encoder: DenseNetwork,
    decoder: DenseNetwork,
    #[serde(default)]
    scaling: Option<Standardizer>,
}

impl TryFrom<RawVae> for VaeModel {
    type Error = VaeError;

    fn try_from(raw: RawVae) -> Result<Self, VaeError> {
        VaeModel::new(raw.latent_dim, raw.encoder, raw.decoder)?.with_scaling(raw.scaling)
    }
}

/// ELBO estimate and its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elbo {
    pub value: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Gradients of `-ELBO`.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
}

impl VaeGradients {
    /// Encoder parameters followed by decoder parameters, matching [`VaeModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.encoder.flatten();
        v.extend(self.decoder.flatten());
        v
    }
}

impl VaeModel {
    pub fn new(latent_dim: usize, encoder: DenseNetwork, decoder: DenseNetwork) -> Result<Self, VaeError> {
        if latent_dim == 0
            || encoder.output_dim() != 2 * latent_dim
            || decoder.input_dim() != latent_dim
            || decoder.output_dim() != encoder.input_dim()
        {
            return Err(VaeError::Shape { latent_dim });
        }
        Ok(Self { latent_dim, encoder, decoder, scaling: None })
    }

    pub fn with_scaling(mut self, scaling: Option<Standardizer>) -> Result<Self, VaeError> {
        if let Some(s) = &scaling {
            let ok = s.dim() == self.dim() && s.std.len() == s.dim() && s.std.iter().all(|v| v.is_finite() && *v > 0.0);
            if !ok || s.mean.iter().any(|m| !m.is_finite()) {
                return Err(VaeError::Scaling);
            }
        }
        self.scaling = scaling;
        Ok(self)
    }

    /// `f` in the units the networks see.
    pub fn to_model_space(&self, f: &[f64]) -> Vec<f64> {
        match &self.scaling {
            Some(s) => s.apply(f),
            None => f.to_vec(),
        }
    }

    /// `d -> hidden (ReLU) -> 2·latent` encoder and `latent -> hidden (ReLU) -> d` decoder.
    pub fn init(dim: usize, latent_dim: usize, hidden: usize, seed: u64) -> Result<Self, VaeError> {
        let latent_dim = latent_dim.clamp(1, dim);
        let encoder = DenseNetwork::init(&[dim, hidden, 2 * latent_dim], &[Activation::Relu, Activation::Identity], sub_seed(seed, "encoder", &[]))?;
        let decoder = DenseNetwork::init(&[latent_dim, hidden, dim], &[Activation::Relu, Activation::Identity], sub_seed(seed, "decoder", &[]))?;
        Self::new(latent_dim, encoder, decoder)
    }

    pub fn dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Mean and log-variance of `q(z | f)`.
    pub fn encode(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>), VaeError> {
        if f.len() != self.dim() {
            return Err(NetError::InputDimension { expected: self.dim(), got: f.len() }.into());
        }
        let mut out = self.encoder.forward(&self.to_model_space(f))?;
        let log_var = out.split_off(self.latent_dim);
        Ok((out, log_var))
    }

    /// Decoder mean in original units.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>, VaeError> {
        let out = self.decoder.forward(z)?;
        Ok(match &self.scaling {
            Some(s) => s.invert(&out),
            None => out,
        })
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut v = self.encoder.parameters();
        v.extend(self.decoder.parameters());
        v
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), VaeError> {
        let split = self.encoder.parameter_count();
        if values.len() != split + self.decoder.parameter_count() {
            return Err(NetError::GradientShape.into());
        }
        self.encoder.set_parameters(&values[..split])?;
        self.decoder.set_parameters(&values[split..])?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vae serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, VaeError> {
        serde_json::from_str(text).map_err(|e| NetError::Checkpoint(e.to_string()).into())
    }
}

/// `z = mu + exp(log_var / 2) ⊙ noise`.
pub fn reparameterize(mu: &[f64], log_var: &[f64], noise: &[f64]) -> Result<Vec<f64>, VaeError> {
    if mu.len() != log_var.len() {
        return Err(VaeError::LengthMismatch(mu.len(), log_var.len()));
    }
    if mu.len() != noise.len() {
        return Err(VaeError::LengthMismatch(mu.len(), noise.len()));
    }
    Ok(mu.iter().zip(log_var).zip(noise).map(|((m, lv), e)| m + (lv / 2.0).exp() * e).collect())
}

/// Closed-form `KL(N(mu, diag exp(log_var)) ‖ N(0, I))`.
pub fn kl_to_standard_normal(mu: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mu.iter().zip(log_var).map(|(m, lv)| m * m + lv.exp() - lv - 1.0).sum::<f64>()
}

/// Single-sample ELBO of `f` with the given standard-normal `noise`.
/// Measured in model space, i.e. after standardization.
pub fn elbo(model: &VaeModel, f: &[f64], noise: &[f64]) -> Result<Elbo, VaeError> {
    let (mu, log_var) = model.encode(f)?;
    let z = reparameterize(&mu, &log_var, noise)?;
    let recon = model.decoder.forward(&z)?;
    Ok(assemble(&model.to_model_space(f), &recon, &mu, &log_var))
}

fn assemble(f: &[f64], recon: &[f64], mu: &[f64], log_var: &[f64]) -> Elbo {
    let reconstruction = -0.5 * f.iter().zip(recon).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let kl = kl_to_standard_normal(mu, log_var);
    Elbo { value: reconstruction - kl, reconstruction, kl }
}

/// ELBO and the gradients of `-ELBO` with respect to every encoder and decoder parameter.
pub fn elbo_gradients(model: &VaeModel, f: &[f64], noise: &[f64]) -> Result<(Elbo, VaeGradients), VaeError> {
    let latent = model.latent_dim;
    if f.len() != model.dim() {
        return Err(NetError::InputDimension { expected: model.dim(), got: f.len() }.into());
    }
    let f = &model.to_model_space(f)[..];
    let enc_trace = model.encoder.forward_trace(f)?;
    let (mu, log_var) = enc_trace.output().split_at(latent);
    let z = reparameterize(mu, log_var, noise)?;
    let dec_trace = model.decoder.forward_trace(&z)?;
    let recon = dec_trace.output();
    let value = assemble(f, recon, mu, log_var);

    let d_recon: Vec<f64> = recon.iter().zip(f).map(|(r, x)| r - x).collect();
    let decoder = model.decoder.backward_from_trace(&dec_trace, &d_recon)?;
    let mut upstream = vec![0.0; 2 * latent];
    for j in 0..latent {
        let dz = decoder.input[j];
        let sigma = (log_var[j] / 2.0).exp();
        upstream[j] = dz + mu[j];
        upstream[latent + j] = dz * noise[j] * 0.5 * sigma + 0.5 * (log_var[j].exp() - 1.0);
    }
    let encoder = model.encoder.backward_from_trace(&enc_trace, &upstream)?;
    Ok((value, VaeGradients { encoder, decoder }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VaeHistory {
    /// Mean single-sample ELBO over each epoch's training batches.
    pub train_elbo: Vec<f64>,
    /// Mean held-out ELBO after each epoch (fixed noise); empty without a holdout.
    pub valid_elbo: Vec<f64>,
    pub best_epoch: usize,
    pub holdout: usize,
}

fn standard_normal(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Trains a VAE on every sample of `data` by mini-batch SGD on `-ELBO`.
///
/// With at least 20 samples, 10% are held out and the parameters with the
/// best held-out ELBO are returned; otherwise the final parameters are.
pub fn train_vae(data: &EmbeddingDataset, options: &VaeOptions) -> Result<(VaeModel, VaeHistory), VaeError> {
    let tc = &options.train;
    tc.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(VaeError::TooFewSamples(n));
    }
    let seed = tc.seed;
    let mut order: Vec<usize> = (0..n).collect();
    let holdout = if n >= 20 { ((n as f64) * 0.1).round() as usize } else { 0 };
    if holdout > 0 {
        order.shuffle(&mut rng_for(seed, "vae-holdout", &[]));
    }
    let (valid_idx, train_idx) = order.split_at(holdout);
    let mut train_idx = train_idx.to_vec();
    train_idx.sort_unstable();

    if !(options.feature_scale > 0.0 && options.feature_scale.is_finite()) {
        return Err(NetError::InvalidConfig(format!("feature_scale must be positive, got {}", options.feature_scale)).into());
    }
    let scaling = options.standardize.then(|| {
        let mut s = Standardizer::fit(&data.subset(&train_idx));
        s.std.iter_mut().for_each(|v| *v /= options.feature_scale);
        s
    });
    let mut model = VaeModel::init(data.dim(), options.latent_dim, options.hidden_units, seed)?.with_scaling(scaling)?;
    let latent = model.latent_dim;
    let valid_noise: Vec<Vec<f64>> = valid_idx
        .iter()
        .enumerate()
        .map(|(i, _)| standard_normal(&mut rng_for(seed, "vae-valid-noise", &[i as u64]), latent))
        .collect();

    let mut history = VaeHistory { holdout, ..Default::default() };
    let mut best: Option<(f64, VaeModel)> = None;
    let mut enc_opt = OptimizerState::new(tc.optimizer, &model.encoder);
    let mut dec_opt = OptimizerState::new(tc.optimizer, &model.decoder);
    for epoch in 0..tc.max_epochs {
        let mut epoch_elbo = 0.0;
        for (b, batch) in epoch_batches(train_idx.len(), tc.batch_size, seed, epoch).iter().enumerate() {
            let mut rng = rng_for(seed, "vae-noise", &[epoch as u64, b as u64]);
            let mut enc = Gradients::zeros_like(&model.encoder);
            let mut dec = Gradients::zeros_like(&model.decoder);
            let mut batch_elbo = 0.0;
            for &slot in batch {
                let noise = standard_normal(&mut rng, latent);
                let (value, grads) = elbo_gradients(&model, data.vector(train_idx[slot]), &noise)?;
                batch_elbo += value.value;
                enc.add_assign(&grads.encoder);
                dec.add_assign(&grads.decoder);
            }
            if !batch_elbo.is_finite() {
                return Err(VaeError::NonFiniteLoss { epoch, batch: b });
            }
            epoch_elbo += batch_elbo;
            let scale = 1.0 / batch.len() as f64;
            enc.scale(scale);
            dec.scale(scale);
            enc_opt.step(&mut model.encoder, &enc, tc.learning_rate)?;
            dec_opt.step(&mut model.decoder, &dec, tc.learning_rate)?;
        }
        history.train_elbo.push(epoch_elbo / train_idx.len() as f64);

        if holdout > 0 {
            let mut total = 0.0;
            for (&i, noise) in valid_idx.iter().zip(&valid_noise) {
                total += elbo(&model, data.vector(i), noise)?.value;
            }
            let mean = total / holdout as f64;
            history.valid_elbo.push(mean);
            if best.as_ref().is_none_or(|(b, _)| mean > *b) {
                best = Some((mean, model.clone()));
                history.best_epoch = epoch;
            } else if tc.early_stop_patience > 0 && epoch - history.best_epoch >= tc.early_stop_patience {
                break;
            }
        } else {
            history.best_epoch = epoch;
        }
    }
    Ok((best.map(|(_, m)| m).unwrap_or(model), history))
}

/// Decodes `count` standard-normal latent draws.
pub fn generate(model: &VaeModel, count: usize, seed: u64) -> Result<Vec<EmbeddingVector>, VaeError> {
    let mut rng = rng_for(seed, "vae-generate", &[]);
    (0..count)
        .map(|_| {
            let z = standard_normal(&mut rng, model.latent_dim);
            EmbeddingVector::new(model.decode(&z)?).map_err(|_| VaeError::NonFiniteOutput)
        })
        .collect()
}

pub(crate) fn generate_for_class(job: &ClassJob<'_>) -> Result<ClassOutput, ResampleError> {
    let label = job.label;
    if job.members.len() < 2 {
        return Err(ResampleError::SingleSample { label, method: Method::Vae.name() });
    }
    let seed = job.config.seed;
    let mut options = job.config.vae.clone();
    options.train.seed = sub_seed(seed, "vae-train", &[u64::from(label)]);
    let wrap = |source| ResampleError::Vae { label, source };
    let (model, _) = train_vae(&job.dataset.subset(&job.members), &options).map_err(wrap)?;
    let vectors = generate(&model, job.deficit, sub_seed(seed, "vae-generate", &[u64::from(label)])).map_err(wrap)?;
    let mut out = ClassOutput::default();
    for (seq, vector) in vectors.into_iter().enumerate() {
        out.samples.push(LabeledEmbedding { vector, label, origin: Origin::Synthetic(SyntheticKind::Vae) });
        out.provenance.push(Provenance {
            method: Method::Vae.name().to_string(),
            label,
            index: 0,
            base_index: None,
            neighbor_index: None,
            lambda: None,
            seed,
            sequence: seq,
        });
    }
    Ok(out)
}
