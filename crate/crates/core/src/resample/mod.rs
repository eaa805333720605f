//! Synthetic minority generators.
//!
//! Every method raises each non-majority class to its target count
//! (default `N_maj`), treating that class as the minority and all other
//! samples as the majority. Real samples are never removed or changed;
//! synthetic samples are appended after them, grouped by class, then by base
//! sample, then by sequence number.

pub mod adasyn;
pub mod borderline;
pub mod plan;
pub mod ros;
pub mod smote;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EmbeddingDataset, LabeledEmbedding, SyntheticKind};
use crate::error::DatasetError;
use crate::neighbors::{DistanceMetric, NeighborError};
use crate::vae::{VaeError, VaeOptions};

pub use adasyn::{adasyn, adasyn_plan, adasyn_scores, DifficultyScores};
pub use borderline::{borderline_smote, classify_borderline, BorderlineClass, BorderlineAssignment};
pub use plan::ResamplePlan;
pub use ros::random_oversample;
pub use smote::{interpolate, smote};

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("dataset needs at least two non-empty classes")]
    TooFewClasses,
    #[error("{method}: class {label} has a single sample, no neighbor to interpolate toward")]
    SingleSample { label: u32, method: &'static str },
    #[error("class {label} is empty but has target {target}")]
    EmptyClass { label: u32, target: usize },
    #[error("class {label}: target {target} is below the current count {count}")]
    TargetBelowCount { label: u32, target: usize, count: usize },
    #[error("borderline: class {label} has no DANGER samples; fall back to plain smote")]
    NoDangerSamples { label: u32 },
    #[error("interpolation: dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("interpolation: lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("class {label}: {source}")]
    Neighbors { label: u32, source: NeighborError },
    #[error("vae: class {label}: {source}")]
    Vae { label: u32, source: VaeError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "smote")]
    Smote,
    #[serde(rename = "borderline")]
    BorderlineSmote,
    #[serde(rename = "adasyn")]
    Adasyn,
    #[serde(rename = "ros")]
    RandomOversample,
    #[serde(rename = "vae")]
    Vae,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Smote, Method::BorderlineSmote, Method::Adasyn, Method::RandomOversample, Method::Vae];

    pub fn name(self) -> &'static str {
        self.kind().name()
    }

    pub fn kind(self) -> SyntheticKind {
        match self {
            Method::Smote => SyntheticKind::Smote,
            Method::BorderlineSmote => SyntheticKind::Borderline,
            Method::Adasyn => SyntheticKind::Adasyn,
            Method::RandomOversample => SyntheticKind::Ros,
            Method::Vae => SyntheticKind::Vae,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplerConfig {
    pub method: Method,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    /// Per-class target counts; classes not listed are raised to `N_maj`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_per_class: Option<BTreeMap<u32, usize>>,
    #[serde(default)]
    pub metric: DistanceMetric,
    #[serde(default)]
    pub vae: VaeOptions,
}

fn default_k() -> usize {
    5
}

impl ResamplerConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self { method, k: default_k(), seed, target_per_class: None, metric: DistanceMetric::Euclidean, vae: VaeOptions::default() }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }
}

/// One line of the provenance sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub label: u32,
    /// Position of the synthetic sample in the output dataset.
    pub index: usize,
    /// Input-dataset index of the sample it was derived from (none for VAE).
    pub base_index: Option<usize>,
    pub neighbor_index: Option<usize>,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub sequence: usize,
}

#[derive(Debug, Clone)]
pub struct ResampleOutput {
    pub dataset: EmbeddingDataset,
    pub provenance: Vec<Provenance>,
    pub warnings: Vec<String>,
}

/// Work for one class: raise `members` by `deficit` synthetic samples.
pub(crate) struct ClassJob<'a> {
    pub dataset: &'a EmbeddingDataset,
    pub label: u32,
    pub members: Vec<usize>,
    pub deficit: usize,
    pub config: &'a ResamplerConfig,
}

#[derive(Default)]
pub(crate) struct ClassOutput {
    pub samples: Vec<LabeledEmbedding>,
    /// Provenance with `index` left at 0; filled in during assembly.
    pub provenance: Vec<Provenance>,
    pub warnings: Vec<String>,
}

impl ClassOutput {
    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }
}

/// Caps a neighbor count at what the pool allows, recording a warning when it bites.
pub(crate) fn clamp_k(k: usize, available: usize, label: u32, pool: &str, out: &mut ClassOutput) -> usize {
    if k > available {
        out.warn(format!("class {label}: k = {k} exceeds {available} available {pool} neighbors; using k = {available}"));
        available
    } else {
        k
    }
}

/// Rebalances with `config.method`.
pub fn balance(dataset: &EmbeddingDataset, config: &ResamplerConfig) -> Result<ResampleOutput, ResampleError> {
    run(dataset, config, false)
}

/// Like [`balance`], but a class with no Borderline-SMOTE DANGER samples is
/// oversampled with plain SMOTE instead of failing.
pub fn balance_with_fallback(dataset: &EmbeddingDataset, config: &ResamplerConfig) -> Result<ResampleOutput, ResampleError> {
    run(dataset, config, true)
}

fn class_jobs<'a>(dataset: &'a EmbeddingDataset, config: &'a ResamplerConfig) -> Result<(Vec<ClassJob<'a>>, Vec<String>), ResampleError> {
    let hist = dataset.class_histogram();
    if hist.values().filter(|&&c| c > 0).count() < 2 {
        return Err(ResampleError::TooFewClasses);
    }
    let n_maj = dataset.majority_count();
    let mut jobs = Vec::new();
    let mut warnings = Vec::new();
    for (&label, &count) in &hist {
        let explicit = config.target_per_class.as_ref().and_then(|t| t.get(&label)).copied();
        let target = explicit.unwrap_or(n_maj);
        if target < count {
            return Err(ResampleError::TargetBelowCount { label, target, count });
        }
        if count == 0 {
            if explicit.is_some_and(|t| t > 0) {
                return Err(ResampleError::EmptyClass { label, target });
            }
            let msg = format!("class {label} has no samples and is left empty");
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        if target > count {
            jobs.push(ClassJob { dataset, label, members: dataset.indices_of(label), deficit: target - count, config });
        }
    }
    Ok((jobs, warnings))
}

fn run(dataset: &EmbeddingDataset, config: &ResamplerConfig, fallback: bool) -> Result<ResampleOutput, ResampleError> {
    let (jobs, mut warnings) = class_jobs(dataset, config)?;
    let outputs: Vec<Result<ClassOutput, ResampleError>> = jobs
        .par_iter()
        .map(|job| match config.method {
            Method::Smote => smote::generate(job),
            Method::BorderlineSmote => match borderline::generate(job) {
                Err(ResampleError::NoDangerSamples { label }) if fallback => {
                    let mut out = smote::generate(job)?;
                    out.warn(format!("class {label}: no DANGER samples, fell back to smote"));
                    Ok(out)
                }
                other => other,
            },
            Method::Adasyn => adasyn::generate(job),
            Method::RandomOversample => ros::generate(job),
            Method::Vae => crate::vae::generate_for_class(job),
        })
        .collect();

    let mut synthetic = Vec::new();
    let mut provenance = Vec::new();
    for out in outputs {
        let out = out?;
        warnings.extend(out.warnings);
        for mut p in out.provenance {
            p.index = dataset.len() + provenance.len();
            provenance.push(p);
        }
        synthetic.extend(out.samples);
    }
    debug_assert_eq!(synthetic.len(), provenance.len());
    Ok(ResampleOutput { dataset: dataset.with_appended(synthetic)?, provenance, warnings })
}

pub(crate) fn with_method(config: &ResamplerConfig, method: Method) -> ResamplerConfig {
    ResamplerConfig { method, ..config.clone() }
}
