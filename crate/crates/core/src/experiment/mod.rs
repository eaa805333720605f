//! Imbalance experiments: downsample a training split, rebalance it, train a
//! classifier and score it on untouched balanced holdout data.
//!
//! A sweep runs the full (arm × size × fold) grid. Folds are independent
//! re-seeded stratified splits. Every cell is deterministic in its seed, so the
//! report does not depend on how many worker threads ran the grid.

mod benchmark;
mod metrics;
mod projection;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use benchmark::{make_synthetic_benchmark, ClusterClass, ClusterSpec};
pub use metrics::{evaluate, metrics_from_predictions, Metrics};
pub use projection::{project_2d, ProjectedPoint, Projection, ProjectionMethod};

use crate::classifier::{train_classifier, ClassifierConfig};
use crate::dataset::{EmbeddingDataset, SplitSpec};
use crate::dense::NetError;
use crate::error::DatasetError;
use crate::io::fingerprint;
use crate::resample::{balance_with_fallback, Method, ResampleError, ResamplerConfig};
use crate::seed::sub_seed;

pub const SCHEMA_VERSION: u32 = 1;

pub const PIPELINE: [&str; 5] = [
    "stratified split",
    "downsample listed minority classes in the train split",
    "balance train split",
    "train classifier",
    "evaluate on untouched test split",
];

const FOLD_SCHEME: &str = "repeated random sub-sampling: each fold is an independent stratified split seeded from the sweep seed";
const DOWNSAMPLE_SCOPE: &str = "train split only; validation and test splits keep their original class balance";
const SEED_DERIVATION: &str = "sub_seed(master, tag, indices) = splitmix64 over fnv1a(tag) and indices; \
fold seed = sub_seed(sweep seed, \"fold\", [fold]); per cell: split = sub_seed(fold seed, \"split\", []), \
downsample = sub_seed(fold seed, \"downsample\", []), resampler = sub_seed(fold seed, \"resample\", [arm seed]), \
classifier = sub_seed(fold seed, \"classifier\", [train seed])";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("model expects dimension {model}, data has {data}")]
    DimensionMismatch { model: usize, data: usize },
    #[error("model predicts {model} classes, data declares {data}")]
    ClassCountMismatch { model: usize, data: usize },
    #[error("invalid benchmark spec: {0}")]
    InvalidBenchmark(String),
    #[error("projection needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid sweep spec: {0}")]
    InvalidSweep(String),
    #[error("class {label}: size {size} exceeds the {available} training samples available")]
    SizeTooLarge { label: u32, size: usize, available: usize },
    #[error("{partition} partition contains {count} synthetic samples")]
    SyntheticInHoldout { partition: &'static str, count: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One treatment of the training split: no rebalancing, or a resampler.
#[derive(Debug, Clone, PartialEq)]
pub enum Arm {
    Baseline,
    Resample(ResamplerConfig),
}

impl Arm {
    pub fn name(&self) -> &'static str {
        match self {
            Arm::Baseline => "none",
            Arm::Resample(cfg) => cfg.method.name(),
        }
    }

    /// `"none"` or a resampler name with default settings.
    pub fn parse(name: &str) -> Option<Self> {
        if name == "none" {
            return Some(Arm::Baseline);
        }
        Method::parse(name).map(|m| Arm::Resample(ResamplerConfig::new(m, 0)))
    }
}

#[derive(Serialize, Deserialize)]
enum NoneTag {
    #[serde(rename = "none")]
    None,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ArmRepr {
    Name(String),
    Baseline { method: NoneTag },
    Resample(ResamplerConfig),
}

impl Serialize for Arm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Arm::Baseline => ArmRepr::Baseline { method: NoneTag::None }.serialize(s),
            Arm::Resample(cfg) => ArmRepr::Resample(cfg.clone()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Arm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match ArmRepr::deserialize(d)? {
            ArmRepr::Name(name) => Arm::parse(&name).ok_or_else(|| serde::de::Error::custom(format!("unknown method `{name}`"))),
            ArmRepr::Baseline { .. } => Ok(Arm::Baseline),
            ArmRepr::Resample(cfg) => Ok(Arm::Resample(cfg)),
        }
    }
}

fn default_sizes() -> Vec<usize> {
    (3..=10).map(|m| 1usize << m).collect()
}

fn default_folds() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub minority_classes: BTreeSet<u32>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// Arms to compare; the baseline is added when missing.
    #[serde(default)]
    pub methods: Vec<Arm>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    /// Fractions for each fold's split; its seed is replaced per fold.
    #[serde(default)]
    pub split: SplitSpec,
}

impl SweepSpec {
    pub fn new(minority_classes: impl IntoIterator<Item = u32>, methods: Vec<Arm>) -> Self {
        Self {
            minority_classes: minority_classes.into_iter().collect(),
            sizes: default_sizes(),
            methods,
            folds: default_folds(),
            seed: 0,
            classifier: ClassifierConfig::default(),
            split: SplitSpec::default(),
        }
    }

    /// Baseline first, then the listed resamplers in order.
    pub fn arms(&self) -> Vec<Arm> {
        let mut arms = vec![Arm::Baseline];
        arms.extend(self.methods.iter().filter(|a| **a != Arm::Baseline).cloned());
        arms
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: &str| Err(ExperimentError::InvalidSweep(m.to_string()));
        if self.sizes.is_empty() {
            return invalid("sizes must not be empty");
        }
        if self.sizes[0] < 2 || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("sizes must be strictly increasing and at least 2");
        }
        if self.folds == 0 {
            return invalid("folds must be positive");
        }
        if self.minority_classes.is_empty() {
            return invalid("minority_classes must not be empty");
        }
        let arms = self.arms();
        let names: BTreeSet<&str> = arms.iter().map(Arm::name).collect();
        if names.len() != arms.len() {
            return invalid("each method may appear only once");
        }
        self.split.validate()?;
        self.classifier.train.validate()?;
        Ok(())
    }
}

/// Result of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    /// Train histogram after downsampling, before rebalancing.
    pub train_class_histogram: BTreeMap<u32, usize>,
    pub balanced_class_histogram: BTreeMap<u32, usize>,
    pub synthetic_count: usize,
    pub metrics: Metrics,
    pub warnings: Vec<String>,
}

/// Downsample `train`, rebalance it with `arm`, train, and score on `test`.
/// `seed` drives every random step.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    train: &EmbeddingDataset,
    valid: &EmbeddingDataset,
    test: &EmbeddingDataset,
    minority_classes: &BTreeSet<u32>,
    size: usize,
    arm: &Arm,
    seed: u64,
    classifier: &ClassifierConfig,
) -> Result<CellOutcome, ExperimentError> {
    for (partition, ds) in [("validation", valid), ("test", test)] {
        let count = ds.synthetic_count();
        if count > 0 {
            return Err(ExperimentError::SyntheticInHoldout { partition, count });
        }
    }
    let mut reduced = train.clone();
    let downsample_seed = sub_seed(seed, "downsample", &[]);
    for &label in minority_classes {
        if label >= train.class_count() {
            return Err(DatasetError::UnknownClass(label).into());
        }
        let available = reduced.indices_of(label).len();
        if size > available {
            return Err(ExperimentError::SizeTooLarge { label, size, available });
        }
        reduced = reduced.downsample_class(label, size, downsample_seed)?;
    }
    let train_class_histogram = reduced.class_histogram();

    let mut warnings = Vec::new();
    let balanced = match arm {
        Arm::Baseline => reduced,
        Arm::Resample(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = sub_seed(seed, "resample", &[cfg.seed]);
            let out = balance_with_fallback(&reduced, &cfg)?;
            warnings.extend(out.warnings);
            out.dataset
        }
    };

    let mut classifier = classifier.clone();
    classifier.train.seed = sub_seed(seed, "classifier", &[classifier.train.seed]);
    let (model, _) = train_classifier(&balanced, Some(valid), &classifier)?;
    let metrics = evaluate(&model, test)?;
    Ok(CellOutcome {
        train_class_histogram,
        balanced_class_histogram: balanced.class_histogram(),
        synthetic_count: balanced.synthetic_count(),
        metrics,
        warnings,
    })
}

/// Stratified split seeded from `seed`, then [`run_pipeline`].
pub fn run_single(
    dataset: &EmbeddingDataset,
    minority_classes: &BTreeSet<u32>,
    size: usize,
    arm: &Arm,
    seed: u64,
    classifier: &ClassifierConfig,
    split: &SplitSpec,
) -> Result<CellOutcome, ExperimentError> {
    let split = SplitSpec { seed: sub_seed(seed, "split", &[]), ..*split };
    let (train, valid, test) = dataset.split(&split)?;
    run_pipeline(&train, &valid, &test, minority_classes, size, arm, seed, classifier)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub method: String,
    pub size: usize,
    pub fold: usize,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub train_class_histogram: Option<BTreeMap<u32, usize>>,
    pub balanced_class_histogram: Option<BTreeMap<u32, usize>>,
    pub synthetic_count: Option<usize>,
    pub test_accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub per_class_recall: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    /// Seconds.
    pub wall_time: f64,
}

impl CellRecord {
    fn new(arm: &Arm, size: usize, fold: usize, seed: u64, result: Result<CellOutcome, ExperimentError>, wall_time: f64) -> Self {
        let mut record = Self {
            method: arm.name().to_string(),
            size,
            fold,
            seed,
            status: CellStatus::Failed,
            error: None,
            train_class_histogram: None,
            balanced_class_histogram: None,
            synthetic_count: None,
            test_accuracy: None,
            macro_f1: None,
            per_class_recall: None,
            warnings: Vec::new(),
            wall_time,
        };
        match result {
            Ok(out) => {
                record.status = CellStatus::Ok;
                record.train_class_histogram = Some(out.train_class_histogram);
                record.balanced_class_histogram = Some(out.balanced_class_histogram);
                record.synthetic_count = Some(out.synthetic_count);
                record.test_accuracy = Some(out.metrics.accuracy);
                record.macro_f1 = Some(out.metrics.macro_f1);
                record.per_class_recall = Some(out.metrics.per_class_recall);
                record.warnings = out.warnings;
            }
            Err(e) => {
                log::warn!("cell {}/{size}/{fold} failed: {e}", arm.name());
                record.error = Some(e.to_string());
            }
        }
        record
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub size: usize,
    pub completed: usize,
    pub failed: usize,
    pub test_accuracy: Option<MeanSd>,
    pub macro_f1: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub dim: usize,
    pub class_count: u32,
    pub class_histogram: BTreeMap<u32, usize>,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset: DatasetSummary,
    pub spec: SweepSpec,
    pub arms: Vec<Arm>,
    pub fold_seeds: Vec<u64>,
    pub pipeline: Vec<String>,
    pub fold_scheme: String,
    pub downsample_scope: String,
    pub seed_derivation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    /// Sorted by arm order, then size, then fold.
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parses a report, rejecting unknown schema versions.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(format!("unsupported schema_version {v}")),
            None => return Err("missing schema_version".into()),
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }

    /// The report with every `wall_time` zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.cells.iter_mut().for_each(|c| c.wall_time = 0.0);
        r
    }

    pub fn aggregate(&self, method: &str, size: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.size == size)
    }
}

/// Runs the full grid on `jobs` worker threads (0 uses the rayon default).
pub fn run_sweep(dataset: &EmbeddingDataset, spec: &SweepSpec, jobs: usize) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    if let Some(&label) = spec.minority_classes.iter().find(|&&l| l >= dataset.class_count()) {
        return Err(DatasetError::UnknownClass(label).into());
    }
    let arms = spec.arms();
    let fold_seeds: Vec<u64> = (0..spec.folds).map(|f| sub_seed(spec.seed, "fold", &[f as u64])).collect();
    let grid: Vec<(usize, usize, usize)> = (0..arms.len())
        .flat_map(|a| spec.sizes.iter().flat_map(move |&s| (0..spec.folds).map(move |f| (a, s, f))))
        .collect();

    let run_cell = |&(a, size, fold): &(usize, usize, usize)| {
        let start = Instant::now();
        let result = run_single(dataset, &spec.minority_classes, size, &arms[a], fold_seeds[fold], &spec.classifier, &spec.split);
        CellRecord::new(&arms[a], size, fold, fold_seeds[fold], result, start.elapsed().as_secs_f64())
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::InvalidSweep(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<CellRecord> = pool.install(|| grid.par_iter().map(run_cell).collect());

    let mut aggregates = Vec::new();
    for arm in &arms {
        for &size in &spec.sizes {
            let group: Vec<&CellRecord> = cells.iter().filter(|c| c.method == arm.name() && c.size == size).collect();
            let acc: Vec<f64> = group.iter().filter_map(|c| c.test_accuracy).collect();
            let f1: Vec<f64> = group.iter().filter_map(|c| c.macro_f1).collect();
            aggregates.push(Aggregate {
                method: arm.name().to_string(),
                size,
                completed: acc.len(),
                failed: group.len() - acc.len(),
                test_accuracy: MeanSd::of(&acc),
                macro_f1: MeanSd::of(&f1),
            });
        }
    }

    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        metadata: ReportMetadata {
            dataset: DatasetSummary {
                n: dataset.len(),
                dim: dataset.dim(),
                class_count: dataset.class_count(),
                class_histogram: dataset.class_histogram(),
                fingerprint: fingerprint(dataset).map_err(|e| ExperimentError::InvalidSweep(e.to_string()))?,
            },
            spec: spec.clone(),
            arms,
            fold_seeds,
            pipeline: PIPELINE.iter().map(|s| s.to_string()).collect(),
            fold_scheme: FOLD_SCHEME.into(),
            downsample_scope: DOWNSAMPLE_SCOPE.into(),
            seed_derivation: SEED_DERIVATION.into(),
        },
        cells,
        aggregates,
    })
}

/// Spearman rank correlation with average ranks for ties. `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}
