//! Labeled embedding datasets and deterministic manipulation.
//!
//! Datasets are immutable once built; every operation returns a new dataset.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::DatasetError;
use crate::resample::plan::largest_remainder;
use crate::seed::rng_for;

/// A dense embedding vector with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Wraps `values`, rejecting NaN and infinities. The error carries the
    /// offending coordinate.
    pub fn new(values: Vec<f64>) -> Result<Self, usize> {
        match values.iter().position(|v| !v.is_finite()) {
            Some(coord) => Err(coord),
            None => Ok(Self(values)),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for EmbeddingVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = String;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values).map_err(|c| format!("coordinate {c} is not finite"))
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Which generator produced a synthetic sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Smote,
    Borderline,
    Adasyn,
    Ros,
    Vae,
    /// Read back from a file, which stores only the real/synthetic flag.
    Unspecified,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Smote => "smote",
            SyntheticKind::Borderline => "borderline",
            SyntheticKind::Adasyn => "adasyn",
            SyntheticKind::Ros => "ros",
            SyntheticKind::Vae => "vae",
            SyntheticKind::Unspecified => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Real,
    Synthetic(SyntheticKind),
}

impl Origin {
    pub fn is_synthetic(self) -> bool {
        matches!(self, Origin::Synthetic(_))
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Real => f.write_str("real"),
            Origin::Synthetic(kind) => write!(f, "synthetic:{}", kind.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbedding {
    pub vector: EmbeddingVector,
    pub label: u32,
    pub origin: Origin,
}

impl LabeledEmbedding {
    pub fn real(vector: EmbeddingVector, label: u32) -> Self {
        Self { vector, label, origin: Origin::Real }
    }
}

/// `n` labeled `dim`-dimensional vectors over `class_count` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    dim: usize,
    class_count: u32,
    samples: Vec<LabeledEmbedding>,
}

impl EmbeddingDataset {
    pub fn new(dim: usize, class_count: u32, samples: Vec<LabeledEmbedding>) -> Result<Self, DatasetError> {
        if dim == 0 {
            return Err(DatasetError::ZeroDimension);
        }
        if class_count < 2 {
            return Err(DatasetError::TooFewClasses(class_count));
        }
        for (index, s) in samples.iter().enumerate() {
            if s.vector.len() != dim {
                return Err(DatasetError::DimensionMismatch { index, expected: dim, got: s.vector.len() });
            }
            if s.label >= class_count {
                return Err(DatasetError::LabelOutOfRange { index, label: s.label, class_count });
            }
        }
        Ok(Self { dim, class_count, samples })
    }

    pub fn empty(dim: usize, class_count: u32) -> Result<Self, DatasetError> {
        Self::new(dim, class_count, Vec::new())
    }

    /// Builds a dataset of real samples from raw rows.
    pub fn from_rows(dim: usize, class_count: u32, rows: Vec<(Vec<f64>, u32)>) -> Result<Self, DatasetError> {
        let samples = rows
            .into_iter()
            .enumerate()
            .map(|(index, (values, label))| {
                EmbeddingVector::new(values)
                    .map(|v| LabeledEmbedding::real(v, label))
                    .map_err(|coord| DatasetError::NonFinite { index, coord })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, class_count, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[LabeledEmbedding] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<LabeledEmbedding> {
        self.samples
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.samples[i].vector
    }

    pub fn label(&self, i: usize) -> u32 {
        self.samples[i].label
    }

    /// Count per declared class; classes without samples map to 0.
    pub fn class_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist: BTreeMap<u32, usize> = (0..self.class_count).map(|c| (c, 0)).collect();
        for s in &self.samples {
            *hist.entry(s.label).or_default() += 1;
        }
        hist
    }

    /// Largest class count (`N_maj`).
    pub fn majority_count(&self) -> usize {
        self.class_histogram().values().copied().max().unwrap_or(0)
    }

    /// Smallest count among non-empty classes (`N_min`); `None` for an empty dataset.
    pub fn minority_count(&self) -> Option<usize> {
        self.class_histogram().values().copied().filter(|&c| c > 0).min()
    }

    pub fn indices_of(&self, label: u32) -> Vec<usize> {
        self.samples.iter().enumerate().filter(|(_, s)| s.label == label).map(|(i, _)| i).collect()
    }

    pub fn synthetic_count(&self) -> usize {
        self.samples.iter().filter(|s| s.origin.is_synthetic()).count()
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            dim: self.dim,
            class_count: self.class_count,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Appends samples, validating them against this dataset's dimension and classes.
    pub fn with_appended(&self, extra: Vec<LabeledEmbedding>) -> Result<Self, DatasetError> {
        let mut samples = self.samples.clone();
        samples.extend(extra);
        Self::new(self.dim, self.class_count, samples)
    }

    pub fn merge(&self, other: &EmbeddingDataset) -> Result<Self, DatasetError> {
        if self.dim != other.dim {
            return Err(DatasetError::Incompatible("dimension"));
        }
        if self.class_count != other.class_count {
            return Err(DatasetError::Incompatible("class count"));
        }
        self.with_appended(other.samples.clone())
    }

    /// Index lists of the (train, valid, test) partitions, each sorted ascending.
    pub fn split_indices(&self, spec: &SplitSpec) -> Result<[Vec<usize>; 3], DatasetError> {
        spec.validate()?;
        if self.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let fractions = spec.fractions();
        let mut parts: [Vec<usize>; 3] = Default::default();
        if spec.stratified {
            for label in 0..self.class_count {
                let mut idx = self.indices_of(label);
                if idx.is_empty() {
                    continue;
                }
                if idx.len() < 3 {
                    return Err(DatasetError::ClassTooSmall { label, count: idx.len() });
                }
                idx.shuffle(&mut rng_for(spec.seed, "split", &[u64::from(label)]));
                let mut sizes = largest_remainder(&fractions, idx.len());
                // every partition gets at least one sample of each present class
                for p in 0..3 {
                    if sizes[p] == 0 {
                        let donor = (0..3).max_by_key(|&q| (sizes[q], std::cmp::Reverse(q))).unwrap();
                        sizes[donor] -= 1;
                        sizes[p] += 1;
                    }
                }
                distribute(&idx, &sizes, &mut parts);
            }
        } else {
            let mut idx: Vec<usize> = (0..self.len()).collect();
            idx.shuffle(&mut rng_for(spec.seed, "split", &[u64::MAX]));
            let sizes = largest_remainder(&fractions, idx.len());
            distribute(&idx, &sizes, &mut parts);
        }
        for p in &mut parts {
            p.sort_unstable();
        }
        Ok(parts)
    }

    pub fn split(&self, spec: &SplitSpec) -> Result<(Self, Self, Self), DatasetError> {
        let [train, valid, test] = self.split_indices(spec)?;
        Ok((self.subset(&train), self.subset(&valid), self.subset(&test)))
    }

    /// Keeps exactly `target` samples of class `label`, chosen uniformly
    /// without replacement. Other classes and the relative order are untouched.
    pub fn downsample_class(&self, label: u32, target: usize, seed: u64) -> Result<Self, DatasetError> {
        if label >= self.class_count {
            return Err(DatasetError::UnknownClass(label));
        }
        if target == 0 {
            return Err(DatasetError::ZeroTarget);
        }
        let mut idx = self.indices_of(label);
        if target > idx.len() {
            return Err(DatasetError::TargetTooLarge { label, count: idx.len(), target });
        }
        idx.shuffle(&mut rng_for(seed, "downsample", &[u64::from(label)]));
        let mut keep = vec![true; self.len()];
        for &i in &idx[target..] {
            keep[i] = false;
        }
        let kept: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        Ok(self.subset(&kept))
    }
}

fn distribute(shuffled: &[usize], sizes: &[usize], parts: &mut [Vec<usize>; 3]) {
    let mut start = 0;
    for (p, &size) in sizes.iter().enumerate() {
        parts[p].extend_from_slice(&shuffled[start..start + size]);
        start += size;
    }
}

/// Train/validation/test fractions plus the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, valid_fraction: 0.1, test_fraction: 0.1, seed: 0, stratified: true }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.valid_fraction, self.test_fraction]
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let f = self.fractions();
        let each_ok = f.iter().all(|&x| x > 0.0 && x < 1.0);
        if !each_ok || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidFractions(f[0], f[1], f[2]));
        }
        Ok(())
    }
}
