use thiserror::Error;

use crate::dense::NetError;
use crate::experiment::ExperimentError;
use crate::io::FormatError;
use crate::neighbors::NeighborError;
use crate::resample::ResampleError;
use crate::vae::VaeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error. Each variant wraps the error type of one module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Neighbors(#[from] NeighborError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Vae(#[from] VaeError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// Violations of dataset invariants and dataset-manipulation preconditions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("class count must be at least 2, got {0}")]
    TooFewClasses(u32),
    #[error("sample {index}: expected dimension {expected}, got {got}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("sample {index}: coordinate {coord} is not finite")]
    NonFinite { index: usize, coord: usize },
    #[error("sample {index}: label {label} is not below class count {class_count}")]
    LabelOutOfRange { index: usize, label: u32, class_count: u32 },
    #[error("invalid split fractions ({0}, {1}, {2}): each must lie in (0,1) and sum to 1")]
    InvalidFractions(f64, f64, f64),
    #[error("cannot split an empty dataset")]
    EmptyDataset,
    #[error("class {label} has {count} samples, too few to stratify into three partitions")]
    ClassTooSmall { label: u32, count: usize },
    #[error("unknown class {0}")]
    UnknownClass(u32),
    #[error("downsample target must be at least 1")]
    ZeroTarget,
    #[error("class {label} has {count} samples, cannot keep {target}")]
    TargetTooLarge { label: u32, count: usize, target: usize },
    #[error("datasets disagree on {0}")]
    Incompatible(&'static str),
}
