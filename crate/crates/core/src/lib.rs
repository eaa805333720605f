//! Rebalancing of class-imbalanced embedding datasets.
//!
//! The crate synthesizes minority-class feature vectors directly in embedding
//! space and measures the effect on a small feed-forward classifier:
//!
//! - [`dataset`] and [`io`]: the labeled-embedding model, the `EMB1` binary
//!   format and CSV interchange, deterministic split/downsample.
//! - [`neighbors`]: exact k-nearest-neighbor search.
//! - [`resample`]: SMOTE, Borderline-SMOTE, ADASYN and random oversampling,
//!   unified behind [`resample::balance`].
//! - [`dense`] and [`classifier`]: a feed-forward network with hand-written
//!   backpropagation, SGD and Adam updates, and the MLP classifier built on it.
//! - [`vae`]: a variational autoencoder used as a per-class generator.
//! - [`experiment`]: evaluation metrics, the downsample/rebalance/train/evaluate
//!   pipeline, the power-of-two sweep, PCA projection and Gaussian benchmarks.

pub mod classifier;
pub mod dataset;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod io;
pub mod neighbors;
pub mod resample;
pub mod seed;
pub mod vae;

pub use dataset::{EmbeddingDataset, EmbeddingVector, LabeledEmbedding, Origin, SplitSpec};
pub use error::{Error, Result};
