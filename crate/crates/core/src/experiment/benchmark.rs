//! Seeded Gaussian-cluster datasets.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::dataset::EmbeddingDataset;
use crate::seed::rng_for;

/// One isotropic Gaussian cluster: covariance `variance · I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterClass {
    pub mean: Vec<f64>,
    pub variance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    /// Class `i` is drawn from `classes[i]`.
    pub classes: Vec<ClusterClass>,
    pub seed: u64,
}

impl ClusterSpec {
    /// Unit-variance clusters at `(0, .., 0)` and `(separation, 0, .., 0)`.
    pub fn two_gaussians(dim: usize, separation: f64, per_class: usize, seed: u64) -> Self {
        let mut far = vec![0.0; dim];
        far[0] = separation;
        Self {
            classes: vec![
                ClusterClass { mean: vec![0.0; dim], variance: 1.0, count: per_class },
                ClusterClass { mean: far, variance: 1.0, count: per_class },
            ],
            seed,
        }
    }
}

/// Samples every class in order, class 0 first.
pub fn make_synthetic_benchmark(spec: &ClusterSpec) -> Result<EmbeddingDataset, ExperimentError> {
    let invalid = |m: String| ExperimentError::InvalidBenchmark(m);
    if spec.classes.len() < 2 {
        return Err(invalid("need at least two classes".into()));
    }
    let dim = spec.classes[0].mean.len();
    if dim == 0 {
        return Err(invalid("dimension must be positive".into()));
    }
    let mut rows = Vec::new();
    for (label, class) in spec.classes.iter().enumerate() {
        if class.mean.len() != dim {
            return Err(invalid(format!("class {label} mean has dimension {}, expected {dim}", class.mean.len())));
        }
        if class.count == 0 {
            return Err(invalid(format!("class {label} count must be at least 1")));
        }
        if !(class.variance >= 0.0 && class.variance.is_finite()) || class.mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid(format!("class {label} has a non-finite mean or negative variance")));
        }
        let sd = class.variance.sqrt();
        let mut rng = rng_for(spec.seed, "benchmark", &[label as u64]);
        for _ in 0..class.count {
            let v = class.mean.iter().map(|m| m + sd * rng.sample::<f64, _>(StandardNormal)).collect();
            rows.push((v, label as u32));
        }
    }
    Ok(EmbeddingDataset::from_rows(dim, spec.classes.len() as u32, rows)?)
}
