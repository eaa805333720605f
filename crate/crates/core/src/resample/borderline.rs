//! Borderline-SMOTE: oversample only minority points whose neighborhood is
//! majority-dominated but not purely majority.

use serde::{Deserialize, Serialize};

use super::plan::{round_robin, ResamplePlan};
use super::smote::synthesize;
use super::{balance, clamp_k, with_method, ClassJob, ClassOutput, Method, ResampleError, ResampleOutput, ResamplerConfig};
use crate::dataset::EmbeddingDataset;
use crate::neighbors::majority_neighbor_counts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BorderlineClass {
    /// Fewer than half of the neighbors are majority.
    Safe,
    /// At least half, but not all, of the neighbors are majority.
    Danger,
    /// Every neighbor is majority.
    Noise,
}

impl BorderlineClass {
    /// Classifies a point with `majority` of its `k` neighbors in other classes.
    pub fn from_counts(majority: usize, k: usize) -> Self {
        if majority >= k {
            BorderlineClass::Noise
        } else if majority >= k.div_ceil(2) {
            BorderlineClass::Danger
        } else {
            BorderlineClass::Safe
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BorderlineAssignment {
    /// Neighbor count actually used after clamping.
    pub k: usize,
    pub indices: Vec<usize>,
    pub majority_counts: Vec<usize>,
    pub classes: Vec<BorderlineClass>,
}

impl BorderlineAssignment {
    pub fn danger(&self) -> Vec<usize> {
        self.indices
            .iter()
            .zip(&self.classes)
            .filter(|(_, &c)| c == BorderlineClass::Danger)
            .map(|(&i, _)| i)
            .collect()
    }
}

fn assign(dataset: &EmbeddingDataset, label: u32, members: &[usize], k: usize, config: &ResamplerConfig, out: &mut ClassOutput) -> Result<BorderlineAssignment, ResampleError> {
    let k = clamp_k(k, dataset.len().saturating_sub(1), label, "dataset", out);
    let majority_counts = majority_neighbor_counts(members, dataset, k, config.metric)
        .map_err(|source| ResampleError::Neighbors { label, source })?;
    let classes = majority_counts.iter().map(|&m| BorderlineClass::from_counts(m, k)).collect();
    Ok(BorderlineAssignment { k, indices: members.to_vec(), majority_counts, classes })
}

/// SAFE/DANGER/NOISE assignment of every sample of class `label`, with
/// neighbors searched over the whole dataset.
pub fn classify_borderline(dataset: &EmbeddingDataset, label: u32, config: &ResamplerConfig) -> Result<BorderlineAssignment, ResampleError> {
    let members = dataset.indices_of(label);
    assign(dataset, label, &members, config.k, config, &mut ClassOutput::default())
}

/// Balances every class with Borderline-SMOTE, regardless of `config.method`.
pub fn borderline_smote(dataset: &EmbeddingDataset, config: &ResamplerConfig) -> Result<ResampleOutput, ResampleError> {
    balance(dataset, &with_method(config, Method::BorderlineSmote))
}

pub(crate) fn generate(job: &ClassJob<'_>) -> Result<ClassOutput, ResampleError> {
    let mut out = ClassOutput::default();
    if job.members.len() < 2 {
        return Err(ResampleError::SingleSample { label: job.label, method: Method::BorderlineSmote.name() });
    }
    let assignment = assign(job.dataset, job.label, &job.members, job.config.k, job.config, &mut out)?;
    let danger = assignment.danger();
    if danger.is_empty() {
        return Err(ResampleError::NoDangerSamples { label: job.label });
    }
    let quotas = round_robin(danger.len(), job.deficit);
    let plan = ResamplePlan::new(job.label, danger, quotas);
    synthesize(job, &plan, Method::BorderlineSmote, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resample::balance_with_fallback;

    #[test]
    fn thresholds() {
        assert_eq!(BorderlineClass::from_counts(0, 5), BorderlineClass::Safe);
        assert_eq!(BorderlineClass::from_counts(2, 5), BorderlineClass::Safe);
        assert_eq!(BorderlineClass::from_counts(3, 5), BorderlineClass::Danger);
        assert_eq!(BorderlineClass::from_counts(4, 5), BorderlineClass::Danger);
        assert_eq!(BorderlineClass::from_counts(5, 5), BorderlineClass::Noise);
        assert_eq!(BorderlineClass::from_counts(2, 4), BorderlineClass::Danger);
        assert_eq!(BorderlineClass::from_counts(1, 4), BorderlineClass::Safe);
        assert_eq!(BorderlineClass::from_counts(1, 1), BorderlineClass::Noise);
    }

    #[test]
    fn no_danger_names_the_class() {
        // minority far from majority: every minority point is SAFE
        let mut rows: Vec<(Vec<f64>, u32)> = (0..20).map(|i| (vec![i as f64], 0)).collect();
        rows.extend((0..6).map(|i| (vec![100.0 + i as f64], 1)));
        let ds = EmbeddingDataset::from_rows(1, 2, rows).unwrap();
        let cfg = ResamplerConfig::new(Method::BorderlineSmote, 1);
        match borderline_smote(&ds, &cfg) {
            Err(ResampleError::NoDangerSamples { label }) => assert_eq!(label, 1),
            other => panic!("unexpected {other:?}"),
        }
        let out = balance_with_fallback(&ds, &cfg).unwrap();
        assert_eq!(out.dataset.class_histogram()[&1], 20);
        assert!(out.warnings.iter().any(|w| w.contains("fell back to smote")));
        assert!(out.provenance.iter().all(|p| p.method == "smote"));
    }
}
