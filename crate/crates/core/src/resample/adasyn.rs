//! ADASYN: per-sample quotas proportional to the share of majority-class
//! neighbors, apportioned so they sum to the class deficit exactly.

use super::plan::{largest_remainder, ResamplePlan};
use super::smote::synthesize;
use super::{balance, clamp_k, with_method, ClassJob, ClassOutput, Method, ResampleError, ResampleOutput, ResamplerConfig};
use crate::dataset::EmbeddingDataset;
use crate::neighbors::majority_neighbor_counts;

/// Difficulty scores of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyScores {
    pub label: u32,
    /// Neighbor count actually used after clamping.
    pub k: usize,
    pub indices: Vec<usize>,
    /// `k_i`: majority neighbors among the k nearest.
    pub majority_counts: Vec<usize>,
    /// `r_i = k_i / k`.
    pub raw: Vec<f64>,
    /// `r_i / sum(r)`, or uniform when every `k_i` is zero.
    pub normalized: Vec<f64>,
}

fn scores_for(dataset: &EmbeddingDataset, label: u32, members: &[usize], config: &ResamplerConfig, out: &mut ClassOutput) -> Result<DifficultyScores, ResampleError> {
    let k = clamp_k(config.k, dataset.len().saturating_sub(1), label, "dataset", out);
    let majority_counts = majority_neighbor_counts(members, dataset, k, config.metric)
        .map_err(|source| ResampleError::Neighbors { label, source })?;
    let raw: Vec<f64> = majority_counts.iter().map(|&m| m as f64 / k as f64).collect();
    let sum: f64 = raw.iter().sum();
    let normalized = if sum > 0.0 {
        raw.iter().map(|r| r / sum).collect()
    } else {
        vec![1.0 / members.len() as f64; members.len()]
    };
    Ok(DifficultyScores { label, k, indices: members.to_vec(), majority_counts, raw, normalized })
}

/// Scores every sample of class `label` against the rest of the dataset.
pub fn adasyn_scores(dataset: &EmbeddingDataset, label: u32, config: &ResamplerConfig) -> Result<DifficultyScores, ResampleError> {
    let members = dataset.indices_of(label);
    if members.is_empty() {
        return Err(ResampleError::EmptyClass { label, target: dataset.majority_count() });
    }
    scores_for(dataset, label, &members, config, &mut ClassOutput::default())
}

/// Largest-remainder apportionment of `total` by the normalized scores.
pub fn adasyn_plan(scores: &DifficultyScores, total: usize) -> ResamplePlan {
    ResamplePlan::new(scores.label, scores.indices.clone(), largest_remainder(&scores.normalized, total))
}

/// Balances every class with ADASYN, regardless of `config.method`.
pub fn adasyn(dataset: &EmbeddingDataset, config: &ResamplerConfig) -> Result<ResampleOutput, ResampleError> {
    balance(dataset, &with_method(config, Method::Adasyn))
}

pub(crate) fn generate(job: &ClassJob<'_>) -> Result<ClassOutput, ResampleError> {
    let mut out = ClassOutput::default();
    if job.members.len() < 2 {
        return Err(ResampleError::SingleSample { label: job.label, method: Method::Adasyn.name() });
    }
    let scores = scores_for(job.dataset, job.label, &job.members, job.config, &mut out)?;
    let plan = adasyn_plan(&scores, job.deficit);
    debug_assert_eq!(plan.total, job.deficit);
    synthesize(job, &plan, Method::Adasyn, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, u32)]) -> EmbeddingDataset {
        EmbeddingDataset::from_rows(1, 2, points.iter().map(|&(x, l)| (vec![x], l)).collect()).unwrap()
    }

    #[test]
    fn uniform_when_no_majority_neighbors() {
        let mut pts: Vec<(f64, u32)> = (0..10).map(|i| (i as f64, 0)).collect();
        pts.extend((0..4).map(|i| (1000.0 + i as f64, 1)));
        let ds = line(&pts);
        let s = adasyn_scores(&ds, 1, &ResamplerConfig::new(Method::Adasyn, 0).with_k(3)).unwrap();
        assert_eq!(s.majority_counts, vec![0; 4]);
        assert_eq!(s.normalized, vec![0.25; 4]);
    }

    #[test]
    fn single_point_score() {
        // lone minority point at 0: neighbors 0.1, 0.2, 0.3 (majority), 50, 51 (majority), ... k=5
        // with 2 other minority points placed as its 2nd and 4th neighbors: k_i = 3
        let ds = line(&[(0.0, 1), (0.1, 0), (0.15, 1), (0.2, 0), (0.25, 1), (0.3, 0), (9.0, 0), (9.5, 0)]);
        let cfg = ResamplerConfig::new(Method::Adasyn, 0);
        let members = [0usize];
        let s = scores_for(&ds, 1, &members, &cfg, &mut ClassOutput::default()).unwrap();
        assert_eq!(s.majority_counts, vec![3]);
        assert!((s.raw[0] - 0.6).abs() < 1e-15);
        assert_eq!(s.normalized, vec![1.0]);
    }

    #[test]
    fn hand_normalized_scores_and_quotas() {
        // k = 5. Minority a at 0 with neighbors (1 maj, 4 min); minority b at 100 with (3 maj, 2 min).
        let ds = line(&[
            (0.0, 1), (0.1, 1), (0.2, 1), (0.3, 1), (0.4, 1), (0.45, 0),
            (100.0, 1), (100.1, 0), (100.2, 0), (100.3, 0), (100.4, 1), (100.5, 1),
        ]);
        let cfg = ResamplerConfig::new(Method::Adasyn, 0);
        let s = scores_for(&ds, 1, &[0, 6], &cfg, &mut ClassOutput::default()).unwrap();
        assert_eq!(s.majority_counts, vec![1, 3]);
        assert!((s.normalized[0] - 0.25).abs() < 1e-12 && (s.normalized[1] - 0.75).abs() < 1e-12);
        assert_eq!(adasyn_plan(&s, 4).quotas, vec![1, 3]);
    }

    #[test]
    fn exact_total() {
        let mut pts: Vec<(f64, u32)> = (0..100).map(|i| (i as f64 * 0.37 % 7.0, 0)).collect();
        pts.extend((0..40).map(|i| (i as f64 * 0.21, 1)));
        let ds = line(&pts);
        let out = adasyn(&ds, &ResamplerConfig::new(Method::Adasyn, 4)).unwrap();
        assert_eq!(out.provenance.len(), 60);
        assert_eq!(out.dataset.class_histogram()[&1], 100);
    }
}
