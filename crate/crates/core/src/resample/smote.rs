//! SMOTE: interpolation toward a random one of the k nearest same-class neighbors.

use rand::Rng;
use rayon::prelude::*;

use super::plan::{round_robin, ResamplePlan};
use super::{balance, clamp_k, with_method, ClassJob, ClassOutput, Method, Provenance, ResampleError, ResampleOutput, ResamplerConfig};
use crate::dataset::{EmbeddingDataset, EmbeddingVector, LabeledEmbedding, Origin};
use crate::neighbors::knn;
use crate::seed::rng_for;

/// `f_i + lambda * (f_nn - f_i)`, coordinate-wise.
pub fn interpolate(f_i: &[f64], f_nn: &[f64], lambda: f64) -> Result<Vec<f64>, ResampleError> {
    if f_i.len() != f_nn.len() {
        return Err(ResampleError::DimensionMismatch(f_i.len(), f_nn.len()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ResampleError::LambdaOutOfRange(lambda));
    }
    Ok(f_i.iter().zip(f_nn).map(|(a, b)| a + lambda * (b - a)).collect())
}

/// Balances every class with SMOTE, regardless of `config.method`.
pub fn smote(dataset: &EmbeddingDataset, config: &ResamplerConfig) -> Result<ResampleOutput, ResampleError> {
    balance(dataset, &with_method(config, Method::Smote))
}

pub(crate) fn generate(job: &ClassJob<'_>) -> Result<ClassOutput, ResampleError> {
    let mut out = ClassOutput::default();
    let plan = ResamplePlan::new(job.label, job.members.clone(), round_robin(job.members.len(), job.deficit));
    synthesize(job, &plan, Method::Smote, &mut out)?;
    Ok(out)
}

/// Generates `plan.quotas[b]` samples from each base, each interpolated
/// toward one of the base's k nearest neighbors within the class.
pub(crate) fn synthesize(job: &ClassJob<'_>, plan: &ResamplePlan, method: Method, out: &mut ClassOutput) -> Result<(), ResampleError> {
    let label = job.label;
    if job.members.len() < 2 {
        return Err(ResampleError::SingleSample { label, method: method.name() });
    }
    let k = clamp_k(job.config.k, job.members.len() - 1, label, "same-class", out);
    let active: Vec<(usize, usize)> = plan.bases.iter().copied().zip(plan.quotas.iter().copied()).filter(|&(_, q)| q > 0).collect();
    let bases: Vec<usize> = active.iter().map(|&(b, _)| b).collect();
    let table = knn(&bases, &job.members, job.dataset, k, job.config.metric)
        .map_err(|source| ResampleError::Neighbors { label, source })?;
    let seed = job.config.seed;
    let per_base: Vec<Vec<(LabeledEmbedding, Provenance)>> = active
        .par_iter()
        .zip(table.lists.par_iter())
        .map(|(&(base, quota), neighbors)| {
            (0..quota)
                .map(|seq| {
                    let mut rng = rng_for(seed, method.name(), &[base as u64, seq as u64]);
                    let nb = neighbors[rng.random_range(0..neighbors.len())].index;
                    let lambda: f64 = rng.random();
                    let values = interpolate(job.dataset.vector(base), job.dataset.vector(nb), lambda).expect("same dataset");
                    let vector = EmbeddingVector::new(values).expect("convex combination of finite vectors");
                    let sample = LabeledEmbedding { vector, label, origin: Origin::Synthetic(method.kind()) };
                    let prov = Provenance {
                        method: method.name().to_string(),
                        label,
                        index: 0,
                        base_index: Some(base),
                        neighbor_index: Some(nb),
                        lambda: Some(lambda),
                        seed,
                        sequence: seq,
                    };
                    (sample, prov)
                })
                .collect()
        })
        .collect();
    for (sample, prov) in per_base.into_iter().flatten() {
        out.samples.push(sample);
        out.provenance.push(prov);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SyntheticKind;

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let a = [0.3, -1.7, 5.0];
        let b = [2.1, 0.4, -3.0];
        assert_eq!(interpolate(&a, &b, 0.0).unwrap(), a.to_vec());
        let end = interpolate(&a, &b, 1.0).unwrap();
        assert!(end.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        assert_eq!(interpolate(&[0.0, 0.0], &[2.0, 2.0], 0.5).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(interpolate(&[0.0], &[1.0, 2.0], 0.5), Err(ResampleError::DimensionMismatch(1, 2))));
        assert!(matches!(interpolate(&[0.0], &[1.0], 1.5), Err(ResampleError::LambdaOutOfRange(_))));
    }

    fn dataset(n_maj: usize, n_min: usize) -> EmbeddingDataset {
        let mut rows: Vec<(Vec<f64>, u32)> = (0..n_maj).map(|i| (vec![i as f64, 1.0], 0)).collect();
        rows.extend((0..n_min).map(|i| (vec![(i * i) as f64 * 0.01, -2.0 - i as f64], 1)));
        EmbeddingDataset::from_rows(2, 2, rows).unwrap()
    }

    #[test]
    fn counts_and_round_robin_quotas() {
        let ds = dataset(100, 40);
        let out = smote(&ds, &ResamplerConfig::new(Method::Smote, 3)).unwrap();
        assert_eq!(out.dataset.len(), 200);
        assert_eq!(out.dataset.synthetic_count(), 60);
        let mut per_base = std::collections::BTreeMap::<usize, usize>::new();
        for p in &out.provenance {
            *per_base.entry(p.base_index.unwrap()).or_default() += 1;
        }
        let counts: Vec<usize> = per_base.values().copied().collect();
        assert_eq!(counts.iter().max().unwrap() - counts.iter().min().unwrap(), 1);
        assert!(out.dataset.samples()[100..].iter().all(|s| s.origin == Origin::Real || s.label == 1));
        assert!(out.dataset.samples()[140..].iter().all(|s| s.origin == Origin::Synthetic(SyntheticKind::Smote)));
    }

    #[test]
    fn provenance_reconstructs_samples() {
        let ds = dataset(50, 9);
        let out = smote(&ds, &ResamplerConfig::new(Method::Smote, 8).with_k(3)).unwrap();
        for p in &out.provenance {
            let (b, n, l) = (p.base_index.unwrap(), p.neighbor_index.unwrap(), p.lambda.unwrap());
            assert_eq!(ds.label(n), 1);
            assert_ne!(b, n);
            assert_eq!(out.dataset.vector(p.index), interpolate(ds.vector(b), ds.vector(n), l).unwrap().as_slice());
        }
    }

    #[test]
    fn single_sample_class_fails_and_k_is_clamped() {
        let ds = dataset(10, 1);
        assert!(matches!(smote(&ds, &ResamplerConfig::new(Method::Smote, 0)), Err(ResampleError::SingleSample { label: 1, .. })));
        let ds = dataset(10, 3);
        let out = smote(&ds, &ResamplerConfig::new(Method::Smote, 0)).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("using k = 2"));
    }

    #[test]
    fn deterministic() {
        let ds = dataset(60, 12);
        let cfg = ResamplerConfig::new(Method::Smote, 77);
        let a = smote(&ds, &cfg).unwrap();
        let b = smote(&ds, &cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.provenance, b.provenance);
        let c = smote(&ds, &ResamplerConfig::new(Method::Smote, 78)).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }
}
