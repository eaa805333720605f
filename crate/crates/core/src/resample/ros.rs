//! Random oversampling: exact copies drawn with replacement.

use rand::Rng;

use super::{balance, with_method, ClassJob, ClassOutput, Method, Provenance, ResampleError, ResampleOutput, ResamplerConfig};
use crate::dataset::{EmbeddingDataset, LabeledEmbedding, Origin, SyntheticKind};
use crate::seed::rng_for;

/// Balances every class by duplication, regardless of `config.method`.
pub fn random_oversample(dataset: &EmbeddingDataset, config: &ResamplerConfig) -> Result<ResampleOutput, ResampleError> {
    balance(dataset, &with_method(config, Method::RandomOversample))
}

pub(crate) fn generate(job: &ClassJob<'_>) -> Result<ClassOutput, ResampleError> {
    let mut out = ClassOutput::default();
    let seed = job.config.seed;
    let mut rng = rng_for(seed, "ros", &[u64::from(job.label)]);
    for seq in 0..job.deficit {
        let base = job.members[rng.random_range(0..job.members.len())];
        out.samples.push(LabeledEmbedding {
            vector: job.dataset.samples()[base].vector.clone(),
            label: job.label,
            origin: Origin::Synthetic(SyntheticKind::Ros),
        });
        out.provenance.push(Provenance {
            method: Method::RandomOversample.name().to_string(),
            label: job.label,
            index: 0,
            base_index: Some(base),
            neighbor_index: None,
            lambda: None,
            seed,
            sequence: seq,
        });
    }
    Ok(out)
}
