//! Exact k-nearest-neighbor search.
//!
//! Brute force over an explicit candidate pool. Pool vectors are packed into
//! one contiguous buffer and queries run in parallel; the result does not
//! depend on the thread count. Ties are broken by ascending dataset index.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::EmbeddingDataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeighborError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query {query}: k = {k} exceeds the {available} pool members other than itself")]
    KTooLarge { query: usize, k: usize, available: usize },
    #[error("index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("sample {0} is the zero vector; cosine distance is undefined")]
    ZeroVector(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    Cosine,
}

impl DistanceMetric {
    /// Distance between two equal-length vectors. Cosine distance of a zero
    /// vector is NaN; [`knn`] rejects zero vectors before calling this.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => squared_euclidean(a, b).sqrt(),
            DistanceMetric::Cosine => cosine_from_norms(a, b, norm(a), norm(b)),
        }
    }
}

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
fn cosine_from_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    1.0 - dot / (na * nb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Ordered neighbor lists, one per query, each of length `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub k: usize,
    pub queries: Vec<usize>,
    pub lists: Vec<Vec<Neighbor>>,
}

impl NeighborTable {
    /// Neighbor list of the `pos`-th query.
    pub fn list(&self, pos: usize) -> &[Neighbor] {
        &self.lists[pos]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[Neighbor])> {
        self.queries.iter().copied().zip(self.lists.iter().map(Vec::as_slice))
    }
}

fn by_distance_then_index(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index))
}

/// For every query, the `k` pool members (itself excluded) closest under `metric`.
pub fn knn(
    queries: &[usize],
    pool: &[usize],
    dataset: &EmbeddingDataset,
    k: usize,
    metric: DistanceMetric,
) -> Result<NeighborTable, NeighborError> {
    if k == 0 {
        return Err(NeighborError::ZeroK);
    }
    let n = dataset.len();
    if let Some(&bad) = queries.iter().chain(pool).find(|&&i| i >= n) {
        return Err(NeighborError::IndexOutOfRange(bad));
    }
    let mut in_pool = vec![false; n];
    for &p in pool {
        in_pool[p] = true;
    }
    let pool_size = in_pool.iter().filter(|&&b| b).count();
    for &q in queries {
        let available = pool_size - usize::from(in_pool[q]);
        if k > available {
            return Err(NeighborError::KTooLarge { query: q, k, available });
        }
    }

    let d = dataset.dim();
    let mut packed = Vec::with_capacity(pool.len() * d);
    for &p in pool {
        packed.extend_from_slice(dataset.vector(p));
    }
    let pool_norms: Vec<f64> = match metric {
        DistanceMetric::Euclidean => Vec::new(),
        DistanceMetric::Cosine => {
            let norms: Vec<f64> = packed.chunks_exact(d).map(norm).collect();
            if let Some(pos) = norms.iter().position(|&v| v == 0.0) {
                return Err(NeighborError::ZeroVector(pool[pos]));
            }
            norms
        }
    };
    if metric == DistanceMetric::Cosine {
        if let Some(&q) = queries.iter().find(|&&q| norm(dataset.vector(q)) == 0.0) {
            return Err(NeighborError::ZeroVector(q));
        }
    }

    let lists = queries
        .par_iter()
        .map(|&q| {
            let qv = dataset.vector(q);
            let qn = if metric == DistanceMetric::Cosine { norm(qv) } else { 0.0 };
            let mut cands: Vec<Neighbor> = pool
                .iter()
                .zip(packed.chunks_exact(d))
                .enumerate()
                .filter(|(_, (&p, _))| p != q)
                .map(|(slot, (&p, pv))| {
                    let distance = match metric {
                        DistanceMetric::Euclidean => squared_euclidean(qv, pv).sqrt(),
                        DistanceMetric::Cosine => cosine_from_norms(qv, pv, qn, pool_norms[slot]),
                    };
                    Neighbor { index: p, distance }
                })
                .collect();
            if k < cands.len() {
                cands.select_nth_unstable_by(k - 1, by_distance_then_index);
                cands.truncate(k);
            }
            cands.sort_unstable_by(by_distance_then_index);
            cands
        })
        .collect();
    Ok(NeighborTable { k, queries: queries.to_vec(), lists })
}

/// Number of the sample's `k` nearest neighbors (searched over the whole
/// dataset) whose label differs from the sample's own label.
pub fn majority_neighbor_count(
    sample_index: usize,
    dataset: &EmbeddingDataset,
    k: usize,
    metric: DistanceMetric,
) -> Result<usize, NeighborError> {
    Ok(majority_neighbor_counts(&[sample_index], dataset, k, metric)?[0])
}

/// Batched [`majority_neighbor_count`].
pub fn majority_neighbor_counts(
    samples: &[usize],
    dataset: &EmbeddingDataset,
    k: usize,
    metric: DistanceMetric,
) -> Result<Vec<usize>, NeighborError> {
    let everything: Vec<usize> = (0..dataset.len()).collect();
    let table = knn(samples, &everything, dataset, k, metric)?;
    Ok(table
        .iter()
        .map(|(q, list)| {
            let own = dataset.label(q);
            list.iter().filter(|nb| dataset.label(nb.index) != own).count()
        })
        .collect())
}
