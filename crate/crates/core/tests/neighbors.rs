use proptest::prelude::*;
use rebalance_core::neighbors::{knn, majority_neighbor_count, DistanceMetric, NeighborError};
use rebalance_core::EmbeddingDataset;

fn dataset(rows: &[(Vec<i8>, u32)], dim: usize) -> EmbeddingDataset {
    let rows = rows.iter().map(|(v, l)| (v.iter().map(|&x| f64::from(x)).collect(), *l)).collect();
    EmbeddingDataset::from_rows(dim, 2, rows).unwrap()
}

fn oracle(q: usize, pool: &[usize], ds: &EmbeddingDataset, k: usize, metric: DistanceMetric) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> =
        pool.iter().filter(|&&p| p != q).map(|&p| (p, metric.distance(ds.vector(q), ds.vector(p)))).collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn rows(dim: usize) -> impl Strategy<Value = Vec<(Vec<i8>, u32)>> {
    // small integer coordinates make distance ties common
    prop::collection::vec((prop::collection::vec(-3i8..=3, dim), 0u32..2), 3..40)
}

proptest! {
    #[test]
    fn euclidean_matches_sorted_oracle((dim, rows, k) in (1usize..5).prop_flat_map(|d| (Just(d), rows(d), 1usize..6))) {
        let ds = dataset(&rows, dim);
        let all: Vec<usize> = (0..ds.len()).collect();
        let k = k.min(ds.len() - 1);
        let table = knn(&all, &all, &ds, k, DistanceMetric::Euclidean).unwrap();
        for (q, list) in table.iter() {
            let got: Vec<(usize, f64)> = list.iter().map(|n| (n.index, n.distance)).collect();
            prop_assert_eq!(got, oracle(q, &all, &ds, k, DistanceMetric::Euclidean));
        }
    }

    #[test]
    fn cosine_matches_sorted_oracle((dim, rows, k) in (2usize..5).prop_flat_map(|d| (Just(d), rows(d), 1usize..6))) {
        let rows: Vec<(Vec<i8>, u32)> = rows.into_iter().filter(|(v, _)| v.iter().any(|&x| x != 0)).collect();
        prop_assume!(rows.len() >= 2);
        let ds = dataset(&rows, dim);
        let all: Vec<usize> = (0..ds.len()).collect();
        let k = k.min(ds.len() - 1);
        let table = knn(&all, &all, &ds, k, DistanceMetric::Cosine).unwrap();
        for (q, list) in table.iter() {
            let got: Vec<usize> = list.iter().map(|n| n.index).collect();
            let want: Vec<usize> = oracle(q, &all, &ds, k, DistanceMetric::Cosine).into_iter().map(|(i, _)| i).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn restricted_pool_excludes_self_and_outsiders((dim, rows) in (1usize..4).prop_flat_map(|d| (Just(d), rows(d)))) {
        let ds = dataset(&rows, dim);
        let pool: Vec<usize> = (0..ds.len()).filter(|i| i % 2 == 0).collect();
        let queries: Vec<usize> = (0..ds.len()).collect();
        prop_assume!(pool.len() >= 2);
        let table = knn(&queries, &pool, &ds, 1, DistanceMetric::Euclidean).unwrap();
        for (q, list) in table.iter() {
            prop_assert!(list.iter().all(|n| n.index != q && n.index % 2 == 0));
            let want: Vec<usize> = oracle(q, &pool, &ds, 1, DistanceMetric::Euclidean).into_iter().map(|(i, _)| i).collect();
            prop_assert_eq!(list.iter().map(|n| n.index).collect::<Vec<_>>(), want);
        }
    }

    #[test]
    fn majority_count_matches_oracle((dim, rows, k) in (1usize..4).prop_flat_map(|d| (Just(d), rows(d), 1usize..6))) {
        let ds = dataset(&rows, dim);
        let all: Vec<usize> = (0..ds.len()).collect();
        let k = k.min(ds.len() - 1);
        for i in 0..ds.len() {
            let want = oracle(i, &all, &ds, k, DistanceMetric::Euclidean).iter().filter(|(j, _)| ds.label(*j) != ds.label(i)).count();
            prop_assert_eq!(majority_neighbor_count(i, &ds, k, DistanceMetric::Euclidean).unwrap(), want);
        }
    }
}

#[test]
fn rejects_oversized_k_and_zero_vectors() {
    let ds = dataset(&[(vec![0, 0], 0), (vec![1, 0], 1), (vec![2, 0], 0)], 2);
    let all = [0, 1, 2];
    assert!(matches!(knn(&all, &all, &ds, 3, DistanceMetric::Euclidean), Err(NeighborError::KTooLarge { k: 3, available: 2, .. })));
    assert!(matches!(knn(&all, &all, &ds, 0, DistanceMetric::Euclidean), Err(NeighborError::ZeroK)));
    assert!(matches!(knn(&all, &all, &ds, 1, DistanceMetric::Cosine), Err(NeighborError::ZeroVector(0))));
}
