//! Two-dimensional PCA projection for plotting.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::dataset::{EmbeddingDataset, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    #[default]
    Pca,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub label: u32,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub points: Vec<ProjectedPoint>,
    /// Unit principal axes, largest-magnitude component positive.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub warnings: Vec<String>,
}

impl Projection {
    /// `x,y,label,origin` CSV; origin is `real` or `synthetic`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,label,origin\n");
        for p in &self.points {
            let origin = if p.origin.is_synthetic() { "synthetic" } else { "real" };
            out.push_str(&format!("{},{},{},{}\n", p.x, p.y, p.label, origin));
        }
        out
    }
}

/// Projects onto the top two covariance eigenvectors.
pub fn project_2d(dataset: &EmbeddingDataset, method: ProjectionMethod) -> Result<Projection, ExperimentError> {
    let ProjectionMethod::Pca = method;
    let (n, d) = (dataset.len(), dataset.dim());
    if n < 2 {
        return Err(ExperimentError::TooFewPoints(n));
    }
    let mut mean = vec![0.0; d];
    for s in dataset.samples() {
        mean.iter_mut().zip(s.vector.iter()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| dataset.vector(i)[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;

    let mut warnings = Vec::new();
    if cov.trace() <= 0.0 {
        let msg = "all points coincide; projection is identically zero".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        let points = dataset.samples().iter().map(|s| ProjectedPoint { x: 0.0, y: 0.0, label: s.label, origin: s.origin }).collect();
        return Ok(Projection { points, components: [vec![0.0; d], vec![0.0; d]], explained_variance: [0.0; 2], warnings });
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
    let axis = |rank: usize| -> (Vec<f64>, f64) {
        let Some(&col) = order.get(rank) else {
            return (vec![0.0; d], 0.0);
        };
        let mut v: Vec<f64> = eigen.eigenvectors.column(col).iter().copied().collect();
        let pivot = (0..d).fold(0, |best, j| if v[j].abs() > v[best].abs() { j } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        (v, eigen.eigenvalues[col].max(0.0))
    };
    let (first, var_x) = axis(0);
    let (second, var_y) = axis(1);
    let points = (0..n)
        .map(|i| {
            let row = centered.row(i);
            // adding 0.0 turns -0.0 into 0.0
            let dot = |axis: &[f64]| row.iter().zip(axis).map(|(a, b)| a * b).sum::<f64>() + 0.0;
            let s = &dataset.samples()[i];
            ProjectedPoint { x: dot(&first), y: dot(&second), label: s.label, origin: s.origin }
        })
        .collect();
    Ok(Projection { points, components: [first, second], explained_variance: [var_x, var_y], warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn aligns_with_dominant_axis() {
        // covariance diag(4, 1): points (±2, 0), (0, ±1) repeated
        let rows = vec![(vec![2.0, 0.0], 0), (vec![-2.0, 0.0], 0), (vec![0.0, 1.0], 1), (vec![0.0, -1.0], 1)];
        let ds = EmbeddingDataset::from_rows(2, 2, rows).unwrap();
        let p = project_2d(&ds, ProjectionMethod::Pca).unwrap();
        assert!((p.components[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(p.components[0][1].abs() < 1e-12);
        assert_eq!(p.points.len(), 4);
        let xs: Vec<f64> = p.points.iter().map(|q| q.x).collect();
        let ys: Vec<f64> = p.points.iter().map(|q| q.y).collect();
        assert!(variance(&xs) >= variance(&ys));
        assert_eq!(p.points.iter().map(|q| q.label).collect::<Vec<_>>(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn sign_convention() {
        let rows = (0..10).map(|i| (vec![-(i as f64), -(i as f64) * 0.5, 0.1 * (i % 3) as f64], 0)).collect();
        let ds = EmbeddingDataset::from_rows(3, 2, rows).unwrap();
        let p = project_2d(&ds, ProjectionMethod::Pca).unwrap();
        for c in &p.components {
            let pivot = c.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let ds = EmbeddingDataset::from_rows(2, 2, vec![(vec![1.0, 1.0], 0), (vec![1.0, 1.0], 1)]).unwrap();
        let p = project_2d(&ds, ProjectionMethod::Pca).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(p.points.iter().all(|q| q.x == 0.0 && q.y == 0.0));
        let one = EmbeddingDataset::from_rows(2, 2, vec![(vec![1.0, 1.0], 0)]).unwrap();
        assert!(matches!(project_2d(&one, ProjectionMethod::Pca), Err(ExperimentError::TooFewPoints(1))));
        let line = EmbeddingDataset::from_rows(1, 2, vec![(vec![1.0], 0), (vec![3.0], 1)]).unwrap();
        let p = project_2d(&line, ProjectionMethod::Pca).unwrap();
        assert_eq!(p.to_csv(), "x,y,label,origin\n-1,0,0,real\n1,0,1,real\n");
    }
}
