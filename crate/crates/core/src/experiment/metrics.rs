//! Classification metrics on a held-out set.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::classifier::Classifier;
use crate::dataset::EmbeddingDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Metrics over `classes` classes. A class that is never predicted and never
/// present scores 0 for F1 and recall.
pub fn metrics_from_predictions(truth: &[u32], predicted: &[u32], classes: usize) -> Metrics {
    assert_eq!(truth.len(), predicted.len(), "one prediction per sample");
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t as usize][p as usize] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let accuracy = if truth.is_empty() { 0.0 } else { correct as f64 / truth.len() as f64 };
    let mut per_class_recall = Vec::with_capacity(classes);
    let mut per_class_f1 = Vec::with_capacity(classes);
    for c in 0..classes {
        let tp = confusion[c][c];
        let actual: usize = confusion[c].iter().sum();
        let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
        let (fn_, fp) = (actual - tp, predicted_c - tp);
        per_class_recall.push(if actual > 0 { tp as f64 / actual as f64 } else { 0.0 });
        let denom = 2 * tp + fp + fn_;
        per_class_f1.push(if tp > 0 { 2.0 * tp as f64 / denom as f64 } else { 0.0 });
    }
    let macro_f1 = if classes == 0 { 0.0 } else { per_class_f1.iter().sum::<f64>() / classes as f64 };
    Metrics { accuracy, macro_f1, per_class_recall, per_class_f1, confusion }
}

/// Accuracy, macro-F1 and per-class recall of `classifier` on `test`.
pub fn evaluate(classifier: &Classifier, test: &EmbeddingDataset) -> Result<Metrics, ExperimentError> {
    if test.is_empty() {
        return Err(ExperimentError::EmptyTestSet);
    }
    if classifier.input_dim() != test.dim() {
        return Err(ExperimentError::DimensionMismatch { model: classifier.input_dim(), data: test.dim() });
    }
    if classifier.class_count() != test.class_count() as usize {
        return Err(ExperimentError::ClassCountMismatch { model: classifier.class_count(), data: test.class_count() as usize });
    }
    let truth: Vec<u32> = test.samples().iter().map(|s| s.label).collect();
    let predicted = test
        .samples()
        .iter()
        .map(|s| classifier.predict(&s.vector))
        .collect::<Result<Vec<_>, _>>()
        ?;
    Ok(metrics_from_predictions(&truth, &predicted, classifier.class_count()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = metrics_from_predictions(&[0, 1, 2, 1], &[0, 1, 2, 1], 3);
        assert_eq!((m.accuracy, m.macro_f1), (1.0, 1.0));
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let truth: Vec<u32> = (0..40).map(|i| i % 4).collect();
        let m = metrics_from_predictions(&truth, &[2; 40], 4);
        assert_eq!(m.accuracy, 0.25);
        assert_eq!(m.per_class_f1[0], 0.0);
        // class 2: tp 10, fp 30 -> 20 / 50
        assert!((m.per_class_f1[2] - 0.4).abs() < 1e-15);
        assert!((m.macro_f1 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hand_worked_confusion() {
        // class 0: TP = 1, FP = 1, FN = 1, TN = 1
        let m = metrics_from_predictions(&[0, 0, 1, 1], &[0, 1, 0, 1], 2);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.confusion, vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(m.per_class_f1, vec![0.5, 0.5]);
        assert_eq!(m.per_class_recall, vec![0.5, 0.5]);
        assert_eq!(m.macro_f1, 0.5);
    }
}
