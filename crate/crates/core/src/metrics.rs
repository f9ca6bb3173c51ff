//! Classification metrics: accuracy and macro-averaged precision, recall,
//! and F1 from a confusion matrix.
//!
//! Zero-denominator conventions: a class with no predicted samples has
//! precision 0, a class with no gold samples has recall 0, and F1 is 0
//! whenever precision + recall is 0. Macro averages run over all classes,
//! including empty ones.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    /// `counts[gold * classes + predicted]`.
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        assert!(classes >= 1, "need at least one class");
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, gold: usize, predicted: usize) {
        assert!(gold < self.classes, "gold class {gold} out of range");
        assert!(
            predicted < self.classes,
            "predicted class {predicted} out of range"
        );
        self.counts[gold * self.classes + predicted] += 1;
    }

    pub fn count(&self, gold: usize, predicted: usize) -> usize {
        self.counts[gold * self.classes + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: usize = (0..self.classes).map(|c| self.count(c, c)).sum();
        correct as f64 / total as f64
    }

    pub fn class_metrics(&self, class: usize) -> ClassMetrics {
        let tp = self.count(class, class);
        let predicted: usize = (0..self.classes).map(|g| self.count(g, class)).sum();
        let gold: usize = (0..self.classes).map(|p| self.count(class, p)).sum();
        let precision = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = if gold == 0 {
            0.0
        } else {
            tp as f64 / gold as f64
        };
        ClassMetrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    pub fn per_class(&self) -> Vec<ClassMetrics> {
        (0..self.classes).map(|c| self.class_metrics(c)).collect()
    }

    pub fn macro_precision(&self) -> f64 {
        let sum: f64 = self.per_class().iter().map(|m| m.precision).sum();
        sum / self.classes as f64
    }

    pub fn macro_recall(&self) -> f64 {
        let sum: f64 = self.per_class().iter().map(|m| m.recall).sum();
        sum / self.classes as f64
    }

    /// Macro F1: the unweighted mean of per-class F1 scores.
    pub fn macro_f1(&self) -> f64 {
        let sum: f64 = self.per_class().iter().map(|m| m.f1).sum();
        sum / self.classes as f64
    }
}
