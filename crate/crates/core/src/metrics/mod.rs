//! Binary-classification evaluation.
//!
//! A sample is predicted positive iff `score >= threshold`, everywhere in this module,
//! curves included. Curves sweep the distinct scores in descending order; tied scores
//! form one step.

mod curves;

pub use curves::{pr_curve, roc_curve, PrCurve, PrPoint, RocCurve, RocPoint};

use serde::Serialize;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no samples to evaluate")]
    EmptySet,
    #[error("no positive samples")]
    NoPositives,
    #[error("both classes are required")]
    OneClassOnly,
}

/// A classifier score with its ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub score: f64,
    pub label: bool,
}

impl ScoredSample {
    pub fn new(score: f64, label: bool) -> Self {
        Self { score, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

pub fn confusion(samples: &[ScoredSample], threshold: f64) -> Result<ConfusionMatrix, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut cm = ConfusionMatrix::default();
    for s in samples {
        match (s.label, s.score >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn scalar_metrics(cm: &ConfusionMatrix) -> ScalarMetrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    ScalarMetrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

/// Everything reported for one evaluated split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub scalars: ScalarMetrics,
    pub average_precision: f64,
    pub roc_auc: f64,
    pub pr_points: Vec<PrPoint>,
    pub roc_points: Vec<RocPoint>,
}

/// Flat record written as the metrics JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub average_precision: f64,
    pub roc_auc: f64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl EvalReport {
    pub fn summary(&self) -> EvalSummary {
        EvalSummary {
            accuracy: self.scalars.accuracy,
            precision: self.scalars.precision,
            recall: self.scalars.recall,
            f1: self.scalars.f1,
            average_precision: self.average_precision,
            roc_auc: self.roc_auc,
            tn: self.confusion.tn,
            fp: self.confusion.fp,
            fn_: self.confusion.fn_,
            tp: self.confusion.tp,
        }
    }
}

pub fn evaluate(samples: &[ScoredSample], threshold: f64) -> Result<EvalReport, MetricsError> {
    let cm = confusion(samples, threshold)?;
    let roc = roc_curve(samples)?;
    let pr = pr_curve(samples)?;
    Ok(EvalReport {
        threshold,
        confusion: cm,
        scalars: scalar_metrics(&cm),
        average_precision: pr.average_precision,
        roc_auc: roc.auc,
        pr_points: pr.points,
        roc_points: roc.points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let s = [ScoredSample::new(1.0, true), ScoredSample::new(0.0, false)];
        let cm = confusion(&s, 0.5).unwrap();
        assert_eq!(cm, ConfusionMatrix { tn: 1, fp: 0, fn_: 0, tp: 1 });
        let m = scalar_metrics(&cm);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn threshold_is_inclusive() {
        let s = [ScoredSample::new(0.5, true), ScoredSample::new(0.5, false)];
        let cm = confusion(&s, 0.5).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.tn, cm.fn_), (1, 1, 0, 0));
        assert_eq!(confusion(&[], 0.5), Err(MetricsError::EmptySet));
    }

    #[test]
    fn reported_f1_reproduces() {
        assert!((f1_score(0.9004, 0.9579) - 0.9283).abs() <= 1e-4);
        assert!((f1_score(0.8963, 0.9660) - 0.9298).abs() <= 1e-4);
        assert_eq!(f1_score(0.0, 1.0), 0.0);
    }

    #[test]
    fn degenerate_denominators() {
        let cm = ConfusionMatrix { tn: 3, fp: 0, fn_: 2, tp: 0 };
        let m = scalar_metrics(&cm);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 0.6);
    }

    #[test]
    fn counting_matches_scalar_loop() {
        let mut st = 17u64;
        let mut next = || {
            st = st.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (st >> 11) as f64 / (1u64 << 53) as f64
        };
        let samples: Vec<_> = (0..10_000).map(|_| ScoredSample::new(next(), next() < 0.4)).collect();
        for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let cm = confusion(&samples, t).unwrap();
            let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
            for s in &samples {
                if s.label && s.score >= t {
                    tp += 1
                } else if s.label {
                    fneg += 1
                } else if s.score >= t {
                    fp += 1
                } else {
                    tn += 1
                }
            }
            assert_eq!(cm, ConfusionMatrix { tn, fp, fn_: fneg, tp });
        }
    }
}
