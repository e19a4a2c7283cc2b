use serde::Serialize;

use super::{MetricsError, ScoredSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub average_precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Cumulative `(threshold, tp, fp)` at every distinct score, descending.
fn sweep(samples: &[ScoredSample]) -> (Vec<(f64, u64, u64)>, u64, u64) {
    let mut sorted: Vec<&ScoredSample> = samples.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut steps: Vec<(f64, u64, u64)> = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (i, s) in sorted.iter().enumerate() {
        if s.label {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = sorted.get(i + 1).is_none_or(|n| n.score != s.score);
        if last_of_group {
            steps.push((s.score, tp, fp));
        }
    }
    (steps, tp, fp)
}

/// Precision-recall curve and step-wise average precision `sum (R_n - R_{n-1}) P_n`.
pub fn pr_curve(samples: &[ScoredSample]) -> Result<PrCurve, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let (steps, pos, _) = sweep(samples);
    if pos == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut points = Vec::with_capacity(steps.len());
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (threshold, tp, fp) in steps {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push(PrPoint {
            threshold,
            recall,
            precision,
        });
    }
    Ok(PrCurve {
        points,
        average_precision: ap,
    })
}

/// ROC curve from `(0, 0)` through every distinct threshold, with trapezoidal AUC.
pub fn roc_curve(samples: &[ScoredSample]) -> Result<RocCurve, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let (steps, pos, neg) = sweep(samples);
    if pos == 0 || neg == 0 {
        return Err(MetricsError::OneClassOnly);
    }
    let mut points = Vec::with_capacity(steps.len() + 1);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    });
    let mut auc = 0.0;
    for (threshold, tp, fp) in steps {
        let p = RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        };
        let prev = points.last().unwrap();
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(score: f64, label: bool) -> ScoredSample {
        ScoredSample::new(score, label)
    }

    #[test]
    fn two_sample_ap() {
        let c = pr_curve(&[s(0.2, true), s(0.9, false)]).unwrap();
        assert_eq!(c.average_precision, 0.5);
        assert_eq!(c.points.len(), 2);
    }

    #[test]
    fn separated_scores() {
        let good = [s(0.9, true), s(0.8, true), s(0.3, false), s(0.1, false)];
        assert_eq!(pr_curve(&good).unwrap().average_precision, 1.0);
        assert_eq!(roc_curve(&good).unwrap().auc, 1.0);
        let bad = [s(0.1, true), s(0.2, true), s(0.3, false), s(0.9, false)];
        assert_eq!(roc_curve(&bad).unwrap().auc, 0.0);
    }

    #[test]
    fn ties_form_single_step() {
        let c = roc_curve(&[s(0.5, true), s(0.5, false)]).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.auc, 0.5);
    }

    #[test]
    fn errors() {
        assert_eq!(pr_curve(&[s(0.4, false)]), Err(MetricsError::NoPositives));
        assert_eq!(roc_curve(&[s(0.4, true)]), Err(MetricsError::OneClassOnly));
        assert_eq!(roc_curve(&[]), Err(MetricsError::EmptySet));
    }

    #[test]
    fn curve_points_are_monotone() {
        let samples: Vec<_> = (0..50).map(|i| s(((i * 37) % 50) as f64 / 50.0, i % 3 == 0)).collect();
        let roc = roc_curve(&samples).unwrap();
        for w in roc.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr && w[1].threshold < w[0].threshold);
        }
        let pr = pr_curve(&samples).unwrap();
        for w in pr.points.windows(2) {
            assert!(w[1].recall >= w[0].recall && w[1].threshold < w[0].threshold);
        }
    }
}
