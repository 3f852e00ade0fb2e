//! Confusion matrices, the four summary metrics, lead-subset experiment
//! arms and report rendering (CSV and SVG).

mod leads;
pub mod svg;

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use leads::LeadSubset;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("label {value} at index {index} is not 0 or 1")]
    InvalidLabel { index: usize, value: f64 },
    #[error("probability at index {index} is NaN")]
    InvalidProbability { index: usize },
    #[error("empty evaluation: no samples")]
    EmptyEvaluation,
    #[error("invalid lead subset: {0}")]
    InvalidLeadSubset(String),
}

/// Abnormal is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn to_csv(&self) -> String {
        format!(
            "actual,predicted_normal,predicted_abnormal\nnormal,{},{}\nabnormal,{},{}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}

impl Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// A sample is predicted abnormal iff `prob >= threshold`.
pub fn confusion_matrix(probs: &[f64], labels: &[f64], threshold: f64) -> Result<ConfusionMatrix, EvalError> {
    if probs.len() != labels.len() {
        return Err(EvalError::ShapeError(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (index, (&p, &y)) in probs.iter().zip(labels).enumerate() {
        if p.is_nan() {
            return Err(EvalError::InvalidProbability { index });
        }
        let actual = if y == 1.0 {
            true
        } else if y == 0.0 {
            false
        } else {
            return Err(EvalError::InvalidLabel { index, value: y });
        };
        match (actual, p >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Which ratios hit 0/0 and were reported as zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl Degeneracy {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1
    }
}

/// All four values are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: Degeneracy,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(Metrics {
        accuracy: 100.0 * accuracy,
        precision: 100.0 * precision.unwrap_or(0.0),
        recall: 100.0 * recall.unwrap_or(0.0),
        f1: 100.0 * f1.unwrap_or(0.0),
        degenerate: Degeneracy {
            precision: precision.is_none(),
            recall: recall.is_none(),
            f1: f1.is_none(),
        },
    })
}

/// One row of a metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub name: String,
    pub samples: u64,
    pub metrics: Metrics,
}

/// Columns in the order accuracy, precision, recall, f1.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("model,samples,accuracy,precision,recall,f1,degenerate\n");
    for r in rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4},{}",
            r.name,
            r.samples,
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            m.degenerate.any()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let y = [1.0, 0.0, 1.0, 0.0];
        let cm = confusion_matrix(&y, &y, 0.5).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        let m = compute_metrics(&cm).unwrap();
        assert_eq!([m.accuracy, m.precision, m.recall, m.f1], [100.0; 4]);
    }

    #[test]
    fn threshold_boundary_is_positive() {
        let cm = confusion_matrix(&[0.5; 3], &[0.0, 1.0, 0.0], 0.5).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 2,
                tn: 0,
                fn_: 0
            }
        );
    }

    #[test]
    fn four_cases() {
        let cm = confusion_matrix(&[0.9, 0.2, 0.6, 0.4], &[1.0, 1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn hand_computed_metrics() {
        let m = compute_metrics(&ConfusionMatrix {
            tp: 3,
            fp: 1,
            tn: 4,
            fn_: 2,
        })
        .unwrap();
        assert!((m.accuracy - 70.0).abs() < 1e-12);
        assert!((m.precision - 75.0).abs() < 1e-12);
        assert!((m.recall - 60.0).abs() < 1e-12);
        assert!((m.f1 - 200.0 / 3.0).abs() < 1e-9);
        assert!(!m.degenerate.any());
    }

    #[test]
    fn degenerate_and_empty() {
        assert_eq!(
            compute_metrics(&ConfusionMatrix::default()),
            Err(EvalError::EmptyEvaluation)
        );
        let m = compute_metrics(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 5,
            fn_: 0,
        })
        .unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.degenerate.precision && m.degenerate.recall && m.degenerate.f1);
        assert_eq!(m.accuracy, 100.0);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            confusion_matrix(&[0.1], &[], 0.5),
            Err(EvalError::ShapeError(_))
        ));
        assert!(matches!(
            confusion_matrix(&[0.1], &[2.0], 0.5),
            Err(EvalError::InvalidLabel { index: 0, .. })
        ));
        assert!(matches!(
            confusion_matrix(&[f64::NAN], &[1.0], 0.5),
            Err(EvalError::InvalidProbability { index: 0 })
        ));
    }

    #[test]
    fn csv_layouts() {
        let cm = ConfusionMatrix {
            tp: 3,
            fp: 1,
            tn: 4,
            fn_: 2,
        };
        assert_eq!(
            cm.to_csv(),
            "actual,predicted_normal,predicted_abnormal\nnormal,4,1\nabnormal,2,3\n"
        );
        let row = MetricsRow {
            name: "12-lead".into(),
            samples: 10,
            metrics: compute_metrics(&cm).unwrap(),
        };
        assert_eq!(
            metrics_csv(&[row]).lines().nth(1).unwrap(),
            "12-lead,10,70.0000,75.0000,60.0000,66.6667,false"
        );
    }

    fn cases() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(prop::bool::ANY.prop_map(|b| b as u8 as f64), n),
            )
        })
    }

    proptest! {
        #[test]
        fn threshold_monotone((p, y) in cases(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let low = confusion_matrix(&p, &y, lo).unwrap();
            let high = confusion_matrix(&p, &y, hi).unwrap();
            prop_assert!(high.tp <= low.tp);
            prop_assert!(high.tn >= low.tn);
            prop_assert_eq!(low.total(), p.len() as u64);
        }

        #[test]
        fn accuracy_label_symmetric(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let a = compute_metrics(&ConfusionMatrix { tp, fp, tn, fn_ }).unwrap();
            let b = compute_metrics(&ConfusionMatrix { tp: tn, fp: fn_, tn: tp, fn_: fp }).unwrap();
            prop_assert_eq!(a.accuracy, b.accuracy);
            prop_assert_eq!(a.f1 == 0.0, tp == 0);
            for v in [a.accuracy, a.precision, a.recall, a.f1] {
                prop_assert!((0.0..=100.0).contains(&v));
            }
        }

        #[test]
        fn additive_over_shards((p, y) in cases(), cut in 0usize..60) {
            let cut = cut.min(p.len());
            let whole = confusion_matrix(&p, &y, 0.5).unwrap();
            let parts = confusion_matrix(&p[..cut], &y[..cut], 0.5).unwrap()
                + confusion_matrix(&p[cut..], &y[cut..], 0.5).unwrap();
            prop_assert_eq!(whole, parts);
        }
    }
}
