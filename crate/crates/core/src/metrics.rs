//! Accuracy and macro-averaged F1 over the three stance classes.

use serde::Serialize;

use crate::corpus::StanceLabel;
use crate::{Error, Result};

/// 3x3 counts; rows are gold classes, columns predictions, both in
/// `StanceLabel::CLASSES` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold][pred] += 1;
    }
}

pub fn confusion(golds: &[StanceLabel], preds: &[StanceLabel]) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} gold labels but {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&g, &p) in golds.iter().zip(preds) {
        let index = |l: StanceLabel| {
            l.class_index()
                .ok_or_else(|| Error::InvalidArgument(format!("label `{l}` is not a model class")))
        };
        cm.add(index(g)?, index(p)?);
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Unweighted mean of per-class F1. Precision, recall and F1 are taken as 0
/// whenever their denominator is 0.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::InvalidArgument("macro-F1 of an empty confusion matrix".into()));
    }
    let mut sum = 0.0;
    for k in 0..3 {
        let tp = cm.counts[k][k] as f64;
        let predicted: u64 = (0..3).map(|g| cm.counts[g][k]).sum();
        let actual: u64 = cm.counts[k].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(sum / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

impl EvaluationReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        Ok(EvaluationReport {
            accuracy: accuracy(&cm)?,
            macro_f1: macro_f1(&cm)?,
            confusion: cm,
        })
    }

    /// `{metric, value}` lines followed by one `{confusion}` line.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for (metric, value) in [("accuracy", self.accuracy), ("macro_f1", self.macro_f1)] {
            out.push_str(&serde_json::json!({ "metric": metric, "value": value }).to_string());
            out.push('\n');
        }
        out.push_str(&serde_json::json!({ "confusion": self.confusion.counts }).to_string());
        out.push('\n');
        out
    }

    pub fn to_plain(&self) -> String {
        let mut out = format!(
            "accuracy: {:.4}\nmacro_f1: {:.4}\nconfusion (rows gold, cols predicted; favour/against/neutral):\n",
            self.accuracy, self.macro_f1
        );
        for row in &self.confusion.counts {
            out.push_str(&format!("  {:>6} {:>6} {:>6}\n", row[0], row[1], row[2]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use StanceLabel::*;

    #[test]
    fn diagonal_confusion() {
        let labels: Vec<_> = [Favour, Against, Neutral].repeat(3);
        let cm = confusion(&labels, &labels).unwrap();
        assert_eq!(cm.counts, [[3, 0, 0], [0, 3, 0], [0, 0, 3]]);
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
        assert_eq!(macro_f1(&cm).unwrap(), 1.0);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let cm = confusion(&[], &[]).unwrap();
        assert_eq!(cm, ConfusionMatrix::default());
        assert!(accuracy(&cm).is_err());
        assert!(macro_f1(&cm).is_err());
        assert!(confusion(&[Favour], &[]).is_err());
        assert!(confusion(&[Unrelated], &[Favour]).is_err());
    }

    #[test]
    fn hand_tallied_accuracy() {
        let cm = ConfusionMatrix::from_counts([[5, 1, 0], [2, 3, 1], [0, 0, 8]]);
        assert_eq!(accuracy(&cm).unwrap(), 0.8);
        let zero = ConfusionMatrix::from_counts([[0, 1, 0], [1, 0, 0], [1, 0, 0]]);
        assert_eq!(accuracy(&zero).unwrap(), 0.0);
    }

    #[test]
    fn single_class_predictions_on_balanced_set() {
        let cm = ConfusionMatrix::from_counts([[10, 0, 0], [10, 0, 0], [10, 0, 0]]);
        assert!((macro_f1(&cm).unwrap() - 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn records_format() {
        let report =
            EvaluationReport::from_confusion(ConfusionMatrix::from_counts([[1, 0, 0], [0, 1, 0], [0, 0, 2]]))
                .unwrap();
        let text = report.to_records();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"metric":"accuracy","value":1.0}"#);
        assert_eq!(lines[2], r#"{"confusion":[[1,0,0],[0,1,0],[0,0,2]]}"#);
    }
}
