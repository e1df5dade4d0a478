use serde::{Deserialize, Serialize};

use super::{HarnessError, SceneResult};
use crate::stats::Criterion;

pub const DEFAULT_THRESHOLDS: [f64; 8] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Classification scores of WVC verdicts (predictions) against one
/// displacement criterion (labels) at one p-value threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub label: Criterion,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Number of (WVC verdict, label) pairs behind every row.
    pub pairs: usize,
    /// Mean-ADE rows, then Mean-FDE rows, each in threshold order.
    pub rows: Vec<AgreementRow>,
}

impl AgreementReport {
    pub fn row(&self, label: Criterion, threshold: f64) -> Option<&AgreementRow> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.threshold == threshold)
    }

    pub fn curve(&self, label: Criterion) -> Vec<&AgreementRow> {
        self.rows.iter().filter(|r| r.label == label).collect()
    }
}

/// Accuracy, precision and recall. Precision is 1 when nothing is predicted
/// positive, recall is 1 when there are no positives.
pub fn confusion_scores(tp: usize, fp: usize, fn_: usize, tn: usize) -> (f64, f64, f64) {
    let total = tp + fp + fn_ + tn;
    let accuracy = if total == 0 {
        1.0
    } else {
        (tp + tn) as f64 / total as f64
    };
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    (accuracy, precision, recall)
}

/// Agreement of WVC with Mean-ADE and Mean-FDE verdicts.
///
/// Each of a scene's N WVC p-values is paired with that scene's displacement
/// p-value; at threshold `a` both sides count as violated when `p <= a`.
/// Raising the threshold never removes a positive on either side, so with
/// labels that switch on no later than the predictions, recall rises and
/// precision falls along the sweep.
pub fn agreement_analysis(
    results: &[SceneResult],
    thresholds: &[f64],
) -> Result<AgreementReport, HarnessError> {
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(HarnessError::Contract(format!(
            "threshold {t} outside (0, 1]"
        )));
    }
    let mut pairs: Vec<(f64, f64, f64)> = Vec::new();
    for r in results.iter().filter(|r| r.is_ok()) {
        let (Some(w), Some(d)) = (r.wvc.as_ref(), r.displacement.as_ref()) else {
            continue;
        };
        let (Some(ade), Some(fde)) = (d.verdict(Criterion::MeanAde), d.verdict(Criterion::MeanFde))
        else {
            continue;
        };
        for v in &w.verdicts {
            pairs.push((v.p_value, ade.p_value, fde.p_value));
        }
    }
    if pairs.is_empty() {
        return Err(HarnessError::Contract(
            "no results carry both WVC and ground-truth displacement verdicts".into(),
        ));
    }
    let mut rows = Vec::with_capacity(2 * thresholds.len());
    for (label, pick) in [
        (
            Criterion::MeanAde,
            (|p: &(f64, f64, f64)| p.1) as fn(&(f64, f64, f64)) -> f64,
        ),
        (Criterion::MeanFde, |p| p.2),
    ] {
        for &threshold in thresholds {
            let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
            for p in &pairs {
                match (p.0 <= threshold, pick(p) <= threshold) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
            let (accuracy, precision, recall) = confusion_scores(tp, fp, fn_, tn);
            rows.push(AgreementRow {
                label,
                threshold,
                tp,
                fp,
                fn_,
                tn,
                accuracy,
                precision,
                recall,
            });
        }
    }
    Ok(AgreementReport {
        pairs: pairs.len(),
        rows,
    })
}
