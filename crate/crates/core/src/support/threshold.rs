use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold picked by balanced-accuracy maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedThreshold {
    pub tau: f64,
    pub balanced_accuracy: f64,
    pub candidates: usize,
}

/// `½ (TPR + TNR)` for the rule "positive iff r >= tau", from raw counts.
#[inline]
pub fn balanced_accuracy_from_counts(tp: usize, n_pos: usize, tn: usize, n_neg: usize) -> f64 {
    0.5 * (tp as f64 / n_pos as f64 + tn as f64 / n_neg as f64)
}

/// Balanced accuracy of a fixed threshold.
pub fn balanced_accuracy(positives: &[f64], negatives: &[f64], tau: f64) -> f64 {
    let tp = positives.iter().filter(|&&r| r >= tau).count();
    let tn = negatives.iter().filter(|&&r| r < tau).count();
    balanced_accuracy_from_counts(tp, positives.len(), tn, negatives.len())
}

/// Scans `{min - 1} ∪ {midpoints of consecutive distinct values} ∪ {max + 1}`
/// and returns the smallest candidate with maximal balanced accuracy.
pub fn optimize_balanced_threshold(positives: &[f64], negatives: &[f64]) -> Result<BalancedThreshold> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pos = positives.to_vec();
    let mut neg = negatives.to_vec();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);

    let mut values: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut candidates = Vec::with_capacity(values.len() + 1);
    candidates.push(values[0] - 1.0);
    candidates.extend(values.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(values[values.len() - 1] + 1.0);

    let mut best = BalancedThreshold {
        tau: candidates[0],
        balanced_accuracy: f64::NEG_INFINITY,
        candidates: candidates.len(),
    };
    for &tau in &candidates {
        let tp = pos.len() - pos.partition_point(|&r| r < tau);
        let tn = neg.partition_point(|&r| r < tau);
        let ba = balanced_accuracy_from_counts(tp, pos.len(), tn, neg.len());
        if ba > best.balanced_accuracy {
            best.tau = tau;
            best.balanced_accuracy = ba;
        }
    }
    Ok(best)
}
