//! Offline scoring of a finished stream: top-cluster retention followed by
//! Strict-Hungarian (one global matching) and Greedy-Hungarian (old and new
//! subsets matched independently).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicted cluster ids and ground truth for a completed stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    pub predictions: Vec<usize>,
    pub truths: Vec<usize>,
    /// `|Y_Q|`, the number of ground-truth classes in the stream's label space.
    pub num_total_labels: usize,
    /// Labels of the base classes (`Y_S`).
    pub base_labels: Vec<usize>,
}

impl StreamResult {
    pub fn new(predictions: Vec<usize>, truths: Vec<usize>, num_total_labels: usize, base_labels: Vec<usize>) -> Result<Self> {
        if predictions.len() != truths.len() {
            return Err(Error::InvalidConfig(format!(
                "{} predictions for {} ground-truth labels",
                predictions.len(),
                truths.len()
            )));
        }
        Ok(Self { predictions, truths, num_total_labels, base_labels })
    }

    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }

    fn is_old(&self, label: usize) -> bool {
        self.base_labels.contains(&label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retention {
    /// Retained cluster ids, largest first.
    pub retained: Vec<usize>,
    /// `true` for samples whose cluster was dropped.
    pub dropped: Vec<bool>,
    /// Distinct predicted clusters before retention.
    pub estimated_cluster_count: usize,
}

impl Retention {
    pub fn dropped_count(&self) -> usize {
        self.dropped.iter().filter(|&&d| d).count()
    }
}

/// Keeps the `|Y_Q|` largest predicted clusters (ties to the smaller id).
pub fn retain_top_clusters(result: &StreamResult) -> Retention {
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &p in &result.predictions {
        *sizes.entry(p).or_default() += 1;
    }
    let mut clusters: Vec<(usize, usize)> = sizes.into_iter().collect();
    let estimated_cluster_count = clusters.len();
    clusters.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let retained: Vec<usize> = clusters
        .iter()
        .take(result.num_total_labels)
        .map(|&(c, _)| c)
        .collect();
    let dropped = result.predictions.iter().map(|p| !retained.contains(p)).collect();
    Retention { retained, dropped, estimated_cluster_count }
}

/// Optimal one-to-one partial assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Maximum-profit matching of `min(R, C)` pairs.
///
/// Runs the O(n³) shortest-augmenting-path form of Kuhn–Munkres on the cost
/// `max_entry - profit`, zero-padded to a square matrix.
pub fn hungarian_assign(profit: &[Vec<f64>]) -> Assignment {
    let rows = profit.len();
    let cols = profit.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Assignment { pairs: Vec::new(), total: 0.0 };
    }
    let n = rows.max(cols);
    let max_entry = profit
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            max_entry - profit[i][j]
        } else {
            0.0
        }
    };

    // 1-based potentials and matching, index 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter_map(|j| {
            let i = matched_row[j];
            (i >= 1 && i <= rows && j <= cols).then(|| (i - 1, j - 1))
        })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| profit[i][j]).sum();
    Assignment { pairs, total }
}

/// Accuracies on all samples and on the old and new subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetAccuracy {
    pub all: f64,
    pub old: f64,
    pub new: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub strict: SubsetAccuracy,
    pub greedy: SubsetAccuracy,
    pub estimated_cluster_count: usize,
    pub retained_count: usize,
    pub dropped_sample_count: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Matches the retained clusters appearing in `samples` to `labels` by
/// contingency count and returns the cluster → label map.
fn match_clusters(
    result: &StreamResult,
    retention: &Retention,
    samples: &[usize],
    labels: &[usize],
) -> BTreeMap<usize, usize> {
    let mut clusters: Vec<usize> = samples
        .iter()
        .filter(|&&j| !retention.dropped[j])
        .map(|&j| result.predictions[j])
        .collect();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.is_empty() || labels.is_empty() {
        return BTreeMap::new();
    }
    let mut profit = vec![vec![0.0; labels.len()]; clusters.len()];
    for &j in samples {
        if retention.dropped[j] {
            continue;
        }
        let (Ok(r), Ok(c)) = (
            clusters.binary_search(&result.predictions[j]),
            labels.binary_search(&result.truths[j]),
        ) else {
            continue;
        };
        profit[r][c] += 1.0;
    }
    hungarian_assign(&profit)
        .pairs
        .into_iter()
        .map(|(r, c)| (clusters[r], labels[c]))
        .collect()
}

fn count_correct(result: &StreamResult, retention: &Retention, map: &BTreeMap<usize, usize>, samples: &[usize]) -> usize {
    samples
        .iter()
        .filter(|&&j| !retention.dropped[j] && map.get(&result.predictions[j]) == Some(&result.truths[j]))
        .count()
}

fn subsets(result: &StreamResult) -> (Vec<usize>, Vec<usize>) {
    (0..result.len()).partition(|&j| result.is_old(result.truths[j]))
}

fn label_space(result: &StreamResult) -> (Vec<usize>, Vec<usize>) {
    let mut all: Vec<usize> = result.truths.iter().chain(&result.base_labels).copied().collect();
    all.sort_unstable();
    all.dedup();
    all.into_iter().partition(|&l| result.is_old(l))
}

/// One global matching of retained clusters to the full label space.
pub fn strict_accuracy(result: &StreamResult, retention: &Retention) -> SubsetAccuracy {
    let (old_labels, new_labels) = label_space(result);
    let mut labels = old_labels;
    labels.extend(new_labels);
    labels.sort_unstable();
    let everyone: Vec<usize> = (0..result.len()).collect();
    let map = match_clusters(result, retention, &everyone, &labels);
    let (old, new) = subsets(result);
    SubsetAccuracy {
        all: ratio(count_correct(result, retention, &map, &everyone), result.len()),
        old: ratio(count_correct(result, retention, &map, &old), old.len()),
        new: ratio(count_correct(result, retention, &map, &new), new.len()),
    }
}

/// Old samples matched to base labels and new samples to novel labels,
/// independently. `all` is the size-weighted combination of the two, computed
/// from the pooled hit count so it shares a denominator with the strict score.
pub fn greedy_accuracy(result: &StreamResult, retention: &Retention) -> SubsetAccuracy {
    let (old_labels, new_labels) = label_space(result);
    let (old, new) = subsets(result);
    let old_map = match_clusters(result, retention, &old, &old_labels);
    let new_map = match_clusters(result, retention, &new, &new_labels);
    let hits_old = count_correct(result, retention, &old_map, &old);
    let hits_new = count_correct(result, retention, &new_map, &new);
    SubsetAccuracy {
        all: ratio(hits_old + hits_new, result.len()),
        old: ratio(hits_old, old.len()),
        new: ratio(hits_new, new.len()),
    }
}

/// Retention followed by both protocols.
pub fn evaluate(result: &StreamResult) -> EvalReport {
    let retention = retain_top_clusters(result);
    EvalReport {
        strict: strict_accuracy(result, &retention),
        greedy: greedy_accuracy(result, &retention),
        estimated_cluster_count: retention.estimated_cluster_count,
        retained_count: retention.retained.len(),
        dropped_sample_count: retention.dropped_count(),
    }
}
