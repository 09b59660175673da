//! Support-side model: base-class references and threshold calibration.

mod calibrate;
mod threshold;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, UnitEmbedding};
use crate::stats;

pub use calibrate::{
    calibrate, calibrate_birth, calibrate_create, calibrate_routing, BirthCalibration,
    BirthReport, CalibrationReport, CreateCalibration, CreateReport, RoutingCalibration,
    RoutingReport, ThresholdSet,
};
pub use threshold::{balanced_accuracy, optimize_balanced_threshold, BalancedThreshold};

/// Standardized support embeddings with dense class ids `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSupportSet {
    embeddings: Vec<UnitEmbedding>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledSupportSet {
    pub fn new(embeddings: Vec<UnitEmbedding>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if embeddings.is_empty() {
            return Err(Error::EmptyInput);
        }
        if embeddings.len() != labels.len() {
            return Err(Error::InvalidSupport(format!(
                "{} embeddings but {} labels",
                embeddings.len(),
                labels.len()
            )));
        }
        let dim = embeddings[0].len();
        for e in &embeddings {
            check_dim(dim, e.len())?;
        }
        let mut sizes = vec![0usize; num_classes];
        for &l in &labels {
            if l >= num_classes {
                return Err(Error::InvalidSupport(format!(
                    "label {l} outside 0..{num_classes}"
                )));
            }
            sizes[l] += 1;
        }
        if let Some(k) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSupport(format!("class {k} has no samples")));
        }
        Ok(Self { embeddings, labels, num_classes })
    }

    pub fn embeddings(&self) -> &[UnitEmbedding] {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].len()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_classes];
        self.labels.iter().for_each(|&l| sizes[l] += 1);
        sizes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UnitEmbedding, usize)> {
        self.embeddings.iter().zip(self.labels.iter().copied())
    }
}

/// Where a base reference direction came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Prototype,
    Classifier,
}

/// Fixed base-class reference directions plus support class sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseReferenceBank {
    pub references: Vec<UnitEmbedding>,
    pub class_sizes: Vec<usize>,
    pub median_base_size: f64,
    pub source_flags: Vec<ReferenceSource>,
}

impl BaseReferenceBank {
    pub fn num_classes(&self) -> usize {
        self.references.len()
    }

    pub fn dim(&self) -> usize {
        self.references[0].len()
    }

    /// Cosine of `u` to every reference.
    pub fn cosines(&self, u: &[f64]) -> Vec<f64> {
        self.references.iter().map(|r| r.dot(u)).collect()
    }
}

/// Normalized per-class sum of the support embeddings.
pub fn build_class_prototypes(support: &LabeledSupportSet) -> Result<Vec<UnitEmbedding>> {
    let dim = support.dim();
    let mut sums = vec![vec![0.0; dim]; support.num_classes()];
    for (u, l) in support.iter() {
        sums[l].iter_mut().zip(u.iter()).for_each(|(s, x)| *s += x);
    }
    sums.into_iter().map(UnitEmbedding::normalize).collect()
}

/// Support top-1 correct count and mean top-1 to top-2 margin of a bank.
fn bank_fitness(support: &LabeledSupportSet, refs: &[UnitEmbedding]) -> (usize, f64) {
    let mut correct = 0usize;
    let mut margin_sum = 0.0;
    for (u, label) in support.iter() {
        let (best, first, second) = top_two(refs.iter().map(|r| r.dot(u)));
        if best == Some(label) {
            correct += 1;
        }
        if second.is_finite() {
            margin_sum += first - second;
        }
    }
    (correct, margin_sum / support.len() as f64)
}

/// Index of the maximum (first on ties), the maximum and the runner-up value.
pub(crate) fn top_two(values: impl Iterator<Item = f64>) -> (Option<usize>, f64, f64) {
    let mut best = None;
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > first {
            second = first;
            first = v;
            best = Some(i);
        } else if v > second {
            second = v;
        }
    }
    (best, first, second)
}

/// Picks the base references: the all-prototype bank unless the whitened
/// classifier bank has strictly higher support top-1 accuracy, or equal
/// accuracy and a strictly larger mean top-1 to top-2 margin.
pub fn select_base_references(
    support: &LabeledSupportSet,
    prototypes: Vec<UnitEmbedding>,
    classifier_dirs: Option<Vec<UnitEmbedding>>,
) -> Result<BaseReferenceBank> {
    let k = support.num_classes();
    let dim = support.dim();
    let check = |bank: &[UnitEmbedding]| -> Result<()> {
        if bank.len() != k {
            return Err(Error::DimMismatch { expected: k, got: bank.len() });
        }
        bank.iter().try_for_each(|r| check_dim(dim, r.len()))
    };
    check(&prototypes)?;

    let (references, source) = match classifier_dirs {
        Some(classifier) => {
            check(&classifier)?;
            let (acc_p, margin_p) = bank_fitness(support, &prototypes);
            let (acc_c, margin_c) = bank_fitness(support, &classifier);
            if acc_c > acc_p || (acc_c == acc_p && margin_c > margin_p) {
                (classifier, ReferenceSource::Classifier)
            } else {
                (prototypes, ReferenceSource::Prototype)
            }
        }
        None => (prototypes, ReferenceSource::Prototype),
    };

    let class_sizes = support.class_sizes();
    let sizes_f: Vec<f64> = class_sizes.iter().map(|&s| s as f64).collect();
    let median_base_size = stats::median(&sizes_f).ok_or(Error::EmptyInput)?;
    Ok(BaseReferenceBank {
        references,
        class_sizes,
        median_base_size,
        source_flags: vec![source; k],
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn support_set_validation() {
        assert!(LabeledSupportSet::new(vec![unit(&[1.0, 0.0])], vec![1], 2).is_err());
        assert!(LabeledSupportSet::new(vec![unit(&[1.0, 0.0])], vec![2], 2).is_err());
        assert!(LabeledSupportSet::new(vec![], vec![], 1).is_err());
        assert!(LabeledSupportSet::new(vec![unit(&[1.0, 0.0])], vec![0], 1).is_ok());
    }

    #[test]
    fn prototypes_are_normalized_sums() {
        let s = LabeledSupportSet::new(
            vec![unit(&[1.0, 0.0]), unit(&[1.0, 0.0]), unit(&[1.0, 0.0]), unit(&[0.0, 1.0])],
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap();
        let p = build_class_prototypes(&s).unwrap();
        assert_eq!(p[0].as_slice(), &[1.0, 0.0]);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((p[1][0] - h).abs() < 1e-15 && (p[1][1] - h).abs() < 1e-15);
    }

    #[test]
    fn antipodal_class_has_no_prototype() {
        let s = LabeledSupportSet::new(vec![unit(&[1.0, 0.0]), unit(&[-1.0, 0.0])], vec![0, 0], 1)
            .unwrap();
        assert_eq!(build_class_prototypes(&s), Err(Error::ZeroVector));
    }

    #[test]
    fn prototypes_win_without_classifier() {
        let s = orthogonal_toy(2);
        let p = build_class_prototypes(&s).unwrap();
        let bank = select_base_references(&s, p.clone(), None).unwrap();
        assert_eq!(bank.references, p);
        assert!(bank.source_flags.iter().all(|&f| f == ReferenceSource::Prototype));
        assert_eq!(bank.class_sizes, vec![2, 2, 2]);
        assert_eq!(bank.median_base_size, 2.0);
    }

    // Samples sit near the axes but class 0 samples lean towards axis 1.
    fn skewed_support() -> LabeledSupportSet {
        LabeledSupportSet::new(
            vec![
                unit(&[1.0, 0.9, 0.0]),
                unit(&[1.0, 0.8, 0.0]),
                unit(&[0.0, 1.0, 0.0]),
                unit(&[0.0, 1.0, 0.1]),
                unit(&[0.0, 0.0, 1.0]),
                unit(&[0.1, 0.0, 1.0]),
            ],
            vec![0, 0, 1, 1, 2, 2],
            3,
        )
        .unwrap()
    }

    fn accuracy_oracle(s: &LabeledSupportSet, refs: &[UnitEmbedding]) -> usize {
        s.iter()
            .filter(|(u, l)| {
                let cos: Vec<f64> = refs.iter().map(|r| r.dot(u)).collect();
                let best = (0..cos.len()).fold(0, |b, i| if cos[i] > cos[b] { i } else { b });
                best == *l
            })
            .count()
    }

    #[test]
    fn classifier_bank_selected_on_higher_accuracy() {
        let s = skewed_support();
        // class 0's prototype is dragged towards axis 2, so its samples fall to class 1
        let perturbed = vec![unit(&[0.3, 0.0, 1.0]), unit(&[0.0, 1.0, 0.0]), unit(&[0.0, 0.0, 1.0])];
        let classifier = vec![unit(&[1.0, 0.0, 0.0]), unit(&[0.0, 1.0, 0.0]), unit(&[0.0, 0.0, 1.0])];
        let acc_p = accuracy_oracle(&s, &perturbed);
        let acc_c = accuracy_oracle(&s, &classifier);
        assert!(acc_c > acc_p, "oracle: {acc_c} vs {acc_p}");
        let bank = select_base_references(&s, perturbed, Some(classifier.clone())).unwrap();
        assert_eq!(bank.references, classifier);
        assert_eq!(bank.source_flags, vec![ReferenceSource::Classifier; 3]);
    }

    #[test]
    fn classifier_bank_selected_on_margin_tie_break() {
        let s = orthogonal_toy(1);
        // both banks classify perfectly; the blurred bank has smaller margins
        let blurred = vec![unit(&[1.0, 0.3, 0.3]), unit(&[0.3, 1.0, 0.3]), unit(&[0.3, 0.3, 1.0])];
        let exact = vec![unit(&[1.0, 0.0, 0.0]), unit(&[0.0, 1.0, 0.0]), unit(&[0.0, 0.0, 1.0])];
        assert_eq!(accuracy_oracle(&s, &blurred), accuracy_oracle(&s, &exact));
        let bank = select_base_references(&s, blurred.clone(), Some(exact.clone())).unwrap();
        assert_eq!(bank.source_flags[0], ReferenceSource::Classifier);
        let bank = select_base_references(&s, exact.clone(), Some(blurred)).unwrap();
        assert_eq!(bank.source_flags[0], ReferenceSource::Prototype);
        assert_eq!(bank.references, exact);
    }

    #[test]
    fn select_rejects_wrong_bank_size() {
        let s = orthogonal_toy(1);
        let p = build_class_prototypes(&s).unwrap();
        let short = p[..2].to_vec();
        assert!(matches!(
            select_base_references(&s, p, Some(short)),
            Err(Error::DimMismatch { .. })
        ));
    }
}
