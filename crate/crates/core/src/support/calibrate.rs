//! Proxy-task calibration of the routing, birth and create thresholds.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::threshold::optimize_balanced_threshold;
use super::{top_two, BaseReferenceBank, LabeledSupportSet};
use crate::error::{Error, Result};
use crate::geometry::{attach_log_score, check_dim, dot, log_uniform_density, norm, SpaceConfig};
use crate::stats;

/// Every calibrated decision boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub tau_hi: f64,
    pub tau_lo: f64,
    pub tau_birth_raw: f64,
    pub sigma_pos: f64,
    pub tau_birth_sup: f64,
    pub tau_create: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub margins_positive: Vec<f64>,
    pub margins_negative: Vec<f64>,
    pub base_affinity: Vec<f64>,
    pub balanced_accuracy: f64,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthReport {
    pub birth_positive: Vec<f64>,
    pub birth_negative: Vec<f64>,
    pub true_class_cosines: Vec<f64>,
    pub balanced_accuracy: f64,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateReport {
    pub create_positive: Vec<f64>,
    pub create_negative: Vec<f64>,
    /// `None` when neither side produced a response.
    pub balanced_accuracy: Option<f64>,
    pub candidate_count: usize,
    pub passes: usize,
    pub replay_seed: u64,
}

/// Response sets and achieved balanced accuracy of all three proxy tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub routing: RoutingReport,
    pub birth: BirthReport,
    pub create: CreateReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingCalibration {
    pub tau_hi: f64,
    pub tau_lo: f64,
    pub report: RoutingReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthCalibration {
    pub tau_birth_raw: f64,
    pub sigma_pos: f64,
    pub tau_birth_sup: f64,
    pub report: BirthReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreateCalibration {
    pub tau_create: f64,
    pub report: CreateReport,
}

fn require_classes(bank: &BaseReferenceBank, needed: usize) -> Result<()> {
    let got = bank.num_classes();
    if got < needed {
        Err(Error::TooFewClasses { needed, got })
    } else {
        Ok(())
    }
}

/// Leave-one-class-out margin task for `tau_hi`, and the lower affinity
/// envelope for `tau_lo`.
pub fn calibrate_routing(support: &LabeledSupportSet, bank: &BaseReferenceBank) -> Result<RoutingCalibration> {
    require_classes(bank, 3)?;
    let n = support.len();
    let mut margins_positive = Vec::with_capacity(n);
    let mut margins_negative = Vec::with_capacity(n);
    let mut base_affinity = Vec::with_capacity(n);

    for (u, label) in support.iter() {
        let cos = bank.cosines(u);
        let (_, top1, top2) = top_two(cos.iter().copied());
        margins_positive.push(top1 - top2);
        base_affinity.push(top1);
        let masked = cos.iter().enumerate().filter(|&(k, _)| k != label).map(|(_, &c)| c);
        let (_, m1, m2) = top_two(masked);
        margins_negative.push(m1 - m2);
    }

    let hi = optimize_balanced_threshold(&margins_positive, &margins_negative)?;
    let floor = base_affinity.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = stats::sample_std(&base_affinity).ok_or(Error::EmptyInput)?;
    let tau_lo = hi.tau.min(floor - spread);

    Ok(RoutingCalibration {
        tau_hi: hi.tau,
        tau_lo,
        report: RoutingReport {
            margins_positive,
            margins_negative,
            base_affinity,
            balanced_accuracy: hi.balanced_accuracy,
            candidate_count: hi.candidates,
        },
    })
}

/// Birth statistics with and without the true class, plus the spread-based
/// shrinkage of the resulting threshold.
pub fn calibrate_birth(
    support: &LabeledSupportSet,
    bank: &BaseReferenceBank,
    cfg: &SpaceConfig,
) -> Result<BirthCalibration> {
    require_classes(bank, 2)?;
    let log_p0 = log_uniform_density(support.dim());
    let t = cfg.temperature;
    let n = support.len();
    let mut birth_positive = Vec::with_capacity(n);
    let mut birth_negative = Vec::with_capacity(n);
    let mut true_class_cosines = Vec::with_capacity(n);

    for (u, label) in support.iter() {
        let cos = bank.cosines(u);
        let best = cos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best_other = cos
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != label)
            .map(|(_, &c)| c)
            .fold(f64::NEG_INFINITY, f64::max);
        birth_positive.push(best / t - log_p0);
        birth_negative.push(best_other / t - log_p0);
        true_class_cosines.push(cos[label]);
    }

    let raw = optimize_balanced_threshold(&birth_positive, &birth_negative)?;
    let sigma_pos = stats::sample_std(&true_class_cosines).ok_or(Error::EmptyInput)?;
    let tau_birth_sup = raw.tau - cfg.spread_c * sigma_pos / t;

    Ok(BirthCalibration {
        tau_birth_raw: raw.tau,
        sigma_pos,
        tau_birth_sup,
        report: BirthReport {
            birth_positive,
            birth_negative,
            true_class_cosines,
            balanced_accuracy: raw.balanced_accuracy,
            candidate_count: raw.candidates,
        },
    })
}

struct Episode {
    count: u64,
    resultant: Vec<f64>,
    direction: Vec<f64>,
    resultant_norm: f64,
}

impl Episode {
    fn new(u: &[f64]) -> Self {
        Self { count: 1, resultant: u.to_vec(), direction: u.to_vec(), resultant_norm: norm(u) }
    }

    fn absorb(&mut self, u: &[f64]) {
        self.count += 1;
        self.resultant.iter_mut().zip(u).for_each(|(r, x)| *r += x);
        self.resultant_norm = norm(&self.resultant);
        let n = self.resultant_norm;
        self.direction.iter_mut().zip(&self.resultant).for_each(|(d, r)| *d = r / n);
    }
}

/// Sample order that ignores how the caller listed the support set.
fn canonical_order(support: &LabeledSupportSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..support.len()).collect();
    let labels = support.labels();
    let emb = support.embeddings();
    order.sort_by(|&a, &b| {
        labels[a]
            .cmp(&labels[b])
            .then_with(|| {
                emb[a]
                    .iter()
                    .zip(emb[b].iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
            .then(a.cmp(&b))
    });
    order
}

/// Pseudo-novel replay: every base class plays a novel class in a shuffled
/// replay of the support set, with a fresh episodic memory per pass.
pub fn calibrate_create(
    support: &LabeledSupportSet,
    cfg: &SpaceConfig,
    passes: usize,
    seed: u64,
) -> Result<CreateCalibration> {
    if passes == 0 {
        return Err(Error::InvalidConfig("replay needs at least one pass".into()));
    }
    let dim = support.dim();
    check_dim(cfg.dim, dim)?;
    let log_p0 = log_uniform_density(dim);
    let labels = support.labels();
    let emb = support.embeddings();
    let canonical = canonical_order(support);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut create_positive = Vec::new();
    let mut create_negative = Vec::new();
    for _ in 0..passes {
        let mut order = canonical.clone();
        order.shuffle(&mut rng);
        let mut episodes: Vec<Episode> = Vec::new();
        let mut slot: Vec<Option<usize>> = vec![None; support.num_classes()];

        for &i in &order {
            let u = emb[i].as_slice();
            let label = labels[i];
            if !episodes.is_empty() {
                let e = episodes
                    .iter()
                    .map(|ep| attach_log_score(ep.count, ep.resultant_norm, dot(&ep.direction, u), dim, log_p0))
                    .fold(f64::NEG_INFINITY, f64::max);
                if slot[label].is_none() {
                    create_negative.push(e);
                } else {
                    create_positive.push(e);
                }
            }
            match slot[label] {
                Some(k) => episodes[k].absorb(u),
                None => {
                    slot[label] = Some(episodes.len());
                    episodes.push(Episode::new(u));
                }
            }
        }
    }

    let (tau_create, ba, candidates) = match (create_positive.is_empty(), create_negative.is_empty()) {
        (false, false) => {
            let r = optimize_balanced_threshold(&create_positive, &create_negative)?;
            (r.tau, Some(r.balanced_accuracy), r.candidates)
        }
        (false, true) => {
            let tau = create_positive.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
            let tpr = create_positive.iter().filter(|&&r| r >= tau).count() as f64
                / create_positive.len() as f64;
            (tau, Some(tpr), 1)
        }
        (true, false) => {
            let tau = create_negative.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            let tnr = create_negative.iter().filter(|&&r| r < tau).count() as f64
                / create_negative.len() as f64;
            (tau, Some(tnr), 1)
        }
        (true, true) => (0.0, None, 1),
    };

    Ok(CreateCalibration {
        tau_create,
        report: CreateReport {
            create_positive,
            create_negative,
            balanced_accuracy: ba,
            candidate_count: candidates,
            passes,
            replay_seed: seed,
        },
    })
}

/// Runs all three calibrations.
pub fn calibrate(
    support: &LabeledSupportSet,
    bank: &BaseReferenceBank,
    cfg: &SpaceConfig,
    passes: usize,
    seed: u64,
) -> Result<(ThresholdSet, CalibrationReport)> {
    let routing = calibrate_routing(support, bank)?;
    let birth = calibrate_birth(support, bank, cfg)?;
    let create = calibrate_create(support, cfg, passes, seed)?;
    let thresholds = ThresholdSet {
        tau_hi: routing.tau_hi,
        tau_lo: routing.tau_lo,
        tau_birth_raw: birth.tau_birth_raw,
        sigma_pos: birth.sigma_pos,
        tau_birth_sup: birth.tau_birth_sup,
        tau_create: create.tau_create,
    };
    debug_assert!(thresholds.tau_lo <= thresholds.tau_hi);
    debug_assert!(thresholds.tau_birth_sup <= thresholds.tau_birth_raw);
    Ok((
        thresholds,
        CalibrationReport { routing: routing.report, birth: birth.report, create: create.report },
    ))
}
