//! Seeded vMF-mixture benchmarks.
//!
//! Every class draws from its own ChaCha8 stream (`set_stream(class + 1)`),
//! so a class's samples do not depend on how many classes come before it.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, ZERO_NORM};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanScheme {
    /// Gram-Schmidt over seeded Gaussian draws. Needs `dim >= classes`.
    #[default]
    RandomOrthonormal,
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub dim: usize,
    pub num_base_classes: usize,
    pub num_novel_classes: usize,
    /// Concentration shared by every class.
    pub kappa: f64,
    /// Samples drawn per base class, split between support and stream.
    pub samples_per_class: usize,
    /// Stream samples per novel class.
    pub novel_samples_per_class: usize,
    #[serde(default = "half")]
    pub support_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub mean_scheme: MeanScheme,
}

fn half() -> f64 {
    0.5
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::SpecInfeasible(msg));
        if self.dim < 2 {
            return bad(format!("dimension {} is below 2", self.dim));
        }
        if self.num_base_classes == 0 {
            return bad("at least one base class is required".into());
        }
        if self.samples_per_class < 2 {
            return bad(format!(
                "{} samples per base class cannot be split into support and stream",
                self.samples_per_class
            ));
        }
        if self.num_novel_classes > 0 && self.novel_samples_per_class == 0 {
            return bad("novel classes need at least one sample".into());
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa {} must be finite and non-negative", self.kappa));
        }
        if !(self.support_fraction > 0.0 && self.support_fraction < 1.0) {
            return bad(format!("support fraction {} outside (0, 1)", self.support_fraction));
        }
        let classes = self.num_classes();
        if self.mean_scheme == MeanScheme::RandomOrthonormal && self.dim < classes {
            return bad(format!("{classes} orthonormal means do not fit in dimension {}", self.dim));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.num_base_classes + self.num_novel_classes
    }

    /// Support samples per base class: `round(n * fraction)`, kept in `[1, n - 1]`.
    pub fn support_per_class(&self) -> usize {
        let n = self.samples_per_class;
        let s = libm::round(n as f64 * self.support_fraction) as usize;
        s.clamp(1, n - 1)
    }
}

/// Raw features plus ground truth. Labels `0..B` are base, `B..B+N` novel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub support_features: Vec<Vec<f64>>,
    pub support_labels: Vec<usize>,
    pub stream_features: Vec<Vec<f64>>,
    pub stream_labels: Vec<usize>,
    pub base_labels: Vec<usize>,
    pub num_total_labels: usize,
    pub means: Vec<Vec<f64>>,
}

fn gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = norm(&v);
    if n <= ZERO_NORM {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// Draws `count` samples from vMF(`mu`, `kappa`) with Wood's rejection sampler.
///
/// `mu` must be unit length with at least two coordinates.
pub fn sample_vmf<R: Rng + ?Sized>(mu: &[f64], kappa: f64, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = mu.len();
    let dm1 = (d - 1) as f64;
    // written so that large kappa does not cancel
    let b = dm1 / (2.0 * kappa + libm::sqrt(4.0 * kappa * kappa + dm1 * dm1));
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dm1 * libm::log(1.0 - x0 * x0);
    let beta = Beta::new(0.5 * dm1, 0.5 * dm1).expect("shape parameters are positive");

    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + dm1 * libm::log(1.0 - x0 * w) - c < libm::log(u) {
            continue;
        }
        let mut v = gaussian(d, rng);
        let along = dot(&v, mu);
        v.iter_mut().zip(mu).for_each(|(x, m)| *x -= along * m);
        let Some(v) = normalized(v) else { continue };
        let w = w.clamp(-1.0, 1.0);
        let t = libm::sqrt(1.0 - w * w);
        let x: Vec<f64> = mu.iter().zip(&v).map(|(m, vi)| w * m + t * vi).collect();
        out.push(normalized(x).expect("w·mu + t·v has unit norm"));
    }
    out
}

fn class_means(spec: &BenchmarkSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let k = spec.num_classes();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    while means.len() < k {
        let mut v = gaussian(spec.dim, rng);
        if spec.mean_scheme == MeanScheme::RandomOrthonormal {
            // two passes keep the basis orthogonal to ~1e-15
            for _ in 0..2 {
                for m in &means {
                    let p = dot(&v, m);
                    v.iter_mut().zip(m).for_each(|(x, mi)| *x -= p * mi);
                }
            }
        }
        if let Some(v) = normalized(v) {
            means.push(v);
        }
    }
    means
}

/// Generates raw support and stream features from `spec`. Pure in `spec`.
pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = class_means(spec, &mut rng);
    let per_support = spec.support_per_class();

    let mut support_features = Vec::new();
    let mut support_labels = Vec::new();
    let mut stream: Vec<(Vec<f64>, usize)> = Vec::new();
    for (class, mu) in means.iter().enumerate() {
        let mut class_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        class_rng.set_stream(class as u64 + 1);
        if class < spec.num_base_classes {
            let samples = sample_vmf(mu, spec.kappa, spec.samples_per_class, &mut class_rng);
            let mut samples = samples.into_iter();
            for x in samples.by_ref().take(per_support) {
                support_features.push(x);
                support_labels.push(class);
            }
            stream.extend(samples.map(|x| (x, class)));
        } else {
            let samples = sample_vmf(mu, spec.kappa, spec.novel_samples_per_class, &mut class_rng);
            stream.extend(samples.into_iter().map(|x| (x, class)));
        }
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffle_rng.set_stream(u64::MAX);
    stream.shuffle(&mut shuffle_rng);
    let (stream_features, stream_labels) = stream.into_iter().unzip();

    Ok(Benchmark {
        support_features,
        support_labels,
        stream_features,
        stream_labels,
        base_labels: (0..spec.num_base_classes).collect(),
        num_total_labels: spec.num_classes(),
        means,
    })
}
