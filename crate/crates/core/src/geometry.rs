//! Vector-space primitives: support statistics, per-coordinate standardization,
//! the uniform background density on the sphere and the moment-based vMF
//! concentration estimate.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as having no direction.
pub const ZERO_NORM: f64 = 1e-12;

/// Tolerance on `| ||u|| - 1 |` for a [`UnitEmbedding`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Upper clamp applied to the mean resultant length before estimating κ.
pub const MAX_MEAN_RESULTANT: f64 = 1.0 - 1e-6;

/// Shared hyperparameters of the embedding space and the scoring rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub dim: usize,
    pub epsilon: f64,
    pub temperature: f64,
    pub dirichlet_alpha: f64,
    pub maturity_beta: f64,
    pub spread_c: f64,
}

impl SpaceConfig {
    /// Default hyperparameters for a `dim`-dimensional space.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            epsilon: 1e-5,
            temperature: 1.0,
            dirichlet_alpha: 1e6,
            maturity_beta: 0.5,
            spread_c: 1.0,
        }
    }

    // the negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if !(self.dirichlet_alpha > 0.0) {
            return bad("dirichlet_alpha must be positive");
        }
        if !(self.maturity_beta > 0.0 && self.maturity_beta <= 1.0) {
            return bad("maturity_beta must lie in (0, 1]");
        }
        if !(self.spread_c >= 0.0) {
            return bad("spread_c must be non-negative");
        }
        Ok(())
    }
}

/// Mean and population variance of the raw support features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl SupportStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Centered and variance-scaled feature, before normalization.
    pub fn whiten(&self, h: &[f64], cfg: &SpaceConfig) -> Result<Vec<f64>> {
        check_dim(self.dim(), h.len())?;
        Ok(h.iter()
            .zip(&self.mean)
            .zip(&self.variance)
            .map(|((x, m), v)| (x - m) / libm::sqrt(v + cfg.epsilon))
            .collect())
    }

    /// Maps a raw feature onto the standardized unit sphere.
    pub fn standardize(&self, h: &[f64], cfg: &SpaceConfig) -> Result<UnitEmbedding> {
        UnitEmbedding::normalize(self.whiten(h, cfg)?)
    }

    /// Rescales a raw direction (for instance a classifier weight row) by the
    /// inverse support deviation and normalizes it. No centering is applied.
    pub fn whiten_direction(&self, w: &[f64], cfg: &SpaceConfig) -> Result<UnitEmbedding> {
        check_dim(self.dim(), w.len())?;
        let scaled = w
            .iter()
            .zip(&self.variance)
            .map(|(x, v)| x / libm::sqrt(v + cfg.epsilon))
            .collect();
        UnitEmbedding::normalize(scaled)
    }
}

/// A unit-norm vector on the standardized sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitEmbedding(Vec<f64>);

impl UnitEmbedding {
    /// Divides `v` by its Euclidean norm.
    pub fn normalize(mut v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if !n.is_finite() || n < ZERO_NORM {
            return Err(Error::ZeroVector);
        }
        v.iter_mut().for_each(|x| *x /= n);
        Ok(Self(v))
    }

    /// Wraps a vector that is already unit norm (within [`UNIT_TOLERANCE`]).
    pub fn from_unit(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "expected a unit vector, norm is {n}"
            )));
        }
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }
}

impl Deref for UnitEmbedding {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for UnitEmbedding {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_unit(v)
    }
}

impl From<UnitEmbedding> for Vec<f64> {
    fn from(u: UnitEmbedding) -> Self {
        u.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, got })
    }
}

/// Arithmetic mean and population variance (divide by N) of the support features.
pub fn compute_support_stats<V: AsRef<[f64]>>(features: &[V]) -> Result<SupportStats> {
    let first = features.first().ok_or(Error::EmptyInput)?;
    let dim = first.as_ref().len();
    let n = features.len() as f64;

    let mut mean = alloc::vec![0.0; dim];
    for f in features {
        let f = f.as_ref();
        check_dim(dim, f.len())?;
        mean.iter_mut().zip(f).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut variance = alloc::vec![0.0; dim];
    for f in features {
        variance
            .iter_mut()
            .zip(f.as_ref())
            .zip(&mean)
            .for_each(|((v, x), m)| *v += (x - m) * (x - m));
    }
    variance.iter_mut().for_each(|v| *v /= n);

    Ok(SupportStats { mean, variance })
}

/// Free-function form of [`SupportStats::standardize`].
pub fn standardize(h: &[f64], stats: &SupportStats, cfg: &SpaceConfig) -> Result<UnitEmbedding> {
    stats.standardize(h, cfg)
}

/// `log p0` for the uniform density on `S^(dim-1)`:
/// `log Γ(d/2) - log 2 - (d/2) log π`.
pub fn log_uniform_density(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    libm::lgamma(half) - core::f64::consts::LN_2 - half * libm::log(core::f64::consts::PI)
}

/// Moment-based vMF concentration with small-sample shrinkage.
///
/// `r = ||R|| / n` is clamped to `[0, 1 - 1e-6]`; a singleton (`n <= 1`) has
/// concentration exactly zero.
pub fn vmf_concentration(resultant_norm: f64, n: u64, dim: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    let r = (resultant_norm / nf).clamp(0.0, MAX_MEAN_RESULTANT);
    let r2 = r * r;
    r * (dim as f64 - r2) / (1.0 - r2) * ((nf - 1.0) / (nf + 1.0))
}

/// Concentration-aware attach score of a cluster with `count` members and
/// resultant norm `resultant_norm` for a sample at cosine `cos` to its mean
/// direction: `log n + κ cos - log p0`.
pub fn attach_log_score(count: u64, resultant_norm: f64, cos: f64, dim: usize, log_p0: f64) -> f64 {
    libm::log(count as f64) + vmf_concentration(resultant_norm, count, dim) * cos - log_p0
}
