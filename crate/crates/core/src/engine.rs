//! The online decision loop over a dynamic prototype memory.
//!
//! Prototype indices are global: `0..K_base` are the fixed base references,
//! `K_base..K_t` the novel prototypes in creation order. The label emitted for
//! a sample is the index of the prototype it ends up in.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{attach_log_score, check_dim, dot, log_uniform_density, norm, SpaceConfig, UnitEmbedding};
use crate::stats;
use crate::support::{top_two, BaseReferenceBank, ThresholdSet};

/// An evolving novel cluster: member count, running resultant and its direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovelPrototype {
    pub count: u64,
    pub resultant: Vec<f64>,
    pub direction: Vec<f64>,
}

impl NovelPrototype {
    fn seed(u: &[f64]) -> Self {
        Self { count: 1, resultant: u.to_vec(), direction: u.to_vec() }
    }

    fn absorb(&mut self, u: &[f64]) {
        self.count += 1;
        self.resultant.iter_mut().zip(u).for_each(|(r, x)| *r += x);
        let n = norm(&self.resultant);
        // A resultant can only vanish if the members cancel exactly; keep the
        // previous direction in that case.
        if n > 0.0 {
            self.direction.iter_mut().zip(&self.resultant).for_each(|(d, r)| *d = r / n);
        }
    }

    pub fn resultant_norm(&self) -> f64 {
        norm(&self.resultant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeMemory {
    pub base: BaseReferenceBank,
    pub base_counts: Vec<u64>,
    pub novel: Vec<NovelPrototype>,
    total_count: u64,
}

impl PrototypeMemory {
    pub fn new(base: BaseReferenceBank) -> Self {
        let base_counts: Vec<u64> = base.class_sizes.iter().map(|&n| n as u64).collect();
        let total_count = base_counts.iter().sum();
        Self { base, base_counts, novel: Vec::new(), total_count }
    }

    pub fn num_base(&self) -> usize {
        self.base_counts.len()
    }

    /// `K_t`, the number of active prototypes.
    pub fn len(&self) -> usize {
        self.num_base() + self.novel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, k: usize) -> u64 {
        match k.checked_sub(self.num_base()) {
            None => self.base_counts[k],
            Some(j) => self.novel[j].count,
        }
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        match k.checked_sub(self.num_base()) {
            None => &self.base.references[k],
            Some(j) => &self.novel[j].direction,
        }
    }

    /// Sum of all prototype counts (base and novel).
    pub fn total_count(&self) -> u64 {
        self.total_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    BaseOnly,
    NovelOnly,
    Full,
    EmptyCandidate,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::BaseOnly => "base_only",
            Route::NovelOnly => "novel_only",
            Route::Full => "full",
            Route::EmptyCandidate => "empty_candidate",
        }
    }
}

/// Final decision for one sample; the index is the global prototype index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Decision {
    AssignBase(usize),
    AssignNovel(usize),
    Create(usize),
}

impl Decision {
    pub fn index(self) -> usize {
        match self {
            Decision::AssignBase(k) | Decision::AssignNovel(k) | Decision::Create(k) => k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::AssignBase(_) => "assign_base",
            Decision::AssignNovel(_) => "assign_novel",
            Decision::Create(_) => "create",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttachCandidate {
    pub index: usize,
    pub score: f64,
}

/// Everything the engine computed for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub step_index: u64,
    pub route: Route,
    pub g_cos: f64,
    pub g_mar: f64,
    pub birth_statistic: Option<f64>,
    pub best_attach: Option<AttachCandidate>,
    pub decision: Decision,
    pub tau_birth_used: f64,
    pub eta_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    pub route: Route,
    pub candidates: Vec<usize>,
    pub g_cos: f64,
    pub g_mar: f64,
}

/// Prototype memory plus the calibrated and adaptive thresholds.
///
/// Single writer: [`StreamState::step`] takes `&mut self`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    pub memory: PrototypeMemory,
    pub tau_birth_current: f64,
    pub eta: f64,
    pub step_index: u64,
    pub thresholds: ThresholdSet,
    pub cfg: SpaceConfig,
    pub log_p0: f64,
}

impl StreamState {
    pub fn new(base: BaseReferenceBank, thresholds: ThresholdSet, cfg: SpaceConfig) -> Result<Self> {
        cfg.validate()?;
        if base.num_classes() < 2 {
            return Err(Error::TooFewClasses { needed: 2, got: base.num_classes() });
        }
        for r in &base.references {
            check_dim(cfg.dim, r.len())?;
        }
        Ok(Self {
            memory: PrototypeMemory::new(base),
            tau_birth_current: thresholds.tau_birth_sup,
            eta: 0.0,
            step_index: 0,
            thresholds,
            log_p0: log_uniform_density(cfg.dim),
            cfg,
        })
    }

    fn check_candidates(&self, candidates: &[usize]) -> Result<()> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let len = self.memory.len();
        match candidates.iter().find(|&&k| k >= len) {
            Some(&index) => Err(Error::BadCandidate { index, len }),
            None => Ok(()),
        }
    }

    /// Temperature-scaled cosine plus the Dirichlet-smoothed log size prior.
    /// The prior is normalized over every active prototype, not just the candidates.
    pub fn score_memory(&self, u: &[f64], candidates: &[usize]) -> Result<Vec<f64>> {
        self.check_candidates(candidates)?;
        let alpha = self.cfg.dirichlet_alpha;
        let log_norm = libm::log(self.memory.total_count() as f64 + self.memory.len() as f64 * alpha);
        Ok(candidates
            .iter()
            .map(|&k| {
                let cos = dot(self.memory.direction(k), u);
                cos / self.cfg.temperature + libm::log(self.memory.count(k) as f64 + alpha) - log_norm
            })
            .collect())
    }

    /// Gate on base-class evidence.
    pub fn route_candidates(&self, u: &[f64]) -> Routing {
        let (_, g_cos, second) = top_two(self.memory.base.references.iter().map(|r| r.dot(u)));
        let g_mar = g_cos - second;
        let k_base = self.memory.num_base();
        let (route, candidates) = if g_mar >= self.thresholds.tau_hi {
            (Route::BaseOnly, (0..k_base).collect())
        } else if g_cos < self.thresholds.tau_lo {
            if self.memory.novel.is_empty() {
                (Route::EmptyCandidate, Vec::new())
            } else {
                (Route::NovelOnly, (k_base..self.memory.len()).collect())
            }
        } else {
            (Route::Full, (0..self.memory.len()).collect())
        };
        Routing { route, candidates, g_cos, g_mar }
    }

    /// Best candidate cosine over the temperature, against the uniform background.
    pub fn birth_statistic(&self, u: &[f64], candidates: &[usize]) -> Result<f64> {
        self.check_candidates(candidates)?;
        let best = candidates
            .iter()
            .map(|&k| dot(self.memory.direction(k), u))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(best / self.cfg.temperature - self.log_p0)
    }

    /// Best attach score over all novel prototypes; ties go to the earliest one.
    pub fn attach_score(&self, u: &[f64]) -> Result<AttachCandidate> {
        let k_base = self.memory.num_base();
        let mut best: Option<AttachCandidate> = None;
        for (j, p) in self.memory.novel.iter().enumerate() {
            let score = attach_log_score(p.count, p.resultant_norm(), dot(&p.direction, u), self.cfg.dim, self.log_p0);
            if best.is_none_or(|b| score > b.score) {
                best = Some(AttachCandidate { index: k_base + j, score });
            }
        }
        best.ok_or(Error::NoNovelPrototypes)
    }

    fn argmax_score(&self, u: &[f64], candidates: &[usize]) -> Result<usize> {
        let scores = self.score_memory(u, candidates)?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(candidates[best])
    }

    fn assign(&self, k: usize) -> Decision {
        if k < self.memory.num_base() {
            Decision::AssignBase(k)
        } else {
            Decision::AssignNovel(k)
        }
    }

    /// Processes one standardized sample and updates the memory and the
    /// adaptive birth threshold.
    pub fn step(&mut self, u: &UnitEmbedding) -> Result<(usize, DecisionTrace)> {
        check_dim(self.cfg.dim, u.len())?;
        let routing = self.route_candidates(u);
        let tau_birth_used = self.tau_birth_current;
        let eta_used = self.eta;
        let create = Decision::Create(self.memory.len());

        let mut birth_statistic = None;
        let mut best_attach = None;
        let decision = match routing.route {
            Route::BaseOnly => self.assign(self.argmax_score(u, &routing.candidates)?),
            Route::EmptyCandidate => create,
            Route::NovelOnly | Route::Full => {
                let lambda = self.birth_statistic(u, &routing.candidates)?;
                birth_statistic = Some(lambda);
                if lambda >= tau_birth_used {
                    self.assign(self.argmax_score(u, &routing.candidates)?)
                } else if self.memory.novel.is_empty() {
                    create
                } else {
                    let best = self.attach_score(u)?;
                    best_attach = Some(best);
                    if best.score >= self.thresholds.tau_create {
                        Decision::AssignNovel(best.index)
                    } else {
                        create
                    }
                }
            }
        };

        self.apply(decision, u);
        let trace = DecisionTrace {
            step_index: self.step_index,
            route: routing.route,
            g_cos: routing.g_cos,
            g_mar: routing.g_mar,
            birth_statistic,
            best_attach,
            decision,
            tau_birth_used,
            eta_used,
        };
        self.step_index += 1;
        self.update_birth_threshold();
        Ok((decision.index(), trace))
    }

    fn apply(&mut self, decision: Decision, u: &[f64]) {
        let k_base = self.memory.num_base();
        match decision {
            Decision::AssignBase(k) => self.memory.base_counts[k] += 1,
            Decision::AssignNovel(k) => self.memory.novel[k - k_base].absorb(u),
            Decision::Create(_) => self.memory.novel.push(NovelPrototype::seed(u)),
        }
        self.memory.total_count += 1;
    }

    /// Size a novel prototype needs before it counts as mature.
    pub fn maturity_cutoff(&self) -> u64 {
        let x = libm::pow(self.memory.base.median_base_size, self.cfg.maturity_beta);
        libm::floor(x + 0.5) as u64
    }

    /// Tightens the birth threshold towards the robust lower fence of the
    /// mature prototypes' self-explanation strengths.
    pub fn update_birth_threshold(&mut self) {
        let tau_sup = self.thresholds.tau_birth_sup;
        let cutoff = self.maturity_cutoff();
        let t = self.cfg.temperature;
        let mature: Vec<&NovelPrototype> = self.memory.novel.iter().filter(|p| p.count >= cutoff).collect();
        if mature.len() < 2 {
            self.eta = 0.0;
            self.tau_birth_current = tau_sup;
            return;
        }
        let strengths: Vec<f64> = mature
            .iter()
            .map(|p| {
                let n = p.count as f64;
                (n - 1.0) / (n + 1.0) * (p.resultant_norm() / n) / t - self.log_p0
            })
            .collect();
        let sizes: Vec<f64> = mature.iter().map(|p| p.count as f64).collect();
        // both non-empty here
        let fence = stats::median(&strengths).unwrap_or(tau_sup) - stats::mad(&strengths).unwrap_or(0.0);
        let m = stats::median(&sizes).unwrap_or(0.0);
        let n_med = self.memory.base.median_base_size;
        self.eta = m / (m + n_med);
        self.tau_birth_current = tau_sup.min((1.0 - self.eta) * tau_sup + self.eta * fence);
    }

    /// Steps through already standardized samples and collects the traces.
    pub fn run<'a, I>(&mut self, stream: I) -> Result<Vec<DecisionTrace>>
    where
        I: IntoIterator<Item = &'a UnitEmbedding>,
    {
        stream.into_iter().map(|u| self.step(u).map(|(_, t)| t)).collect()
    }
}
