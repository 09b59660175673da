//! Glue between files and the core crate. Each function here is pure in its
//! inputs; the `commands` module only adds paths and serialization.

use std::time::Instant;

use discovery_core::engine::AttachCandidate;
use discovery_core::{
    build_class_prototypes, calibrate, compute_support_stats, evaluate, generate_benchmark, select_base_references,
    BaseReferenceBank, BenchmarkSpec, CalibrationReport, Decision, DecisionTrace, EvalReport, LabeledSupportSet,
    NovelPrototype, SpaceConfig, StreamResult, StreamState, SupportStats, ThresholdSet, UnitEmbedding,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pacf::FeatureFile;

/// Everything the online stage needs, produced once from the support set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub config: SpaceConfig,
    pub replay_passes: usize,
    pub replay_seed: u64,
    /// Original support label of each base class index.
    pub class_labels: Vec<i32>,
    pub support_stats: SupportStats,
    pub bank: BaseReferenceBank,
    pub thresholds: ThresholdSet,
    pub report: CalibrationReport,
}

/// Ground truth for a stream file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub labels: Vec<usize>,
    pub base_labels: Vec<usize>,
    pub num_total_labels: usize,
}

/// Maps arbitrary non-negative support labels onto `0..K` in ascending order.
fn dense_labels(labels: &[i32]) -> Result<(Vec<usize>, Vec<i32>), CliError> {
    if let Some(&bad) = labels.iter().find(|&&l| l < 0) {
        return Err(CliError::NegativeLabel(bad));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let dense = labels.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    Ok((dense, classes))
}

/// Standardizes the support set, picks base references and runs all three
/// calibrations. `classifier` holds one raw weight row per class, in label order.
pub fn calibrate_support(
    support: &FeatureFile,
    classifier: Option<&FeatureFile>,
    run: &RunConfig,
) -> anyhow::Result<CalibrationArtifact> {
    let labels = support.labels.as_ref().ok_or(CliError::UnlabeledSupport)?;
    let cfg = run.space(support.dim)?;
    let (dense, class_labels) = dense_labels(labels)?;

    let raw = support.rows_f64();
    let stats = compute_support_stats(&raw)?;
    let embeddings = raw.iter().map(|h| stats.standardize(h, &cfg)).collect::<Result<Vec<_>, _>>()?;
    let support_set = LabeledSupportSet::new(embeddings, dense, class_labels.len())?;

    let prototypes = build_class_prototypes(&support_set)?;
    let classifier = match classifier {
        Some(c) => {
            if c.dim != support.dim {
                return Err(CliError::DimMismatch { expected: support.dim, got: c.dim }.into());
            }
            let rows = c.rows_f64();
            Some(rows.iter().map(|w| stats.whiten_direction(w, &cfg)).collect::<Result<Vec<_>, _>>()?)
        }
        None => None,
    };
    let bank = select_base_references(&support_set, prototypes, classifier)?;
    let (thresholds, report) = calibrate(&support_set, &bank, &cfg, run.replay_passes, run.replay_seed)?;

    Ok(CalibrationArtifact {
        config: cfg,
        replay_passes: run.replay_passes,
        replay_seed: run.replay_seed,
        class_labels,
        support_stats: stats,
        bank,
        thresholds,
        report,
    })
}

pub fn standardize_stream(artifact: &CalibrationArtifact, stream: &FeatureFile) -> anyhow::Result<Vec<UnitEmbedding>> {
    if stream.dim != artifact.config.dim {
        return Err(CliError::DimMismatch { expected: artifact.config.dim, got: stream.dim }.into());
    }
    let out = stream
        .rows_f64()
        .iter()
        .map(|h| artifact.support_stats.standardize(h, &artifact.config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(out)
}

pub fn initial_state(artifact: &CalibrationArtifact) -> anyhow::Result<StreamState> {
    Ok(StreamState::new(artifact.bank.clone(), artifact.thresholds, artifact.config.clone())?)
}

pub struct StreamRun {
    pub state: StreamState,
    pub traces: Vec<DecisionTrace>,
}

pub fn run_stream(artifact: &CalibrationArtifact, stream: &[UnitEmbedding]) -> anyhow::Result<StreamRun> {
    let mut state = initial_state(artifact)?;
    let traces = state.run(stream)?;
    Ok(StreamRun { state, traces })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTrajectory {
    pub initial: f64,
    pub final_value: f64,
    pub min: f64,
    pub max: f64,
    /// First step whose birth threshold sat strictly below the supremum.
    pub first_tightened_step: Option<u64>,
    pub tightened_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionCounts {
    pub assign_base: u64,
    pub assign_novel: u64,
    pub create: u64,
}

/// Final memory after a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub steps: u64,
    pub base_counts: Vec<u64>,
    pub novel: Vec<NovelPrototype>,
    pub eta: f64,
    pub tau_birth_sup: f64,
    pub tau_birth_current: f64,
    pub trajectory: ThresholdTrajectory,
    pub decisions: DecisionCounts,
}

impl Snapshot {
    pub fn new(state: &StreamState, traces: &[DecisionTrace]) -> Self {
        let sup = state.thresholds.tau_birth_sup;
        let mut t = ThresholdTrajectory {
            initial: sup,
            final_value: state.tau_birth_current,
            min: sup,
            max: sup,
            first_tightened_step: None,
            tightened_steps: 0,
        };
        let mut d = DecisionCounts { assign_base: 0, assign_novel: 0, create: 0 };
        for tr in traces {
            let tau = tr.tau_birth_used;
            t.min = t.min.min(tau);
            t.max = t.max.max(tau);
            if tau < sup {
                t.tightened_steps += 1;
                t.first_tightened_step.get_or_insert(tr.step_index);
            }
            match tr.decision {
                Decision::AssignBase(_) => d.assign_base += 1,
                Decision::AssignNovel(_) => d.assign_novel += 1,
                Decision::Create(_) => d.create += 1,
            }
        }
        Self {
            steps: state.step_index,
            base_counts: state.memory.base_counts.clone(),
            novel: state.memory.novel.clone(),
            eta: state.eta,
            tau_birth_sup: sup,
            tau_birth_current: state.tau_birth_current,
            trajectory: t,
            decisions: d,
        }
    }
}

pub fn evaluate_trace(traces: &[DecisionTrace], truth: &Truth) -> anyhow::Result<EvalReport> {
    if traces.len() != truth.labels.len() {
        return Err(CliError::LengthMismatch { trace: traces.len(), truth: truth.labels.len() }.into());
    }
    let predictions = traces.iter().map(|t| t.decision.index()).collect();
    let result = StreamResult::new(
        predictions,
        truth.labels.clone(),
        truth.num_total_labels,
        truth.base_labels.clone(),
    )?;
    Ok(evaluate(&result))
}

/// One row of the routing-region export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub step: u64,
    pub g_cos: f64,
    pub g_mar: f64,
    pub birth_statistic: Option<f64>,
    pub best_attach_score: Option<f64>,
    pub route: String,
    pub decision: String,
    pub prototype: usize,
}

impl From<&DecisionTrace> for RegionRow {
    fn from(t: &DecisionTrace) -> Self {
        Self {
            step: t.step_index,
            g_cos: t.g_cos,
            g_mar: t.g_mar,
            birth_statistic: t.birth_statistic,
            best_attach_score: t.best_attach.map(|a: AttachCandidate| a.score),
            route: t.route.as_str().to_owned(),
            decision: t.decision.as_str().to_owned(),
            prototype: t.decision.index(),
        }
    }
}

/// Per-step wall-clock latency in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub steps: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // nearest rank
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn bench_latency(artifact: &CalibrationArtifact, stream: &[UnitEmbedding]) -> anyhow::Result<LatencyReport> {
    let mut state = initial_state(artifact)?;
    let mut ms = Vec::with_capacity(stream.len());
    for u in stream {
        let start = Instant::now();
        state.step(u)?;
        ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    if ms.is_empty() {
        return Ok(LatencyReport { steps: 0, mean_ms: 0.0, p50_ms: 0.0, p90_ms: 0.0, p99_ms: 0.0, max_ms: 0.0 });
    }
    let mean_ms = ms.iter().sum::<f64>() / ms.len() as f64;
    ms.sort_by(f64::total_cmp);
    Ok(LatencyReport {
        steps: ms.len(),
        mean_ms,
        p50_ms: percentile(&ms, 0.5),
        p90_ms: percentile(&ms, 0.9),
        p99_ms: percentile(&ms, 0.99),
        max_ms: ms[ms.len() - 1],
    })
}

/// Synthetic benchmark as files: labeled support, unlabeled stream, truth.
pub struct SimulatedFiles {
    pub support: FeatureFile,
    pub stream: FeatureFile,
    pub truth: Truth,
}

pub fn simulate(spec: &BenchmarkSpec) -> anyhow::Result<SimulatedFiles> {
    let b = generate_benchmark(spec)?;
    let labels = b.support_labels.iter().map(|&l| l as i32).collect();
    Ok(SimulatedFiles {
        support: FeatureFile::from_f64(spec.dim, &b.support_features, Some(labels))?,
        stream: FeatureFile::from_f64(spec.dim, &b.stream_features, None)?,
        truth: Truth { labels: b.stream_labels, base_labels: b.base_labels, num_total_labels: b.num_total_labels },
    })
}

/// Simulate, calibrate, stream and evaluate in memory, going through the
/// 32-bit file representation exactly as the commands do.
pub struct EndToEnd {
    pub artifact: CalibrationArtifact,
    pub stream: Vec<UnitEmbedding>,
    pub run: StreamRun,
    pub truth: Truth,
    pub report: EvalReport,
}

pub fn end_to_end(spec: &BenchmarkSpec, run: &RunConfig) -> anyhow::Result<EndToEnd> {
    let files = simulate(spec)?;
    let artifact = calibrate_support(&files.support, None, run)?;
    let stream = standardize_stream(&artifact, &files.stream)?;
    let streamed = run_stream(&artifact, &stream)?;
    let report = evaluate_trace(&streamed.traces, &files.truth)?;
    Ok(EndToEnd { artifact, stream, run: streamed, truth: files.truth, report })
}
