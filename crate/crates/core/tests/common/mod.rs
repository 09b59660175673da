#![allow(dead_code)]

use discovery_core::{
    build_class_prototypes, calibrate, compute_support_stats, evaluate, generate_benchmark, select_base_references,
    BaseReferenceBank, Benchmark, BenchmarkSpec, DecisionTrace, EvalReport, LabeledSupportSet, MeanScheme, SpaceConfig, StreamResult, StreamState,
    SupportStats, ThresholdSet, UnitEmbedding,
};

pub struct Run {
    pub state: StreamState,
    pub traces: Vec<DecisionTrace>,
    pub stream: Vec<UnitEmbedding>,
    pub report: EvalReport,
}

pub fn spec(dim: usize, base: usize, novel: usize, kappa: f64, per_class: usize, seed: u64) -> BenchmarkSpec {
    BenchmarkSpec {
        dim,
        num_base_classes: base,
        num_novel_classes: novel,
        kappa,
        samples_per_class: 2 * per_class,
        novel_samples_per_class: per_class,
        support_fraction: 0.5,
        seed,
        mean_scheme: MeanScheme::RandomOrthonormal,
    }
}

/// Offline half: standardize the support set, pick references, calibrate.
pub fn calibrated(spec: &BenchmarkSpec) -> (BaseReferenceBank, ThresholdSet, SupportStats, Benchmark) {
    let bench = generate_benchmark(spec).unwrap();
    let cfg = SpaceConfig::new(spec.dim);
    let stats = compute_support_stats(&bench.support_features).unwrap();
    let support_emb = bench.support_features.iter().map(|h| stats.standardize(h, &cfg).unwrap()).collect();
    let support = LabeledSupportSet::new(support_emb, bench.support_labels.clone(), spec.num_base_classes).unwrap();
    let protos = build_class_prototypes(&support).unwrap();
    let bank = select_base_references(&support, protos, None).unwrap();
    let (thresholds, _) = calibrate(&support, &bank, &cfg, 3, spec.seed).unwrap();
    (bank, thresholds, stats, bench)
}

/// Generate, standardize, calibrate, stream and score.
pub fn run(spec: &BenchmarkSpec) -> Run {
    let (bank, thresholds, stats, bench) = calibrated(spec);
    let cfg = SpaceConfig::new(spec.dim);
    let stream: Vec<UnitEmbedding> =
        bench.stream_features.iter().map(|h| stats.standardize(h, &cfg).unwrap()).collect();
    let mut state = StreamState::new(bank, thresholds, cfg).unwrap();
    let traces = state.run(&stream).unwrap();
    let predictions = traces.iter().map(|t| t.decision.index()).collect();
    let result =
        StreamResult::new(predictions, bench.stream_labels.clone(), bench.num_total_labels, bench.base_labels).unwrap();
    let report = evaluate(&result);
    Run { state, traces, stream, report }
}
