use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use discovery_core::{BenchmarkSpec, DecisionTrace, EvalReport};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pacf::{read_feature_file, write_feature_file, FeatureFile};
use crate::pipeline::{self, CalibrationArtifact, LatencyReport, RegionRow, Snapshot, Truth};

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions and floats use the shortest round-trip form, so equal values
/// always give equal bytes.
pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    fs::write(path, to_json(value)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_features(path: &Path) -> anyhow::Result<FeatureFile> {
    read_feature_file(path).with_context(|| format!("reading feature file {}", path.display()))
}

pub fn write_trace(path: &Path, traces: &[DecisionTrace]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> anyhow::Result<Vec<DecisionTrace>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(t);
    }
    Ok(out)
}

fn required(path: &Option<PathBuf>, what: &'static str) -> Result<PathBuf, CliError> {
    path.clone().ok_or(CliError::MissingInput(what))
}

/// Default snapshot location next to the trace: `trace.jsonl` → `trace.snapshot.json`.
pub fn snapshot_path(trace: &Path) -> PathBuf {
    trace.with_extension("snapshot.json")
}

pub fn calibrate(run: &RunConfig, classifier: Option<&Path>) -> anyhow::Result<CalibrationArtifact> {
    let support_path = required(&run.support, "support")?;
    let out = run.out.clone().ok_or(CliError::MissingOutput)?;
    let support = read_features(&support_path)?;
    let classifier = classifier.map(read_features).transpose()?;
    let artifact = pipeline::calibrate_support(&support, classifier.as_ref(), run)
        .with_context(|| format!("calibrating on {}", support_path.display()))?;
    write_json(&out, &artifact)?;
    Ok(artifact)
}

pub fn stream(
    calibration: &Path,
    stream: &Path,
    trace_out: &Path,
    snapshot_out: Option<&Path>,
) -> anyhow::Result<Snapshot> {
    let artifact: CalibrationArtifact = read_json(calibration)?;
    let file = read_features(stream)?;
    let embeddings = pipeline::standardize_stream(&artifact, &file)?;
    let run = pipeline::run_stream(&artifact, &embeddings)?;
    write_trace(trace_out, &run.traces)?;
    let snapshot = Snapshot::new(&run.state, &run.traces);
    let snap_path = snapshot_out.map_or_else(|| snapshot_path(trace_out), Path::to_path_buf);
    write_json(&snap_path, &snapshot)?;
    Ok(snapshot)
}

pub fn eval(trace: &Path, truth: &Path, out: Option<&Path>) -> anyhow::Result<EvalReport> {
    let traces = read_trace(trace)?;
    let truth: Truth = read_json(truth)?;
    let report = pipeline::evaluate_trace(&traces, &truth)?;
    match out {
        Some(p) => write_json(p, &report)?,
        None => std::io::stdout().write_all(&to_json(&report)?)?,
    }
    Ok(report)
}

/// Writes `support.pacf`, `stream.pacf` and `truth.json` into `out_dir`.
pub fn simulate(spec: &Path, out_dir: &Path) -> anyhow::Result<Truth> {
    let spec: BenchmarkSpec = read_json(spec)?;
    let files = pipeline::simulate(&spec)?;
    fs::create_dir_all(out_dir)?;
    write_feature_file(out_dir.join("support.pacf"), &files.support)?;
    write_feature_file(out_dir.join("stream.pacf"), &files.stream)?;
    write_json(&out_dir.join("truth.json"), &files.truth)?;
    Ok(files.truth)
}

pub fn regions(calibration: &Path, stream: &Path, out: &Path) -> anyhow::Result<usize> {
    let artifact: CalibrationArtifact = read_json(calibration)?;
    let file = read_features(stream)?;
    let embeddings = pipeline::standardize_stream(&artifact, &file)?;
    let run = pipeline::run_stream(&artifact, &embeddings)?;
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    for t in &run.traces {
        w.serialize(RegionRow::from(t))?;
    }
    w.flush()?;
    Ok(run.traces.len())
}

pub fn bench(calibration: &Path, stream: &Path, out: Option<&Path>) -> anyhow::Result<LatencyReport> {
    let artifact: CalibrationArtifact = read_json(calibration)?;
    let file = read_features(stream)?;
    let embeddings = pipeline::standardize_stream(&artifact, &file)?;
    let report = pipeline::bench_latency(&artifact, &embeddings)?;
    match out {
        Some(p) => write_json(p, &report)?,
        None => std::io::stdout().write_all(&to_json(&report)?)?,
    }
    Ok(report)
}
