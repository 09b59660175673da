use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use discovery_cli::commands;
use discovery_cli::ConfigArgs;

#[derive(Parser)]
#[command(name = "discover", version, about = "Calibrate, stream and score online category discovery runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate thresholds on a labeled support file
    Calibrate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Optional raw classifier weights, one row per class in label order
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Run the online stage over a stream file and write a JSONL trace
    Stream {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the trace path with a `.snapshot.json` extension
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Score a trace against its truth sidecar
    Eval {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic vMF-mixture benchmark
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-sample routing statistics as CSV
    Regions {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report per-step latency percentiles
    Bench {
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Calibrate { config, classifier } => {
            let run = config.resolve()?;
            let a = commands::calibrate(&run, classifier.as_deref())?;
            eprintln!(
                "calibrated {} classes in d={}: tau_hi={} tau_lo={} tau_birth_sup={} tau_create={}",
                a.bank.num_classes(),
                a.config.dim,
                a.thresholds.tau_hi,
                a.thresholds.tau_lo,
                a.thresholds.tau_birth_sup,
                a.thresholds.tau_create
            );
        }
        Command::Stream { calibration, stream, out, snapshot } => {
            let s = commands::stream(&calibration, &stream, &out, snapshot.as_deref())?;
            eprintln!(
                "{} steps: {} base, {} attach, {} create",
                s.steps, s.decisions.assign_base, s.decisions.assign_novel, s.decisions.create
            );
        }
        Command::Eval { trace, truth, out } => {
            commands::eval(&trace, &truth, out.as_deref())?;
        }
        Command::Simulate { spec, out } => {
            let truth = commands::simulate(&spec, &out)?;
            eprintln!("wrote {} stream samples to {}", truth.labels.len(), out.display());
        }
        Command::Regions { calibration, stream, out } => {
            let n = commands::regions(&calibration, &stream, &out)?;
            eprintln!("wrote {n} rows to {}", out.display());
        }
        Command::Bench { calibration, stream, out } => {
            commands::bench(&calibration, &stream, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
