use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("support file has no labels")]
    UnlabeledSupport,
    #[error("support label {0} is negative")]
    NegativeLabel(i32),
    #[error("trace has {trace} steps but the truth file has {truth} labels")]
    LengthMismatch { trace: usize, truth: usize },
    #[error("dimension mismatch: calibrated for {expected}, file has {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("no output path given (use --out or the config's \"out\" key)")]
    MissingOutput,
    #[error("no {0} path given")]
    MissingInput(&'static str),
}
