use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use clap::Args;
use discovery_core::SpaceConfig;
use serde::{Deserialize, Serialize};

/// Flat JSON run configuration. Missing keys take the defaults below; command
/// line flags win over the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    pub temperature: f64,
    pub dirichlet_alpha: f64,
    pub maturity_beta: f64,
    pub spread_c: f64,
    pub replay_passes: usize,
    pub replay_seed: u64,
    pub support: Option<PathBuf>,
    pub stream: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let space = SpaceConfig::new(2);
        Self {
            epsilon: space.epsilon,
            temperature: space.temperature,
            dirichlet_alpha: space.dirichlet_alpha,
            maturity_beta: space.maturity_beta,
            spread_c: space.spread_c,
            replay_passes: 3,
            replay_seed: 0,
            support: None,
            stream: None,
            out: None,
            report: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn space(&self, dim: usize) -> anyhow::Result<SpaceConfig> {
        ensure!(self.replay_passes >= 1, "replay_passes must be at least 1");
        let cfg = SpaceConfig {
            dim,
            epsilon: self.epsilon,
            temperature: self.temperature,
            dirichlet_alpha: self.dirichlet_alpha,
            maturity_beta: self.maturity_beta,
            spread_c: self.spread_c,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Flags shared by every command that reads a [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat JSON config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub support: Option<PathBuf>,
    #[arg(long)]
    pub stream: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replay shuffle seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replay passes over the support set
    #[arg(long)]
    pub passes: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Dirichlet smoothing of the size prior
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Maturity exponent
    #[arg(long)]
    pub beta: Option<f64>,
    /// Spread shrinkage on the birth threshold
    #[arg(long)]
    pub spread_c: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { c.$field = v.clone().into(); })*
            };
        }
        take!(support => support, stream => stream, out => out);
        take!(seed => replay_seed, passes => replay_passes, epsilon => epsilon, temperature => temperature);
        take!(alpha => dirichlet_alpha, beta => maturity_beta, spread_c => spread_c);
        Ok(c)
    }
}
