//! Command-line front end: argument parsing, run configuration and the
//! `extract`, `stats`, `train`, `report` and `synth` subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use smilekit_core::{Error, ErrorKind, Result};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "smilekit", version, about = "Smile segmentation, features and score analysis")]
pub struct Cli {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; every random choice derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Significance threshold.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment smiles and compute features from frame tables.
    Extract(ExtractArgs),
    /// Correlations, feature selection, Welch tests and ANOVAs.
    Stats(AnalysisArgs),
    /// Windowed regression grid search per scale.
    Train(AnalysisArgs),
    /// `stats` and `train` together.
    Report(AnalysisArgs),
    /// Write a synthetic corpus with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory of `<mother>_<month>.csv` frame tables.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Directory of `<mother>_<month>.csv` speech interval files.
    #[arg(long)]
    pub speech: Option<PathBuf>,
    #[arg(long)]
    pub fps: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Comma-separated scale columns, e.g. `phq9,pss`.
    #[arg(long)]
    pub scales: Option<String>,
    /// Per-visit correlations in addition to pooled ones.
    #[arg(long)]
    pub by_visit: bool,
    /// Comma-separated window sizes.
    #[arg(long)]
    pub windows: Option<String>,
    /// Comma-separated epoch budgets.
    #[arg(long)]
    pub epochs: Option<String>,
    /// Number of training seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Add the window index as a model input.
    #[arg(long)]
    pub with_position: bool,
    /// Clamp predictions to the scale range.
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub sessions: Option<usize>,
    /// JSON synthesis spec; fields left out keep their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

impl AnalysisArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(p) = &self.features {
            cfg.features = Some(p.clone());
        }
        if let Some(p) = &self.scores {
            cfg.scores = Some(p.clone());
        }
        if let Some(s) = &self.scales {
            cfg.set("scales", s)?;
        }
        if let Some(s) = &self.windows {
            cfg.set("windows", s)?;
        }
        if let Some(s) = &self.epochs {
            cfg.set("epochs", s)?;
        }
        if let Some(n) = self.seeds {
            cfg.seeds = n;
        }
        if let Some(n) = self.folds {
            cfg.folds = n;
        }
        cfg.by_visit |= self.by_visit;
        cfg.with_position |= self.with_position;
        cfg.clamp |= self.clamp;
        Ok(())
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        match &self.command {
            Command::Extract(a) => {
                if let Some(p) = &a.frames {
                    cfg.frames_dir = Some(p.clone());
                }
                if let Some(p) = &a.speech {
                    cfg.speech_dir = Some(p.clone());
                }
                if let Some(f) = a.fps {
                    cfg.fps = f;
                }
            }
            Command::Stats(a) | Command::Train(a) | Command::Report(a) => a.apply(&mut cfg)?,
            Command::Synth(a) => {
                if let Some(n) = a.sessions {
                    cfg.sessions = n;
                }
                if let Some(p) = &a.spec {
                    cfg.spec = Some(p.clone());
                }
            }
        }
        Ok(cfg)
    }

    pub fn run(&self) -> Result<Vec<PathBuf>> {
        let cfg = self.run_config()?;
        match self.command {
            Command::Extract(_) => commands::extract(&cfg),
            Command::Stats(_) => commands::stats(&cfg),
            Command::Train(_) => commands::train(&cfg),
            Command::Report(_) => commands::report(&cfg),
            Command::Synth(_) => commands::synth(&cfg),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Io => 2,
        ErrorKind::Schema => 3,
        ErrorKind::Validation => 4,
        ErrorKind::Analysis => 5,
    }
}
