//! The `gt` command line: one subcommand per stage, handing off through
//! files in a working directory.
//!
//! Every command writes `<command>_manifest.json` next to its outputs. JSON
//! outputs carry a `produced_by` field naming that manifest; CSV and other
//! outputs are listed with their SHA-256 in the manifest. Inputs are checked
//! against the manifest that produced them before use.
//!
//! Exit codes: 0 success, 1 module error, 2 usage error, 3 missing or stale
//! input artifact.

mod artifacts;
mod commands;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use self::artifacts::{manifest_name, sha256_file, RunManifest};
pub use self::report::REPORT_SECTIONS;

use crate::allocsim::DEFAULT_COOLER_COST;
use crate::error::Error;
use crate::features::WindowConfig;
use crate::pipeline::PipelineConfig;
use crate::syndata::GeneratorConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ARTIFACT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Missing(String),
    #[error("{0}")]
    Stale(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Missing(_) | CliError::Stale(_) => EXIT_ARTIFACT,
            CliError::Core(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gt", version, about = "Cooler growth-target prediction and allocation toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Growth threshold used by train, evaluate, explain and simulate.
    #[arg(long, global = true, default_value_t = 0.30)]
    pub tau: f64,
    /// Seed for generation, splitting, folds and search.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub input_dir: PathBuf,
    /// Defaults to the input directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Coolers to allocate in `simulate`.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Worker threads (0 lets the runtime decide).
    #[arg(long, global = true, env = "GT_THREADS")]
    pub threads: Option<usize>,
}

impl GlobalArgs {
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| self.input_dir.clone())
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset bundle and its ground truth.
    Generate {
        /// Overrides the configured number of clients.
        #[arg(long)]
        n_clients: Option<usize>,
    },
    /// Compute pre/post volumes and growth labels.
    Label,
    /// Build the client feature matrix.
    Featurize,
    /// Run split, search, elimination and the final refit.
    Train,
    /// SHAP values of the trained model on the holdout clients.
    Explain {
        #[arg(long, default_value_t = 20)]
        top_k: usize,
    },
    /// Holdout metrics of the trained model.
    Evaluate,
    /// Compare model-score and volume-baseline cooler allocation.
    Simulate,
    /// Render a markdown report from whatever artifacts exist.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomicsSettings {
    pub cooler_cost: f64,
    /// Required by `simulate`; there is no sensible default.
    pub margin_per_hl: Option<f64>,
    pub budget_coolers: usize,
}

impl Default for EconomicsSettings {
    fn default() -> Self {
        EconomicsSettings {
            cooler_cost: DEFAULT_COOLER_COST,
            margin_per_hl: None,
            budget_coolers: 100,
        }
    }
}

/// Contents of the `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub windows: WindowConfig,
    pub pipeline: PipelineConfig,
    pub economics: EconomicsSettings,
    /// Thresholds written by `label`; defaults to the generator's.
    pub taus: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| Error::config(format!("{}: {e}", p.display())).into())
            }
        }
    }

    pub fn taus(&self) -> Vec<f64> {
        self.taus.clone().unwrap_or_else(|| self.generator.taus.clone())
    }
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("gt {}: {e}", command_name(&cli.command));
            e.exit_code()
        }
    }
}

pub fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Generate { .. } => "generate",
        Command::Label => "label",
        Command::Featurize => "featurize",
        Command::Train => "train",
        Command::Explain { .. } => "explain",
        Command::Evaluate => "evaluate",
        Command::Simulate => "simulate",
        Command::Report => "report",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_sections_fall_back_to_defaults() {
        let json = r#"{"generator": {"n_clients": 50}, "windows": {}, "pipeline": {"space": {}},
                       "economics": {"margin_per_hl": 60.0}}"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.generator.n_clients, 50);
        assert_eq!(cfg.windows, WindowConfig::default());
        assert_eq!(cfg.economics.budget_coolers, 100);
        assert_eq!(cfg.taus(), GeneratorConfig::default().taus);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"pipelin": {}}"#).is_err());
    }
}
