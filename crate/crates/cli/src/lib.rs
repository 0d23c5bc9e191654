//! Library side of the `sptq-sim` command: config handling, experiment
//! dispatch and result files.

pub mod config;
mod output;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{parse_config, Experiment, Overrides, RunConfig};
pub use output::{run_experiment, ExperimentOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("experiment failed: {0}")]
    Experiment(#[from] sptq_core::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } => 2,
            CliError::Experiment(_) => 3,
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Config { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl From<sptq_core::FitError> for CliError {
    fn from(e: sptq_core::FitError) -> Self {
        CliError::Experiment(e.into())
    }
}

/// Paths written by a successful run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub result_json: PathBuf,
    pub table_csv: PathBuf,
}

/// Loads `config_path`, applies overrides, runs the experiment and writes
/// `result.json` and `<experiment>.csv` into the output directory.
pub fn run(config_path: &Path, overrides: &Overrides) -> Result<RunSummary, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| CliError::io(config_path, e))?;
    let config = parse_config(&text)?.resolve(overrides)?;
    let output = run_experiment(&config)?;

    let dir = config.output_dir.clone().expect("resolved config has an output dir");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let result_json = dir.join("result.json");
    let table_csv = dir.join(format!("{}.csv", config.experiment().name()));
    output.write_json(&config, &result_json)?;
    output.write_csv(&table_csv)?;
    Ok(RunSummary {
        result_json,
        table_csv,
    })
}
