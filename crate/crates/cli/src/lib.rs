//! Batch runner behind the `bell-hv-lab` binary.
//!
//! A run reads one JSON config, resolves its defaults, dispatches to the
//! core library and writes a canonical JSON report (plus a CSV series for
//! most commands) into the output directory.

pub mod commands;
pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::{execute, Execution};
pub use config::{Command, RunConfig};

pub const TOOL_NAME: &str = "bell-hv-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status when `--require-certified` is set and the premises fail.
pub const EXIT_NOT_CERTIFIED: i32 = 3;
/// Exit status of a schulman-check whose grid exceeds the tolerance.
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {}: {source}", path.display())]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] bell_hv_core::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigRead { .. } | CliError::Config(_) => 2,
            CliError::Core(bell_hv_core::Error::Lemma1Contradiction { .. }) => 1,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_path: PathBuf,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub require_certified: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_json(&text)
}

/// Loads, resolves and executes one invocation, writing its report files.
pub fn run(inv: &Invocation) -> Result<RunOutcome, CliError> {
    let resolved = load_config(&inv.config_path)?.resolve(inv.command, inv.seed)?;
    let exec = execute(&resolved, inv.command)?;

    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(&inv.output_dir).map_err(io(&inv.output_dir))?;
    let output = resolved.output.clone().unwrap_or_default();
    let mut files = Vec::new();
    let mut write = |name: Option<String>, contents: &str| -> Result<(), CliError> {
        let name = name.ok_or_else(|| CliError::Internal("unresolved output name".into()))?;
        let path = inv.output_dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        files.push(path);
        Ok(())
    };
    write(output.json, &exec.json)?;
    if let Some(csv) = &exec.csv {
        write(output.csv, csv)?;
    }

    let exit_code = if exec.check_failed {
        EXIT_CHECK_FAILED
    } else if inv.require_certified && exec.certified == Some(false) {
        EXIT_NOT_CERTIFIED
    } else {
        0
    };
    Ok(RunOutcome {
        exit_code,
        files,
        summary: exec.summary,
    })
}
