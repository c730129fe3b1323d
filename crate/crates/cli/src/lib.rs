//! Scenario runner behind the `soc-metrology` binary.
//!
//! Every scenario is a pure function of the resolved [`config::RunConfig`]; output
//! files carry the config hash so a result can always be traced to its inputs.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

use std::path::{Path, PathBuf};

use config::{Overrides, RunConfig};
use error::CliResult;

/// Resolves the config, runs its scenario and writes the outputs.
pub fn execute(config_path: Option<&Path>, overrides: &Overrides) -> CliResult<Vec<PathBuf>> {
    let config = RunConfig::resolve(config_path, overrides)?;
    let artifacts = scenarios::run(&config)?;
    output::write_artifacts(config.out.as_deref(), &artifacts)
}
