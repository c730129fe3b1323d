use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use soc_metrology_cli::config::{Overrides, Scenario};

/// Fisher-information scenarios for squeezed spin-orbit coupled probes.
#[derive(Parser, Debug)]
#[command(name = "soc-metrology", version)]
struct Cli {
    #[arg(value_enum)]
    scenario: Scenario,

    /// JSON run configuration; built-in defaults fill anything it leaves out
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output file; sibling files share its stem. Prints to stdout when omitted
    #[arg(long)]
    out: Option<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// Override a config entry by dotted path, e.g. `--param params.Omega=50`
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides { scenario: Some(cli.scenario), out: cli.out, seed: cli.seed, params: cli.params };
    match soc_metrology_cli::execute(cli.config.as_deref(), &overrides) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
