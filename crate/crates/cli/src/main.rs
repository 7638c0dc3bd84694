use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use propset_cli::{run, Command, Invocation};

/// Propagation sets, harmonic measures and Harnack ratios for degenerate
/// second order operators.
#[derive(Debug, Parser)]
#[command(name = "propset", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set grid.h=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: output.dir from the config, else `.`).
    #[arg(long, env = "PROPSET_OUT")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let inv = Invocation {
        command: args.command,
        config: args.config,
        overrides: args.overrides,
        out: args.out,
    };
    match run(&inv) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("propset {}: {e}", inv.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
