use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use oid_cli::{load_config, run_command, CliError, Command, Overrides};

/// Optimal inversion design experiments.
#[derive(Debug, Parser)]
#[command(name = "oid", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set solver.mmgks_iters=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn run(args: Args) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        set: args.set,
    };
    let cfg = load_config(&args.config, &overrides)?;
    for path in run_command(args.command, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
