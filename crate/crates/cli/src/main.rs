use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use evmelt_cli::{run, Command, Options};

#[derive(Parser)]
#[command(name = "evmelt", version, about = "Event-camera melt-pool pipelines")]
struct Args {
    /// TOML pipeline configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides run.out_dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for every random component (overrides run.seed).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Event file to process instead of simulating.
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Override one config value, e.g. `--set framing.stride_us=5000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = Options {
        config: args.config,
        out: args.out,
        seed: args.seed,
        input: args.input,
        overrides: args.set,
    };
    match run(args.command, &opts) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
