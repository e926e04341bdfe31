use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ctp_cli::{cmd_run, StageName};

#[derive(Parser)]
#[command(
    name = "ctp",
    version,
    about = "Cross-domain trajectory prediction runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one pipeline stage, or `all` of them.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        stage: Option<StageName>,
        /// Overrides the initialisation and training seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long, env = "CTP_OUT_DIR")]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            stage,
            seed,
            out,
        } => cmd_run(&config, stage, seed, out),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
