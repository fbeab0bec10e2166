use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sirentrack::cli::{self, Command, Options};

#[derive(Parser)]
#[command(
    name = "sirentrack",
    version,
    about = "Siren identification from notch-filter tracking features"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Recompute outputs that already exist
    #[arg(long, global = true)]
    force: bool,
    /// Override the configured output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render synthetic siren and noise corpora
    Synth,
    /// Extract features from the manifests
    Extract,
    /// Plan train/validation/test splits and nested folds
    Split,
    /// Train one model on the full training split
    Train,
    /// Evaluate a checkpoint on the test domains
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate every ratio and fold
    Sweep,
    /// Aggregate the sweep summary into a table and SVG plot
    Plot {
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = match args.command {
        Cmd::Synth => Command::Synth,
        Cmd::Extract => Command::Extract,
        Cmd::Split => Command::Split,
        Cmd::Train => Command::Train,
        Cmd::Eval { checkpoint } => Command::Eval { checkpoint },
        Cmd::Sweep => Command::Sweep,
        Cmd::Plot { summary } => Command::Plot { summary },
    };
    let opts = Options {
        config: args.common.config,
        seed: args.common.seed,
        force: args.common.force,
        out: args.common.out,
    };
    match cli::run(&command, &opts) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
