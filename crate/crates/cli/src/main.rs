// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tempcomp::bench::DEFAULT_REPS;
use tempcomp::config::Normalize;
use tempcomp_cli::{cmd_bench, cmd_segment, cmd_train, emit, CliResult, CommonArgs, Format};

#[derive(Parser)]
#[command(
    name = "tempcomp",
    version,
    about = "Component-based time-series segmentation and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Flat `key = value` experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `text` or `csv`.
    #[arg(long, default_value = "text")]
    format: Format,
    /// Reconstruction weight for every epoch.
    #[arg(long)]
    lambda1: Option<f64>,
    /// Classification weight for every epoch.
    #[arg(long)]
    lambda2: Option<f64>,
    /// Fixed segment count.
    #[arg(long)]
    k: Option<usize>,
    /// `zscore` or `none`.
    #[arg(long)]
    normalize: Option<Normalize>,
}

impl Shared {
    fn common(&self) -> CommonArgs {
        CommonArgs {
            config: self.config.clone(),
            seed: self.seed,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            k: self.k,
            normalize: self.normalize,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split every series of an archive file into components.
    Segment {
        #[arg(long)]
        input: PathBuf,
        /// Ground-truth cuts, one line per series: length then cut indices.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Train the encoder and score the test split.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Checkpoint destination; defaults to the report path with `.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Time the change-curve kernel on a random series.
    Bench {
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = DEFAULT_REPS)]
        reps: usize,
        #[command(flatten)]
        shared: Shared,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let (report, shared) = match &cli.command {
        Command::Segment { input, gt, shared } => {
            (cmd_segment(input, gt.as_deref(), &shared.common())?, shared)
        }
        Command::Train {
            train,
            test,
            checkpoint,
            shared,
        } => {
            let ckpt = checkpoint
                .clone()
                .or_else(|| shared.out.as_ref().map(|o| o.with_extension("ckpt")));
            (
                cmd_train(train, test, ckpt.as_deref(), &shared.common())?,
                shared,
            )
        }
        Command::Bench {
            length,
            reps,
            shared,
        } => (cmd_bench(*length, *reps, &shared.common())?, shared),
    };
    emit(&report.render(shared.format)?, shared.out.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tempcomp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
