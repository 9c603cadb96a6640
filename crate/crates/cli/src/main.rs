use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use navgym_cli::commands::{self, BakeArgs, CompareArgs, EvalArgs, MatrixArgs, TrainArgs};
use navgym_cli::{Ablation, CliError};
use navgym_core::obs::ObsConfig;

#[derive(Parser)]
#[command(name = "navgym", version, about = "Point-to-point navigation agents in box worlds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bake the occupancy cache and NavMesh graph of a map.
    Bake {
        map: PathBuf,
        #[arg(long, default_value_t = ObsConfig::default().cell_size)]
        cell_size: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Manual link file.
        #[arg(long)]
        links: Option<PathBuf>,
        /// Skip generated jump, double-jump and pad links.
        #[arg(long)]
        no_auto_links: bool,
        #[arg(long)]
        force: bool,
    },
    /// Train an agent.
    Train(TrainFlags),
    /// Evaluate a checkpoint at the final curriculum radius.
    Eval {
        checkpoint: PathBuf,
        #[arg(long, default_value = "fixtures/toy_desk.map.json")]
        map: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short = 'n', default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a checkpoint and the NavMesh follower on the same start/goal pairs.
    Compare {
        checkpoint: PathBuf,
        navgraph: PathBuf,
        #[arg(long, default_value = "fixtures/toy_desk.map.json")]
        map: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short = 'n', default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "compare")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Welch's t-test on steps-to-target between two groups of runs.
    Stats {
        /// Run directories or summary.json files of the first group.
        #[arg(long, num_args = 1.., required = true)]
        a: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        b: Vec<PathBuf>,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every ablation configuration over several seeds.
    Ablations {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value = "runs/ablations")]
        out: PathBuf,
        /// Comma-separated subset, e.g. base,no_boxcast.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum, value_delimiter = ',')]
    ablate: Vec<Ablation>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
    /// Continue from the latest checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
}

fn run(cmd: Cmd) -> Result<(), CliError> {
    let mut log = std::io::stdout();
    match cmd {
        Cmd::Bake {
            map,
            cell_size,
            out,
            links,
            no_auto_links,
            force,
        } => {
            commands::bake(
                &BakeArgs {
                    map,
                    cell_size,
                    out,
                    links,
                    auto_links: !no_auto_links,
                    force,
                },
                &mut log,
            )?;
        }
        Cmd::Train(f) => {
            commands::train(
                &TrainArgs {
                    config: f.config,
                    seed: f.seed,
                    budget: f.budget,
                    deterministic: f.deterministic,
                    ablate: f.ablate,
                    out: f.out,
                    force: f.force,
                    resume: f.resume,
                },
                &mut log,
            )?;
        }
        Cmd::Eval {
            checkpoint,
            map,
            cache,
            config,
            episodes,
            seed,
            out,
            force,
        } => {
            commands::eval(
                &EvalArgs {
                    checkpoint,
                    map,
                    cache,
                    config,
                    episodes,
                    seed,
                    out,
                    force,
                },
                &mut log,
            )?;
        }
        Cmd::Compare {
            checkpoint,
            navgraph,
            map,
            cache,
            config,
            pairs,
            seed,
            out,
            force,
        } => {
            commands::compare(
                &CompareArgs {
                    checkpoint,
                    navgraph,
                    map,
                    cache,
                    config,
                    pairs,
                    seed,
                    out,
                    force,
                },
                &mut log,
            )?;
        }
        Cmd::Stats { a, b, out } => {
            commands::stats(&a, &b, out.as_deref(), &mut log)?;
        }
        Cmd::Ablations {
            config,
            seed,
            seeds,
            budget,
            out,
            only,
            force,
        } => {
            commands::matrix(
                &MatrixArgs {
                    config,
                    seed,
                    seeds,
                    budget,
                    out,
                    only,
                    force,
                },
                &mut log,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
