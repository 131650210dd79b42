//! `inspect`: train, evaluate and benchmark inspection policies.

mod commands;
mod config;
mod seeds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inspect_core::baseline::BaselineKind;
use inspect_core::illumination::IlluminationMode;

use crate::seeds::SeedList;

#[derive(Debug, Parser)]
#[command(name = "inspect", version, about = "Illumination-aware spacecraft inspection with PPO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Illumination model, overriding the config.
    #[arg(long)]
    mode: Option<IlluminationMode>,
    /// Output directory, relative to the output root unless absolute.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one policy per seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training seeds, e.g. `0..10` or `1,4,7`.
        #[arg(long, default_value = "0")]
        seeds: SeedList,
        /// Environment steps per seed, overriding the config.
        #[arg(long)]
        timesteps: Option<u64>,
        /// Rollout worker threads, overriding the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Continue from existing checkpoints in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate trained checkpoints and compare with the reference results.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Directory holding `checkpoint_seed<N>.json` files.
        #[arg(long)]
        run: PathBuf,
        /// Seeds to evaluate; defaults to every checkpoint found.
        #[arg(long)]
        seeds: Option<SeedList>,
        /// Episodes per seed, overriding the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Master seed for episode initial conditions.
        #[arg(long)]
        seed: Option<u64>,
        /// Episode threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run a scripted controller.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "sun_sync")]
        controller: BaselineKind,
        /// Episode seeds.
        #[arg(long, default_value = "0..20")]
        seeds: SeedList,
    },
    /// Aggregate per-seed training curves into IQM tables.
    ExportPlots {
        /// Training run directory.
        #[arg(long)]
        run: PathBuf,
        /// Seeds that must be present; defaults to the run manifest.
        #[arg(long)]
        seeds: Option<SeedList>,
        /// Destination; defaults to `<run>/plots`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only used to resolve the output root.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Config file helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Debug, Subcommand)]
enum ConfigAction {
    /// Write the full default config.
    Init {
        #[arg(long, default_value = "inspect.toml")]
        out: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            common,
            seeds,
            timesteps,
            workers,
            resume,
        } => commands::train(&common, &seeds, timesteps, workers, resume),
        Command::Eval {
            common,
            run,
            seeds,
            trials,
            seed,
            workers,
        } => commands::eval(&common, &run, seeds.as_ref(), trials, seed, workers),
        Command::Baseline {
            common,
            controller,
            seeds,
        } => commands::baseline(&common, controller, &seeds),
        Command::ExportPlots { run, seeds, out, config } => {
            commands::export_plots(config.as_deref(), &run, seeds.as_ref(), out.as_deref())
        }
        Command::Config {
            action: ConfigAction::Init { out, force },
        } => commands::config_init(&out, force),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {:#}", e.category.as_str(), e.source);
            ExitCode::from(e.category.exit_code())
        }
    }
}
