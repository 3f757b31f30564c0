//! `antn`: exact diagonalization, DMRG, and variational training of
//! autoregressive neural tensor network wavefunctions for the J1-J2 model.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use commands::CliError;
use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "antn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.steps=500`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set train.seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sampling and gradients.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Shorthand for `--set output.dir=DIR`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact ground-state energy.
    Ed,
    /// DMRG ground state; writes `dmrg.jsonl` and `dmrg.ckpt`.
    Dmrg,
    /// Variational training; writes `metrics.jsonl` and `checkpoint.ckpt`.
    Train {
        /// Continue from this checkpoint instead of starting fresh.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Energy of a frozen checkpoint from fresh samples.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Defaults to the training batch size.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Exact samples from a checkpoint, one 0/1 string per line.
    Sample {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Train every method on each configured size and tabulate energies per site as CSV.
    Compare,
}

impl Cli {
    fn overrides(&self) -> Vec<String> {
        let mut all = self.set.clone();
        if let Some(seed) = self.seed {
            all.push(format!("train.seed={seed}"));
        }
        if let Some(out) = &self.out {
            all.push(format!("output.dir={}", toml::Value::String(out.display().to_string())));
        }
        all
    }

    fn load_config(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.clone(), source })?,
            None => String::new(),
        };
        Ok(RunConfig::from_toml(&text, &self.overrides())?)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(ConfigError::Invalid { field: "threads", message: "must be at least 1".into() }.into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Ed => commands::cmd_ed(&cli.load_config()?),
        Command::Dmrg => commands::cmd_dmrg(&cli.load_config()?),
        Command::Train { resume: None } => commands::cmd_train(&cli.load_config()?),
        Command::Train { resume: Some(path) } => {
            if cli.config.is_some() {
                log::warn!("--config is ignored with --resume; the checkpoint's config snapshot is used");
            }
            let mut overrides = cli.set.clone();
            if let Some(seed) = cli.seed {
                overrides.push(format!("train.seed={seed}"));
            }
            commands::cmd_resume(path, &overrides, cli.out.clone())
        }
        Command::Evaluate { checkpoint, samples } => commands::cmd_evaluate(checkpoint, &cli.set, *samples),
        Command::Sample { checkpoint, count } => commands::cmd_sample(checkpoint, &cli.set, *count, cli.out.clone()),
        Command::Compare => commands::cmd_compare(&cli.load_config()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ANTN_LOG", "info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
