//! Command-line driver for variational quantum generator experiments.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vqg::training::Measurement;

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "vqg",
    version,
    about = "Adversarial training of variational quantum generators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and write trace, histograms, checkpoint and manifest.
    Run {
        #[command(flatten)]
        common: ConfigArgs,
        /// Output directory; defaults to `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Draw samples from a trained generator checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "exact")]
        mode: Measurement,
        #[arg(long, default_value = "samples.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// `exact` or `shots:<n>`.
    #[arg(long)]
    mode: Option<Measurement>,
    /// Dotted override such as `train.lr_gen=0.01`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("train.seed={seed}"));
        }
        if let Some(epochs) = self.epochs {
            overrides.push(format!("train.epochs={epochs}"));
        }
        if let Some(mode) = self.mode {
            overrides.push(format!("train.mode=\"{mode}\""));
        }
        ExperimentConfig::load(&self.config, &overrides)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, out, quiet } => {
            let config = common.load()?;
            let out = out.unwrap_or_else(|| config.output.dir.clone());
            let summary = commands::run(&config, &out, !quiet)?;
            let last = summary.records.last().unwrap_or(&summary.initial);
            println!(
                "{} epochs written to {}: C_d {:.4}, C_g {:.4}, KL {:.4} (initial KL {:.4})",
                summary.records.len(),
                out.display(),
                last.c_d,
                last.c_g,
                last.kl,
                summary.initial.kl
            );
            Ok(())
        }
        Command::Gradcheck { common } => {
            let config = common.load()?;
            let report = commands::gradcheck(&config)?;
            for e in &report.entries {
                println!(
                    "{:<28} {:>6} derivatives  max discrepancy {:.3e}",
                    e.component, e.checked, e.max_error
                );
            }
            if report.passed() {
                println!(
                    "gradcheck passed (tolerance {:e})",
                    commands::GRADCHECK_TOLERANCE
                );
                Ok(())
            } else {
                Err(CliError::Runtime(format!(
                    "gradcheck failed (tolerance {:e})",
                    commands::GRADCHECK_TOLERANCE
                )))
            }
        }
        Command::Sample {
            checkpoint,
            count,
            seed,
            mode,
            out,
        } => commands::sample(&checkpoint, count, seed, mode, &out),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("vqg: {e}");
            e.exit_code()
        }
    }
}
