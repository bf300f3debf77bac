// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use tvopt_cli::commands;
use tvopt_cli::{ModelKind, OutputDir, RunConfig, TauSetting};

#[derive(Parser)]
#[command(
    name = "tvopt",
    version,
    about = "Learned test termination for stuck-at fault diagnosis"
)]
struct Cli {
    /// Run configuration (flat TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus seed (overrides `corpus_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Stop threshold, or `auto` to select it on the validation circuits.
    #[arg(long, global = true)]
    tau: Option<TauSetting>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the corpus: netlists, fault dictionaries, traces and dataset.
    Generate,
    /// Fit the configured model and write the model file.
    Train,
    /// Evaluate the trained policy on the test circuits.
    Evaluate,
    /// Alpha sweep, beta weights and learning curve.
    Sweep,
    /// Evaluate the ground-truth policy on the test circuits.
    OracleEval,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.corpus_seed = seed;
    }
    if let Some(model) = cli.model {
        cfg.model = model;
    }
    if let Some(alpha) = cli.alpha {
        cfg.alpha = alpha;
    }
    if let Some(tau) = cli.tau {
        cfg.tau = tau;
    }
    let out = OutputDir::new(cli.out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir)));
    match cli.command {
        Command::Generate => {
            let s = commands::generate(&cfg, &out)?;
            eprintln!("circuits {} rows {}", s.circuits, s.rows);
        }
        Command::Train => {
            let m = commands::train(&cfg, &out)?;
            eprintln!("trained {} (tau {})", m.model.describe(), m.tau);
        }
        Command::Evaluate => {
            let r = commands::evaluate(&cfg, &out)?;
            eprintln!(
                "diagnosis accuracy {:.4} volume reduction {:.4}",
                r.diagnosis_accuracy, r.volume_reduction
            );
        }
        Command::Sweep => {
            let s = commands::sweep(&cfg, &out)?;
            eprintln!(
                "{} alpha points, {} learning-curve points",
                s.alpha.len(),
                s.curve.len()
            );
        }
        Command::OracleEval => {
            let r = commands::oracle_eval(&cfg, &out)?;
            eprintln!("oracle diagnosis accuracy {:.4}", r.diagnosis_accuracy);
        }
    }
    Ok(())
}
