use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use respkit::dataio::Split;
use respkit::pipeline::{cmd_evaluate, cmd_fuse, cmd_prepare, cmd_report, cmd_train, ExperimentConfig};

#[derive(Parser)]
#[command(name = "respkit", version, about = "Respiratory-sound anomaly classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config).with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract features for every annotated cycle and write the manifest.
    Prepare(Common),
    /// Train the configured framework on the train split.
    Train(Common),
    /// Predict and score a split with the trained checkpoint.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Product-rule fusion of two or more prediction files.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(required = true, num_args = 2..)]
        predictions: Vec<PathBuf>,
    },
    /// Collate report JSON files into a markdown table.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Prepare(c) => {
            let s = cmd_prepare(&c.load()?)?;
            println!(
                "{} cycles ({} train, {} test) in {}",
                s.cycles,
                s.train_cycles,
                s.test_cycles,
                s.cache_dir.display()
            );
        }
        Command::Train(c) => {
            let s = cmd_train(&c.load()?)?;
            let last = s.history.last().map(|e| e.loss).unwrap_or(f64::NAN);
            println!(
                "{} parameters, {} epochs, final loss {last:.5}; checkpoint at {}",
                s.param_count,
                s.history.epochs.len(),
                s.checkpoint.display()
            );
        }
        Command::Evaluate { common, split } => {
            let s = cmd_evaluate(&common.load()?, split)?;
            print!("{}", s.report.to_markdown(&format!("{} ({split})", s.framework)));
            println!("predictions at {}", s.predictions.display());
        }
        Command::Fuse {
            common,
            split,
            predictions,
        } => {
            let s = cmd_fuse(&common.load()?, &predictions, split)?;
            print!("{}", s.report.to_markdown("late fusion"));
            println!("fused scores at {}", s.fused.display());
        }
        Command::Report { out, reports } => print!("{}", cmd_report(&reports, &out)?),
    }
    Ok(())
}
