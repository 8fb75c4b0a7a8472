use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vaba_core::ValidatorKind;
use vaba_lab::{run_many, write_outputs, AdversaryKind, ExperimentConfig};

#[derive(Parser)]
#[command(name = "vaba-lab", version, about = "Simulation harness for validated asynchronous Byzantine agreement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over a range of seeds.
    Run {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        f: usize,
        #[arg(long, default_value = "fair")]
        adversary: AdversaryKind,
        #[arg(long, default_value = "always")]
        validator: ValidatorKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Aggregate summary JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        event_budget: Option<u64>,
    },
    /// Run every configuration of a JSON array file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cfg: &ExperimentConfig) -> Result<()> {
    let outcomes = run_many(cfg)?;
    let summary = write_outputs(cfg, &outcomes)?;
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({
        "n": cfg.n,
        "f": cfg.f,
        "adversary": cfg.adversary,
        "validator": cfg.validator,
        "summary": summary,
    }))?);
    if !summary.violations.is_clean() {
        anyhow::bail!("safety violations observed: {:?}", summary.violations);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { n, f, adversary, validator, seed, runs, trace, out, summary, event_budget } => {
            let mut cfg = ExperimentConfig::new(n, f, adversary).with_validator(validator).with_runs(seed, runs);
            cfg.trace = trace;
            cfg.out = out;
            cfg.summary = summary;
            if let Some(budget) = event_budget {
                cfg.halt.event_budget = budget;
            }
            execute(&cfg)
        }
        Command::Sweep { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let configs: Vec<ExperimentConfig> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            for cfg in &configs {
                execute(cfg)?;
            }
            Ok(())
        }
    }
}
