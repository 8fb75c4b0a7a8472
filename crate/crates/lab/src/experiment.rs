use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::metrics::{aggregate, write_csv, RunMetrics, Summary};
use crate::sim::{run_one, RunOutcome, TraceRecord};
use crate::SimError;

/// Runs every seed of `config` in parallel. Results come back in seed order.
pub fn run_many(config: &ExperimentConfig) -> Result<Vec<RunOutcome>, SimError> {
    config.validate()?;
    let trace = config.trace.is_some();
    let seeds: Vec<u64> = config.seeds().collect();
    seeds.par_iter().map(|&seed| run_one(config, seed, trace)).collect()
}

#[derive(Serialize)]
struct TraceLine<'a> {
    run: u64,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

pub fn write_trace<W: Write>(out: W, outcomes: &[RunOutcome]) -> Result<(), SimError> {
    let mut out = BufWriter::new(out);
    for o in outcomes {
        for record in &o.trace {
            serde_json::to_writer(&mut out, &TraceLine { run: o.metrics.seed, record })?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File, SimError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

/// Writes whatever outputs `config` names and returns the summary.
pub fn write_outputs(config: &ExperimentConfig, outcomes: &[RunOutcome]) -> Result<Summary, SimError> {
    let metrics: Vec<RunMetrics> = outcomes.iter().map(|o| o.metrics.clone()).collect();
    let summary = aggregate(&metrics)?;
    if let Some(path) = &config.out {
        write_csv(create(path)?, &metrics)?;
    }
    if let Some(path) = &config.trace {
        write_trace(create(path)?, outcomes)?;
    }
    if let Some(path) = &config.summary {
        let mut f = create(path)?;
        serde_json::to_writer_pretty(&mut f, &summary)?;
        f.write_all(b"\n")?;
    }
    Ok(summary)
}
