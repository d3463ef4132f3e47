//! Trains and evaluates many topology seeds in parallel and writes the report
//! and histogram. Results do not depend on the number of threads.
//!
//! ```text
//! cargo run --release --example ensemble_sweep -- [A|B] [n_seeds] [n_nodes] [out_dir]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use attractor_scout::error::Result;
use attractor_scout::experiment::{
    resolve_parallelism, run_ensemble_with, write_ensemble_outputs, ExperimentConfig, OutputDir, RunRecord, ScenarioData,
};

pub fn run(scenario: &str, n_seeds: usize, n_nodes: usize, steps: usize, out: &Path) -> Result<Vec<RunRecord>> {
    let mut cfg = ExperimentConfig::preset(scenario)?;
    cfg.n_seeds = n_seeds;
    cfg.reservoir.n_nodes = n_nodes;
    cfg.autonomous_steps = steps;
    let threads = resolve_parallelism(None)?;
    let data = ScenarioData::for_config(&cfg)?;
    let records = run_ensemble_with(&cfg, &data, threads, |r| {
        if let Some(s) = r.summary() {
            println!("seed {:>4}: {:<14} delta_tot {:.3e}", r.seed, s.outcome.class, s.outcome.delta_tot);
        }
    })?;
    let mut tally = BTreeMap::new();
    for r in &records {
        *tally.entry(r.class().map_or("Failed".to_string(), |c| c.to_string())).or_insert(0) += 1;
    }
    println!("{tally:?} on {threads} thread(s)");
    let (report, hist) = write_ensemble_outputs(&OutputDir::new(out)?, &cfg, &records)?;
    println!("wrote {} and {}", report.display(), hist.display());
    Ok(records)
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario = args.first().map_or("A", String::as_str);
    let n_seeds = args.get(1).map_or(8, |s| s.parse().expect("n_seeds must be an integer"));
    let n_nodes = args.get(2).map_or(300, |s| s.parse().expect("n_nodes must be an integer"));
    let out = args.get(3).map_or("ensemble_out", String::as_str);
    run(scenario, n_seeds, n_nodes, 10_000, Path::new(out)).map(drop)
}
