//! The central experiment for one reservoir: train on a single attractor,
//! close the loop, and compare the climate of every attractor the network
//! produces with the true one, including those it never saw.
//!
//! ```text
//! cargo run --release --example infer_unseen -- [A|B] [seed] [steps]
//! ```

use attractor_scout::error::Result;
use attractor_scout::experiment::{evaluate_model, ExperimentConfig, ScenarioData};
use attractor_scout::reservoir::build_reservoir;
use attractor_scout::training::train;

pub fn run(scenario: &str, seed: u64, n_nodes: usize, steps: usize) -> Result<()> {
    let mut cfg = ExperimentConfig::preset(scenario)?;
    cfg.reservoir.n_nodes = n_nodes;
    let data = ScenarioData::for_config(&cfg)?;
    let rcfg = cfg.reservoir_for(seed);
    let model = train(&build_reservoir(&rcfg)?, &rcfg, &data.training, &cfg.ridge)?;
    let (runs, summary) = evaluate_model(&model, &data, steps)?;
    let trained_on = &cfg.scenario.training_attractor()?.id;
    for (run, a) in runs.iter().zip(&summary.attractors) {
        let seen = if &a.attractor_id == trained_on { "trained" } else { "unseen" };
        let tail = match run.diverged_at {
            Some(k) => format!("stopped after {k} steps"),
            None => format!("{} steps", run.generated.len()),
        };
        println!(
            "{:>12} ({seen:>7}): delta_att {:.3e}  {}  [{tail}]",
            a.attractor_id,
            a.error.delta_att,
            a.class()
        );
    }
    println!("delta_tot {:.3e} -> {}", summary.outcome.delta_tot, summary.outcome.class);
    Ok(())
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario = args.first().map_or("A", String::as_str);
    let seed = args.get(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let steps = args.get(2).map_or(10_000, |s| s.parse().expect("steps must be an integer"));
    run(scenario, seed, 300, steps)
}
