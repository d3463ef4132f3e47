//! Trains the linear readout of one reservoir on the noisy training series
//! and saves the model as JSON.
//!
//! ```text
//! cargo run --release --example train_readout -- [A|B] [seed] [n_nodes] [model.json]
//! ```

use std::path::Path;

use attractor_scout::error::Result;
use attractor_scout::experiment::ExperimentConfig;
use attractor_scout::io::save_model;
use attractor_scout::lisprott::make_training_series;
use attractor_scout::reservoir::build_reservoir;
use attractor_scout::training::{train, TrainedModel};

pub fn run(scenario: &str, seed: u64, n_nodes: usize, save_to: Option<&Path>) -> Result<TrainedModel> {
    let mut cfg = ExperimentConfig::preset(scenario)?;
    cfg.reservoir.n_nodes = n_nodes;
    let rcfg = cfg.reservoir_for(seed);
    let series = make_training_series(&cfg.scenario, cfg.training_seed)?;
    let w = build_reservoir(&rcfg)?;
    let started = std::time::Instant::now();
    let model = train(&w, &rcfg, &series, &cfg.ridge)?;
    println!(
        "trained N={n_nodes} seed {seed} with eta={:e} in {:.1?}",
        cfg.ridge.eta,
        started.elapsed()
    );
    let e = model.meta.fit_nrmse;
    println!("one-step NRMSE  x {:.2e}  y {:.2e}  z {:.2e}  u {:.2e}", e[0], e[1], e[2], e[3]);
    println!("readout norm {:.3e}", model.w_out.norm());
    if let Some(path) = save_to {
        save_model(path, &model)?;
        println!("saved {}", path.display());
    }
    Ok(model)
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario = args.first().map_or("A", String::as_str);
    let seed = args.get(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let n_nodes = args.get(2).map_or(300, |s| s.parse().expect("n_nodes must be an integer"));
    run(scenario, seed, n_nodes, args.get(3).map(Path::new)).map(drop)
}
