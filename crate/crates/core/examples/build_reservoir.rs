//! Draws the sparse network of one topology seed, rescales it to the target
//! spectral abscissa and checks that two random initial states forget their
//! difference under a common input.
//!
//! ```text
//! cargo run --release --example build_reservoir -- [A|B] [seed]
//! ```

use attractor_scout::error::Result;
use attractor_scout::experiment::ExperimentConfig;
use attractor_scout::lisprott::make_training_series;
use attractor_scout::reservoir::{build_reservoir, drive, ReservoirState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run(scenario: &str, seed: u64, n_inputs: usize) -> Result<()> {
    let cfg = ExperimentConfig::preset(scenario)?;
    let rcfg = cfg.reservoir_for(seed);
    let w = build_reservoir(&rcfg)?;
    let n = w.n_nodes();
    println!(
        "N={n}, {} recurrent links (density {:.3}), {} input links",
        w.w_res.nnz(),
        w.w_res.nnz() as f64 / (n * n) as f64,
        w.w_in.len()
    );
    println!("largest real eigenvalue part {:.12} (target {})", w.achieved_lambda_max, rcfg.lambda_max_target);

    let series = make_training_series(&cfg.scenario, cfg.training_seed)?;
    let inputs = &series.points[..n_inputs.min(series.len())];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = || ReservoirState { x: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), t: 0.0 };
    let (a, _) = drive(&w, &random(), inputs, &rcfg)?;
    let (b, _) = drive(&w, &random(), inputs, &rcfg)?;
    let gap = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    println!("after {} inputs two random starts differ by at most {gap:.2e}", inputs.len());
    Ok(())
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario = args.first().map_or("A", String::as_str);
    let seed = args.get(1).map_or(Ok(0), |s| s.parse()).expect("seed must be an integer");
    run(scenario, seed, 1_000)
}
