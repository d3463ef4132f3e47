//! Simulates the Li–Sprott system for one scenario: the noisy training series
//! and the noise-free reference of every attractor, with summary statistics.
//!
//! ```text
//! cargo run --release --example generate_data -- [A|B] [out_dir]
//! ```

use std::path::Path;

use attractor_scout::error::Result;
use attractor_scout::io::{write_trajectory, TrajectoryMeta};
use attractor_scout::lisprott::{make_reference, make_training_series, ScenarioSpec};
use attractor_scout::metrics::stats;

pub fn run(scenario: &str, out: Option<&Path>) -> Result<()> {
    let spec = ScenarioSpec::by_name(scenario)?;
    let training = make_training_series(&spec, 1)?;
    println!(
        "scenario {}: a={} b={} sigma={:.3e}, sampled every {} steps ({} time units)",
        spec.name,
        spec.params.a,
        spec.params.b,
        spec.params.sigma,
        spec.stride,
        spec.sample_interval()
    );
    println!("training series on {}: {} points", spec.training_attractor()?.id, training.len());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_trajectory(&dir.join("training.csv"), &training, &TrajectoryMeta::of(&training))?;
    }

    println!("{:>12} {:>28} {:>28}", "attractor", "mean (x y z u)", "mean |.| (x y z u)");
    for a in &spec.attractors {
        let r = make_reference(&spec, &a.id)?;
        let s = stats(&r.stats_source.points)?;
        let f = |v: [f64; 4]| v.map(|c| format!("{c:6.2}")).join(" ");
        println!("{:>12} {:>28} {:>28}", a.id, f(s.mean), f(s.mean_abs));
        if let Some(dir) = out {
            let path = dir.join(format!("reference_{}.csv", a.id));
            write_trajectory(&path, &r.stats_source, &TrajectoryMeta::of(&r.stats_source))?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario = args.first().map_or("A", String::as_str);
    run(scenario, args.get(1).map(Path::new))
}
