//! The climate error used throughout: normalized differences of the mean and
//! of the mean absolute value per component, combined per attractor and per
//! run. Here the true attractors are scored against each other.
//!
//! ```text
//! cargo run --release --example error_metrics -- [A|B]
//! ```

use attractor_scout::error::Result;
use attractor_scout::lisprott::{make_reference, ScenarioSpec};
use attractor_scout::metrics::{attractor_error, classify, stats, AttractorError, COMPONENTS};

pub fn run(scenario: &str) -> Result<()> {
    let spec = ScenarioSpec::by_name(scenario)?;
    let mut all = Vec::new();
    for a in &spec.attractors {
        all.push((a.id.clone(), stats(&make_reference(&spec, &a.id)?.stats_source.points)?));
    }
    // Pretend the network swapped the roles of the first two attractors.
    let (first, second) = (&all[0], &all[1]);
    let e = attractor_error(&second.1, &first.1)?;
    println!("{} scored against {}:", second.0, first.0);
    for (i, c) in COMPONENTS.iter().enumerate() {
        println!("  {c}: delta {:+.3}  delta_abs {:+.3}", e.delta[i], e.delta_abs[i]);
    }
    println!("  delta_att {:.3} ({})", e.delta_att, e.class());

    let perfect = attractor_error(&first.1, &first.1)?;
    let outcome = classify(&[perfect, e, AttractorError::from_deltas([0.0; 4], [0.0; 4])], false);
    println!("run with one swapped attractor: delta_tot {:.3}, {}", outcome.delta_tot, outcome.class);
    Ok(())
}

fn main() -> Result<()> {
    run(std::env::args().nth(1).as_deref().unwrap_or("A"))
}
