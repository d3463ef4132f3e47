//! Bins the total error of the bounded runs of a report and looks for the
//! two-peak shape that separates near misses from clear failures.
//!
//! ```text
//! cargo run --release --example histogram -- ensemble_out/report.csv
//! ```

use std::path::Path;

use attractor_scout::error::Result;
use attractor_scout::experiment::{default_histogram_edges, histogram, is_bimodal, read_report, run_totals, FAILED};
use attractor_scout::metrics::OutcomeClass;

pub fn run(report: &Path) -> Result<bool> {
    let rows = read_report(report)?;
    let diverged = OutcomeClass::Diverged.to_string();
    let totals: Vec<f64> = run_totals(&rows)
        .into_iter()
        .filter(|(_, class, _)| class != FAILED && *class != diverged)
        .map(|(_, _, t)| t)
        .collect();
    let h = histogram(&totals, &default_histogram_edges())?;
    let smooth = h.smoothed(3);
    for (i, (&c, s)) in h.counts.iter().zip(&smooth).enumerate() {
        println!("[{:4.1}, {:4.1})  {c:>4}  {s:6.2}  {}", h.bin_edges[i], h.bin_edges[i + 1], "#".repeat(c));
    }
    println!("above range: {}", h.n_overflow);
    let bimodal = is_bimodal(&smooth);
    println!("{} bounded runs, smoothed profile is {}bimodal", totals.len(), if bimodal { "" } else { "not " });
    Ok(bimodal)
}

fn main() -> Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "ensemble_out/report.csv".into());
    run(Path::new(&path)).map(drop)
}
