//! Command-line front end. Every subcommand writes into the `--out`
//! directory and prints the files it produced.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::autonomous::run_autonomous;
use crate::error::{Error, Result};
use crate::experiment::{
    self, evaluate_model, histogram, read_report, resolve_parallelism, run_ensemble_with, run_totals,
    write_ensemble_outputs, write_generated, write_report, ExperimentConfig, OutputDir, RunRecord, RunResult,
    ScenarioData, FAILED,
};
use crate::io::{self, TrajectoryMeta};
use crate::lisprott::{make_reference, make_training_series};
use crate::metrics::OutcomeClass;
use crate::reservoir::build_reservoir;
use crate::training::{train, TrainedModel};

#[derive(Debug, Parser)]
#[command(name = "attractor-scout", version, about = "Infer unseen attractors with a continuous-time reservoir computer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the noisy training series and the noise-free references.
    GenerateData(Common),
    /// Build a reservoir for one topology seed and train its readout.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training series CSV (with sidecar); generated when omitted.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Run one attractor probe in closed loop.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        attractor: String,
    },
    /// Probe every scenario attractor with a trained model and write a report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train and evaluate many topology seeds; writes report and histogram.
    Ensemble(Common),
    /// Rebin the Δ_tot values of an existing report.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report: PathBuf,
        /// Also bin Diverged runs.
        #[arg(long)]
        include_diverged: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; defaults to the scenario preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["A", "B"])]
    scenario: Option<String>,
    /// Topology seed (train), base seed (ensemble) or noise seed (generate-data).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_seeds: Option<usize>,
    /// Number of closed-loop steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::preset(self.scenario.as_deref().unwrap_or("A"))?,
        };
        if let (Some(name), Some(_)) = (&self.scenario, &self.config) {
            if *name != cfg.scenario.name {
                return Err(Error::InvalidConfig(format!(
                    "--scenario {name} conflicts with config scenario {}",
                    cfg.scenario.name
                )));
            }
        }
        if let Some(n) = self.n_seeds {
            cfg.n_seeds = n;
        }
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(steps) = self.steps {
            cfg.autonomous_steps = steps;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> Result<OutputDir> {
        OutputDir::new(cfg.output_dir.as_deref().unwrap_or(Path::new(".")))
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(parsed.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenerateData(common) => generate_data(&common),
        Command::Train { common, series } => train_cmd(&common, series.as_deref()),
        Command::Infer { common, model, attractor } => infer(&common, &model, &attractor),
        Command::Evaluate { common, model } => evaluate(&common, &model),
        Command::Ensemble(common) => ensemble(&common),
        Command::Histogram { common, report, include_diverged } => rebin(&common, &report, include_diverged),
    }
}

fn generate_data(common: &Common) -> Result<()> {
    let mut cfg = common.config()?;
    if let Some(seed) = common.seed {
        cfg.training_seed = seed;
    }
    let out = common.out_dir(&cfg)?;
    let spec = &cfg.scenario;
    let training = make_training_series(spec, cfg.training_seed)?;
    let path = out.file(Path::new("training.csv"))?;
    let train_attractor = spec.training_attractor()?.id.clone();
    io::write_trajectory(
        &path,
        &training,
        &TrajectoryMeta::of(&training)
            .with_label("scenario", spec.name.clone())
            .with_label("attractor_id", train_attractor),
    )?;
    println!("{}", path.display());
    for a in &spec.attractors {
        let r = make_reference(spec, &a.id)?;
        for (kind, t) in [("transient", &r.transient), ("stats", &r.stats_source)] {
            let path = out.file(&PathBuf::from(format!("reference_{}_{kind}.csv", a.id)))?;
            let meta = TrajectoryMeta::of(t)
                .with_label("scenario", spec.name.clone())
                .with_label("attractor_id", a.id.clone())
                .with_label("role", kind);
            io::write_trajectory(&path, t, &meta)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn train_cmd(common: &Common, series: Option<&Path>) -> Result<()> {
    let cfg = common.config()?;
    let out = common.out_dir(&cfg)?;
    let training = match series {
        Some(p) => io::read_trajectory(p)?.0,
        None => make_training_series(&cfg.scenario, cfg.training_seed)?,
    };
    let rcfg = cfg.reservoir_for(cfg.base_seed);
    let weights = build_reservoir(&rcfg)?;
    let model = train(&weights, &rcfg, &training, &cfg.ridge)?;
    let path = out.file(Path::new(&format!("model_seed_{}.json", cfg.base_seed)))?;
    io::save_model(&path, &model)?;
    let n = model.meta.fit_nrmse;
    eprintln!(
        "seed {}: lambda_max {:.6}, one-step NRMSE x {:.3e} y {:.3e} z {:.3e} u {:.3e}",
        cfg.base_seed, weights.achieved_lambda_max, n[0], n[1], n[2], n[3]
    );
    println!("{}", path.display());
    Ok(())
}

fn load_for_scenario(path: &Path, cfg: &ExperimentConfig) -> Result<TrainedModel> {
    let model = io::load_model(path)?;
    let (trained, wanted) = (model.meta.series.params, cfg.scenario.params);
    if trained.a != wanted.a || trained.b != wanted.b {
        return Err(Error::InvalidConfig(format!(
            "model was trained with a={}, b={} but scenario {} has a={}, b={}",
            trained.a, trained.b, cfg.scenario.name, wanted.a, wanted.b
        )));
    }
    Ok(model)
}

fn infer(common: &Common, model_path: &Path, attractor: &str) -> Result<()> {
    let cfg = common.config()?;
    let out = common.out_dir(&cfg)?;
    let model = load_for_scenario(model_path, &cfg)?;
    let reference = make_reference(&cfg.scenario, attractor)?;
    let run = run_autonomous(&model, attractor, &reference.transient.points, cfg.autonomous_steps)?;
    let rel = PathBuf::from(format!("generated_seed_{}_{attractor}.csv", model.cfg.topology_seed));
    let path = write_generated(&out, &rel, &run, &cfg.scenario, &model_path.display().to_string())?;
    if let Some(k) = run.diverged_at {
        eprintln!("closed loop diverged after {k} steps");
    }
    println!("{}", path.display());
    Ok(())
}

fn evaluate(common: &Common, model_path: &Path) -> Result<()> {
    let cfg = common.config()?;
    let out = common.out_dir(&cfg)?;
    let model = load_for_scenario(model_path, &cfg)?;
    let data = ScenarioData::for_config(&cfg)?;
    let (_, summary) = evaluate_model(&model, &data, cfg.autonomous_steps)?;
    for a in &summary.attractors {
        eprintln!("{:>12}  delta_att {:.4e}", a.attractor_id, a.error.delta_att);
    }
    eprintln!("delta_tot {:.4e}  {}", summary.outcome.delta_tot, summary.outcome.class);
    let record = RunRecord {
        seed: model.cfg.topology_seed,
        scenario: cfg.scenario.name.clone(),
        result: RunResult::Completed(summary),
    };
    let path = out.file(Path::new(experiment::REPORT_FILE))?;
    write_report(&path, &[record])?;
    println!("{}", path.display());
    Ok(())
}

fn ensemble(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let threads = resolve_parallelism(common.parallelism)?;
    let out = common.out_dir(&cfg)?;
    std::fs::write(out.file(Path::new("config.toml"))?, cfg.to_toml_string()?)?;
    let data = ScenarioData::for_config(&cfg)?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let records = run_ensemble_with(&cfg, &data, threads, |rec| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        let status = match &rec.result {
            RunResult::Completed(s) => format!("{} delta_tot {:.4e}", s.outcome.class, s.outcome.delta_tot),
            RunResult::Failed(e) => format!("{FAILED}: {e}"),
        };
        eprintln!("[{k}/{}] seed {}: {status}", cfg.n_seeds, rec.seed);
    })?;
    let (report, hist) = write_ensemble_outputs(&out, &cfg, &records)?;
    println!("{}", report.display());
    println!("{}", hist.display());
    Ok(())
}

fn rebin(common: &Common, report: &Path, include_diverged: bool) -> Result<()> {
    let cfg = common.config()?;
    let out = common.out_dir(&cfg)?;
    let rows = read_report(report)?;
    let diverged = OutcomeClass::Diverged.to_string();
    let values: Vec<f64> = run_totals(&rows)
        .into_iter()
        .filter(|(_, class, _)| class != FAILED && (include_diverged || *class != diverged))
        .map(|(_, _, total)| total)
        .collect();
    let h = histogram(&values, &cfg.histogram_edges)?;
    let path = out.file(Path::new(experiment::HISTOGRAM_FILE))?;
    h.write_csv(&path)?;
    println!("{}", path.display());
    Ok(())
}
