//! End-to-end experiments: configuration, single runs over one topology seed,
//! parallel ensembles, report files and the Δ_tot histogram.

use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autonomous::{run_autonomous_batch, InferenceRun, DEFAULT_STEPS};
use crate::error::{in_file, Error, Result};
use crate::io::{self, TrajectoryMeta};
use crate::lisprott::{
    make_reference, make_training_series, Reference, SampledTrajectory, ScenarioSpec, StateVec4,
};
use crate::metrics::{attractor_error, classify, stats, AttractorError, AttractorStats, OutcomeClass, RunOutcome};
use crate::reservoir::{build_reservoir, ReservoirConfig};
use crate::training::{train, RidgeConfig, TrainedModel};

/// Caps worker threads when `--parallelism` is not given.
pub const THREADS_ENV: &str = "ATTRACTOR_SCOUT_THREADS";

pub const REPORT_FILE: &str = "report.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

/// Bin edges `0, 0.5, …, 10` used for Δ_tot histograms unless configured.
pub fn default_histogram_edges() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.5).collect()
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

fn default_training_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_seeds: usize,
    /// Run `k` uses topology seed `base_seed + k`.
    pub base_seed: u64,
    #[serde(default = "default_steps")]
    pub autonomous_steps: usize,
    /// Noise seed of the shared training series.
    #[serde(default = "default_training_seed")]
    pub training_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Also write every generated series (large).
    #[serde(default)]
    pub save_series: bool,
    #[serde(default = "default_histogram_edges")]
    pub histogram_edges: Vec<f64>,
    pub scenario: ScenarioSpec,
    /// `topology_seed` is replaced per run.
    pub reservoir: ReservoirConfig,
    pub ridge: RidgeConfig,
}

impl ExperimentConfig {
    /// Published meta-parameters for scenario `A` or `B`.
    pub fn preset(scenario: &str) -> Result<Self> {
        let spec = ScenarioSpec::by_name(scenario)?;
        let (reservoir, eta, n_seeds) = match spec.name.as_str() {
            "A" => (ReservoirConfig::limit_cycle_preset(), 1e-3, 100),
            _ => (ReservoirConfig::chaos_preset(), 1e-5, 200),
        };
        Ok(Self {
            n_seeds,
            base_seed: 0,
            autonomous_steps: DEFAULT_STEPS,
            training_seed: default_training_seed(),
            output_dir: None,
            save_series: false,
            histogram_edges: default_histogram_edges(),
            scenario: spec,
            reservoir,
            ridge: RidgeConfig { eta },
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        in_file(path, || Self::from_toml_str(&std::fs::read_to_string(path)?))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::InvalidConfig("n_seeds must be at least 1".into()));
        }
        if self.base_seed.checked_add(self.n_seeds as u64 - 1).is_none() {
            return Err(Error::InvalidConfig("base_seed + n_seeds overflows".into()));
        }
        if self.histogram_edges.len() < 2 || !self.histogram_edges.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("histogram_edges must be at least two ascending values".into()));
        }
        self.scenario.validate()?;
        self.reservoir.validate()?;
        self.ridge.validate()
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(|k| self.base_seed + k)
    }

    pub fn reservoir_for(&self, seed: u64) -> ReservoirConfig {
        ReservoirConfig { topology_seed: seed, ..self.reservoir.clone() }
    }
}

/// Data shared read-only by every run of an experiment.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub spec: ScenarioSpec,
    pub training: SampledTrajectory,
    /// One per scenario attractor, in scenario order.
    pub references: Vec<Reference>,
    pub reference_stats: Vec<AttractorStats>,
}

impl ScenarioData {
    pub fn prepare(spec: &ScenarioSpec, training_seed: u64) -> Result<Self> {
        let training = make_training_series(spec, training_seed)?;
        let references = spec
            .attractors
            .iter()
            .map(|a| make_reference(spec, &a.id))
            .collect::<Result<Vec<_>>>()?;
        let reference_stats = references
            .iter()
            .map(|r| stats(&r.stats_source.points))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec: spec.clone(), training, references, reference_stats })
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::prepare(&cfg.scenario, cfg.training_seed)
    }
}

/// Per-attractor result of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorResult {
    pub attractor_id: String,
    pub error: AttractorError,
    pub n_generated: usize,
    pub diverged_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_file: Option<PathBuf>,
}

impl AttractorResult {
    /// The run-level classification rule applied to this attractor alone.
    pub fn class(&self) -> OutcomeClass {
        if self.diverged_at.is_some() {
            OutcomeClass::Diverged
        } else {
            self.error.class()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub achieved_lambda_max: f64,
    pub fit_nrmse: [f64; 4],
    pub attractors: Vec<AttractorResult>,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunResult {
    Completed(RunSummary),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub scenario: String,
    pub result: RunResult,
}

impl RunRecord {
    pub fn summary(&self) -> Option<&RunSummary> {
        match &self.result {
            RunResult::Completed(s) => Some(s),
            RunResult::Failed(_) => None,
        }
    }

    pub fn class(&self) -> Option<OutcomeClass> {
        self.summary().map(|s| s.outcome.class)
    }

    pub fn delta_tot(&self) -> Option<f64> {
        self.summary().map(|s| s.outcome.delta_tot)
    }
}

/// Closed-loop probes of every scenario attractor, scored against the
/// references.
pub fn evaluate_model(model: &TrainedModel, data: &ScenarioData, steps: usize) -> Result<(Vec<InferenceRun>, RunSummary)> {
    let probes: Vec<(&str, &[StateVec4])> = data
        .references
        .iter()
        .map(|r| (r.attractor_id.as_str(), r.transient.points.as_slice()))
        .collect();
    let runs = run_autonomous_batch(model, &probes, steps)?;
    let attractors = runs
        .iter()
        .zip(&data.reference_stats)
        .map(|(run, reference)| {
            let error = match stats(&run.generated) {
                Ok(s) => attractor_error(&s, reference)?,
                Err(Error::EmptySeries | Error::NonFinite { .. }) => AttractorError::unbounded(),
                Err(e) => return Err(e),
            };
            Ok(AttractorResult {
                attractor_id: run.attractor_id.clone(),
                error,
                n_generated: run.generated.len(),
                diverged_at: run.diverged_at,
                series_file: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<_> = attractors.iter().map(|a| a.error).collect();
    let outcome = classify(&errors, runs.iter().any(InferenceRun::is_truncated));
    let summary = RunSummary {
        achieved_lambda_max: model.weights.achieved_lambda_max,
        fit_nrmse: model.meta.fit_nrmse,
        attractors,
        outcome,
    };
    Ok((runs, summary))
}

/// Builds, trains and probes the reservoir of one topology seed. Errors are
/// captured in a `Failed` record.
pub fn run_seed(cfg: &ExperimentConfig, data: &ScenarioData, seed: u64) -> RunRecord {
    let result = match try_run_seed(cfg, data, seed) {
        Ok(summary) => RunResult::Completed(summary),
        Err(e) => RunResult::Failed(e.to_string()),
    };
    RunRecord { seed, scenario: cfg.scenario.name.clone(), result }
}

fn try_run_seed(cfg: &ExperimentConfig, data: &ScenarioData, seed: u64) -> Result<RunSummary> {
    let rcfg = cfg.reservoir_for(seed);
    let weights = build_reservoir(&rcfg)?;
    let model = train(&weights, &rcfg, &data.training, &cfg.ridge)?;
    let (runs, mut summary) = evaluate_model(&model, data, cfg.autonomous_steps)?;
    if let (true, Some(dir)) = (cfg.save_series, &cfg.output_dir) {
        let out = OutputDir::new(dir)?;
        for (run, result) in runs.iter().zip(&mut summary.attractors) {
            let rel = PathBuf::from("series").join(format!("seed_{seed}_{}.csv", run.attractor_id));
            write_generated(&out, &rel, run, &data.spec, &format!("seed {seed}"))?;
            result.series_file = Some(rel);
        }
    }
    Ok(summary)
}

/// [`run_seed`] with the scenario data computed on the spot.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    let data = ScenarioData::for_config(cfg)?;
    Ok(run_seed(cfg, &data, seed))
}

/// Thread count: the explicit value, else `ATTRACTOR_SCOUT_THREADS`, else
/// the number of available cores.
pub fn resolve_parallelism(explicit: Option<usize>) -> Result<usize> {
    let n = match explicit {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV}={v} is not a thread count")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(Error::InvalidConfig("parallelism must be at least 1".into()));
    }
    Ok(n)
}

/// Runs every seed of `cfg` on `threads` workers. Records come back in seed
/// order and do not depend on the thread count.
pub fn run_ensemble(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let data = ScenarioData::for_config(cfg)?;
    run_ensemble_with(cfg, &data, threads, |_| ())
}

/// As [`run_ensemble`] with precomputed data; `progress` sees each record as
/// it completes, in completion order.
pub fn run_ensemble_with<F>(cfg: &ExperimentConfig, data: &ScenarioData, threads: usize, progress: F) -> Result<Vec<RunRecord>>
where
    F: Fn(&RunRecord) + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let seeds: Vec<u64> = cfg.seeds().collect();
    Ok(pool.install(|| {
        seeds
            .par_iter()
            .with_max_len(1)
            .map(|&seed| {
                let rec = run_seed(cfg, data, seed);
                progress(&rec);
                rec
            })
            .collect()
    }))
}

/// Directory all experiment output is confined to.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Resolves a relative path inside the directory, creating parents.
    /// Absolute paths and `..` components are rejected.
    pub fn file(&self, rel: &Path) -> Result<PathBuf> {
        let safe = rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
        if !safe || rel.as_os_str().is_empty() {
            return Err(Error::PathEscape(rel.to_path_buf()));
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(path)
    }
}

/// Writes a generated series in trajectory format, linked to its origin.
pub fn write_generated(out: &OutputDir, rel: &Path, run: &InferenceRun, spec: &ScenarioSpec, model: &str) -> Result<PathBuf> {
    let path = out.file(rel)?;
    let interval = spec.sample_interval();
    let start = (run.warmup_points.len() + 1) as f64 * interval;
    io::write_points(&path, start, interval, &run.generated)?;
    let mut meta = TrajectoryMeta {
        params: spec.params.noise_free(),
        h: spec.h,
        stride: spec.stride,
        sample_interval: interval,
        initial_condition: spec.attractor(&run.attractor_id)?.initial_condition,
        rng_seed: None,
        n_points: run.generated.len(),
        labels: Default::default(),
    }
    .with_label("scenario", spec.name.clone())
    .with_label("attractor_id", run.attractor_id.clone())
    .with_label("model", model)
    .with_label("topology_seed", run.topology_seed.to_string());
    if let Some(k) = run.diverged_at {
        meta = meta.with_label("diverged_at", k.to_string());
    }
    io::write_json(&io::sidecar_path(&path), &meta)?;
    Ok(path)
}

/// Class label used in reports for runs that raised an error.
pub const FAILED: &str = "Failed";

/// One report line: one attractor of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub seed: u64,
    pub scenario: String,
    pub attractor_id: String,
    /// Class of the whole run, or [`FAILED`].
    pub class: String,
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_z: f64,
    pub delta_u: f64,
    pub delta_abs_x: f64,
    pub delta_abs_y: f64,
    pub delta_abs_z: f64,
    pub delta_abs_u: f64,
    pub delta_att: f64,
    pub delta_tot: f64,
}

impl ReportRow {
    pub fn error(&self) -> AttractorError {
        AttractorError::from_deltas(
            [self.delta_x, self.delta_y, self.delta_z, self.delta_u],
            [self.delta_abs_x, self.delta_abs_y, self.delta_abs_z, self.delta_abs_u],
        )
    }
}

pub fn report_rows(records: &[RunRecord]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for rec in records {
        match &rec.result {
            RunResult::Completed(s) => {
                for a in &s.attractors {
                    let (d, da) = (a.error.delta, a.error.delta_abs);
                    rows.push(ReportRow {
                        seed: rec.seed,
                        scenario: rec.scenario.clone(),
                        attractor_id: a.attractor_id.clone(),
                        class: s.outcome.class.to_string(),
                        delta_x: d[0],
                        delta_y: d[1],
                        delta_z: d[2],
                        delta_u: d[3],
                        delta_abs_x: da[0],
                        delta_abs_y: da[1],
                        delta_abs_z: da[2],
                        delta_abs_u: da[3],
                        delta_att: a.error.delta_att,
                        delta_tot: s.outcome.delta_tot,
                    });
                }
            }
            RunResult::Failed(_) => rows.push(ReportRow {
                seed: rec.seed,
                scenario: rec.scenario.clone(),
                attractor_id: String::new(),
                class: FAILED.into(),
                delta_x: f64::NAN,
                delta_y: f64::NAN,
                delta_z: f64::NAN,
                delta_u: f64::NAN,
                delta_abs_x: f64::NAN,
                delta_abs_y: f64::NAN,
                delta_abs_z: f64::NAN,
                delta_abs_u: f64::NAN,
                delta_att: f64::NAN,
                delta_tot: f64::NAN,
            }),
        }
    }
    rows
}

pub fn write_report(path: &Path, records: &[RunRecord]) -> Result<()> {
    in_file(path, || {
        let mut w = csv::Writer::from_path(path)?;
        for row in report_rows(records) {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    })
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    in_file(path, || {
        let mut r = csv::Reader::from_path(path)?;
        Ok(r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?)
    })
}

/// Per-seed `(class, Δ_tot)` from report rows, in first-seen order.
pub fn run_totals(rows: &[ReportRow]) -> Vec<(u64, String, f64)> {
    let mut out: Vec<(u64, String, f64)> = Vec::new();
    for row in rows {
        if out.last().is_none_or(|l| l.0 != row.seed) {
            out.push((row.seed, row.class.clone(), row.delta_tot));
        }
    }
    out
}

/// Δ_tot of every run that neither diverged nor failed.
pub fn bounded_totals(records: &[RunRecord]) -> Vec<f64> {
    records
        .iter()
        .filter(|r| matches!(r.class(), Some(c) if c != OutcomeClass::Diverged))
        .filter_map(RunRecord::delta_tot)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Values at or above the last edge.
    pub n_overflow: usize,
    /// Values below the first edge.
    pub n_underflow: usize,
}

/// Left-closed, right-open binning. Non-finite values other than `+∞` are
/// ignored; `+∞` counts as overflow.
pub fn histogram(values: &[f64], bin_edges: &[f64]) -> Result<Histogram> {
    if bin_edges.len() < 2 || !bin_edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig("bin edges must be at least two ascending values".into()));
    }
    let last = bin_edges[bin_edges.len() - 1];
    let mut h = Histogram {
        bin_edges: bin_edges.to_vec(),
        counts: vec![0; bin_edges.len() - 1],
        n_overflow: 0,
        n_underflow: 0,
    };
    for &v in values {
        if v.is_nan() || v == f64::NEG_INFINITY {
            continue;
        }
        if v >= last {
            h.n_overflow += 1;
        } else if v < bin_edges[0] {
            h.n_underflow += 1;
        } else {
            // First edge strictly greater than v closes the bin.
            let k = bin_edges.partition_point(|&e| e <= v);
            h.counts[k - 1] += 1;
        }
    }
    Ok(h)
}

impl Histogram {
    /// Centered moving average over `window` bins (odd), truncated at the
    /// ends.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let half = window / 2;
        let n = self.counts.len();
        (0..n)
            .map(|i| {
                let (lo, hi) = (i.saturating_sub(half), (i + half + 1).min(n));
                self.counts[lo..hi].iter().sum::<usize>() as f64 / (hi - lo) as f64
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        in_file(path, || self.write_csv_inner(path))
    }

    fn write_csv_inner(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bin_low", "bin_high", "count"])?;
        if self.n_underflow > 0 {
            w.write_record([f64::NEG_INFINITY.to_string(), self.bin_edges[0].to_string(), self.n_underflow.to_string()])?;
        }
        for (k, c) in self.counts.iter().enumerate() {
            w.write_record([self.bin_edges[k].to_string(), self.bin_edges[k + 1].to_string(), c.to_string()])?;
        }
        let last = self.bin_edges[self.bin_edges.len() - 1];
        w.write_record([last.to_string(), f64::INFINITY.to_string(), self.n_overflow.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

/// Two local maxima separated by a local minimum: some `i < j < k` with
/// `s[i] > s[j] < s[k]`.
pub fn is_bimodal(s: &[f64]) -> bool {
    let n = s.len();
    if n < 3 {
        return false;
    }
    let mut best_left = vec![f64::NEG_INFINITY; n];
    for j in 1..n {
        best_left[j] = best_left[j - 1].max(s[j - 1]);
    }
    let mut best_right = f64::NEG_INFINITY;
    for j in (1..n - 1).rev() {
        best_right = best_right.max(s[j + 1]);
        if best_left[j] > s[j] && best_right > s[j] {
            return true;
        }
    }
    false
}

/// Writes `report.csv` and `histogram.csv` of an ensemble into `out`.
pub fn write_ensemble_outputs(out: &OutputDir, cfg: &ExperimentConfig, records: &[RunRecord]) -> Result<(PathBuf, PathBuf)> {
    let report = out.file(Path::new(REPORT_FILE))?;
    write_report(&report, records)?;
    let hist = histogram(&bounded_totals(records), &cfg.histogram_edges)?;
    let hist_path = out.file(Path::new(HISTOGRAM_FILE))?;
    hist.write_csv(&hist_path)?;
    Ok((report, hist_path))
}
