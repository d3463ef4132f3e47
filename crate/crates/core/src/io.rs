//! On-disk formats.
//!
//! Trajectories are CSV files with header `t,x,y,z,u` and 17 significant
//! digits per value, accompanied by a JSON sidecar holding the simulation
//! metadata. Models are JSON; floats are written in shortest round-trip form
//! and parsed back bit-exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{in_file, Error, Result};
use crate::lisprott::{LiSprottParams, SampledTrajectory, StateVec4};
use crate::reservoir::{InputWeight, ReservoirConfig, ReservoirState, ReservoirWeights};
use crate::sparse::{CsrMatrix, Triplet};
use crate::training::{TrainedModel, TrainingMeta};

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "x", "y", "z", "u"];

const MODEL_FORMAT_VERSION: u32 = 1;

/// Sidecar record stored next to every trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub params: LiSprottParams,
    pub h: f64,
    pub stride: usize,
    pub sample_interval: f64,
    pub initial_condition: StateVec4,
    pub rng_seed: Option<u64>,
    pub n_points: usize,
    /// Free-form links, e.g. scenario, attractor id or model file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
}

impl TrajectoryMeta {
    pub fn of(t: &SampledTrajectory) -> Self {
        Self {
            params: t.params,
            h: t.h,
            stride: t.stride,
            sample_interval: t.sample_interval,
            initial_condition: t.initial_condition,
            rng_seed: t.rng_seed,
            n_points: t.len(),
            labels: BTreeMap::new(),
        }
    }

    pub fn with_label(mut self, key: &str, value: impl Into<String>) -> Self {
        self.labels.insert(key.to_string(), value.into());
        self
    }
}

/// `run.csv` → `run.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the CSV and its sidecar. The time column is `start_time + k·interval`.
pub fn write_trajectory(csv_path: &Path, t: &SampledTrajectory, meta: &TrajectoryMeta) -> Result<()> {
    write_points(csv_path, t.start_time, t.sample_interval, &t.points)?;
    write_json(&sidecar_path(csv_path), meta)
}

/// Writes bare points in trajectory format.
pub fn write_points(csv_path: &Path, start_time: f64, interval: f64, points: &[StateVec4]) -> Result<()> {
    in_file(csv_path, || write_points_inner(csv_path, start_time, interval, points))
}

fn write_points_inner(csv_path: &Path, start_time: f64, interval: f64, points: &[StateVec4]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
    w.write_record(TRAJECTORY_HEADER)?;
    for (k, p) in points.iter().enumerate() {
        let t = start_time + k as f64 * interval;
        w.write_record([t, p.x, p.y, p.z, p.u].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV rows, checking the header.
pub fn read_points(csv_path: &Path) -> Result<Vec<(f64, StateVec4)>> {
    in_file(csv_path, || read_points_inner(csv_path))
}

fn read_points_inner(csv_path: &Path) -> Result<Vec<(f64, StateVec4)>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(csv_path)?));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRAJECTORY_HEADER {
        return Err(Error::Format(format!("expected header t,x,y,z,u, got {}", header.join(","))));
    }
    r.records()
        .enumerate()
        .map(|(k, rec)| {
            let rec = rec?;
            let vals = (0..5)
                .map(|j| rec.get(j).unwrap_or("").trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("row {}: {e}", k + 2)))?;
            Ok((vals[0], StateVec4::new(vals[1], vals[2], vals[3], vals[4])))
        })
        .collect()
}

/// Reads a trajectory and its sidecar.
pub fn read_trajectory(csv_path: &Path) -> Result<(SampledTrajectory, TrajectoryMeta)> {
    let meta: TrajectoryMeta = read_json(&sidecar_path(csv_path))?;
    let rows = read_points(csv_path)?;
    if rows.len() != meta.n_points {
        let e = Error::LengthMismatch { expected: meta.n_points, got: rows.len() };
        return in_file(csv_path, || Err(e));
    }
    let traj = SampledTrajectory {
        start_time: rows.first().map_or(0.0, |r| r.0),
        points: rows.into_iter().map(|r| r.1).collect(),
        sample_interval: meta.sample_interval,
        h: meta.h,
        stride: meta.stride,
        params: meta.params,
        initial_condition: meta.initial_condition,
        rng_seed: meta.rng_seed,
    };
    Ok((traj, meta))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    in_file(path, || {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    in_file(path, || Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReadoutFile {
    /// Row-major `(N + 1) × 4`.
    w_out: Vec<[f64; 4]>,
    relaxed_state: ReservoirState,
    meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: ReservoirConfig,
    n_nodes: usize,
    w_res: Vec<Triplet>,
    w_in: Vec<Triplet>,
    bias: Vec<f64>,
    achieved_lambda_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    readout: Option<ReadoutFile>,
}

impl ModelFile {
    fn new(weights: &ReservoirWeights, cfg: &ReservoirConfig) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            config: cfg.clone(),
            n_nodes: weights.n_nodes(),
            w_res: weights.w_res.triplets(),
            w_in: weights.w_in_triplets(),
            bias: weights.bias.clone(),
            achieved_lambda_max: weights.achieved_lambda_max,
            readout: None,
        }
    }

    fn weights(&self) -> Result<ReservoirWeights> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {}", self.format_version)));
        }
        let n = self.n_nodes;
        if self.bias.len() != n || self.w_in.len() != n {
            return Err(Error::Format("bias or w_in length differs from n_nodes".into()));
        }
        let w_res = CsrMatrix::from_triplets(n, &self.w_res).map_err(Error::Format)?;
        let mut w_in = Vec::with_capacity(n);
        for (r, &Triplet(row, col, value)) in self.w_in.iter().enumerate() {
            if row != r || col >= crate::reservoir::INPUT_DIM {
                return Err(Error::Format(format!("w_in entry ({row}, {col}) is not one-per-row")));
            }
            w_in.push(InputWeight { col, value });
        }
        Ok(ReservoirWeights { w_res, w_in, bias: self.bias.clone(), achieved_lambda_max: self.achieved_lambda_max })
    }
}

/// Saves an untrained reservoir.
pub fn save_reservoir(path: &Path, weights: &ReservoirWeights, cfg: &ReservoirConfig) -> Result<()> {
    write_json(path, &ModelFile::new(weights, cfg))
}

/// Loads the reservoir part of any model file.
pub fn load_reservoir(path: &Path) -> Result<(ReservoirWeights, ReservoirConfig)> {
    let file: ModelFile = read_json(path)?;
    let weights = in_file(path, || file.weights())?;
    Ok((weights, file.config))
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    write_json(path, &model_file(model))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let file: ModelFile = read_json(path)?;
    in_file(path, || model_from_file(file))
}

fn model_from_file(file: ModelFile) -> Result<TrainedModel> {
    let weights = file.weights()?;
    let readout = file.readout.ok_or_else(|| Error::Format("no trained readout".into()))?;
    let n = weights.n_nodes();
    if readout.w_out.len() != n + 1 || readout.relaxed_state.x.len() != n {
        return Err(Error::Format("readout size differs from n_nodes".into()));
    }
    let w_out = DMatrix::from_fn(n + 1, 4, |i, j| readout.w_out[i][j]);
    Ok(TrainedModel {
        weights,
        cfg: file.config,
        w_out,
        relaxed_state: readout.relaxed_state,
        meta: readout.meta,
    })
}

fn model_file(model: &TrainedModel) -> ModelFile {
    let w = &model.w_out;
    ModelFile {
        readout: Some(ReadoutFile {
            w_out: (0..w.nrows()).map(|i| std::array::from_fn(|j| w[(i, j)])).collect(),
            relaxed_state: model.relaxed_state.clone(),
            meta: model.meta.clone(),
        }),
        ..ModelFile::new(&model.weights, &model.cfg)
    }
}
