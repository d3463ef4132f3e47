//! Readout training: one-step-ahead targets, Tikhonov-regularized normal
//! equations `(SᵀS + ηI)·W_out = SᵀY`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lisprott::{LiSprottParams, SampledTrajectory, StateVec4, TRAINING_LEN, TRANSIENT_LEN};
use crate::reservoir::{
    relax, relax_from, Integrator, ReservoirConfig, ReservoirState, ReservoirWeights, INPUT_DIM,
};

/// Inputs used only to wash out the initial reservoir state.
pub const WASHOUT_LEN: usize = TRANSIENT_LEN;

/// Rows of the training state matrix.
pub const TRAINING_ROWS: usize = TRAINING_LEN - WASHOUT_LEN - 1;

/// Refinement sweeps applied after the Cholesky solve.
const REFINEMENT_SWEEPS: usize = 3;

/// Recorded reservoir states with a trailing bias column of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix(DMatrix<f64>);

impl StateMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    fn with_capacity(rows: usize, n_nodes: usize) -> Self {
        let mut m = DMatrix::zeros(rows, n_nodes + 1);
        m.column_mut(n_nodes).fill(1.0);
        Self(m)
    }

    fn set_row(&mut self, k: usize, x: &[f64]) {
        for (j, v) in x.iter().enumerate() {
            self.0[(k, j)] = *v;
        }
    }
}

pub fn assemble_state_matrix(recorded: &[Vec<f64>]) -> Result<StateMatrix> {
    let first = recorded.first().ok_or(Error::EmptySeries)?;
    let n = first.len();
    let mut s = StateMatrix::with_capacity(recorded.len(), n);
    for (k, row) in recorded.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch(format!("row {k} has {} entries, expected {n}", row.len())));
        }
        s.set_row(k, row);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub eta: f64,
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta >= 0.0 && self.eta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("eta must be finite and >= 0, got {}", self.eta)))
        }
    }
}

/// Solves `(SᵀS + ηI)·W = SᵀY` through a Cholesky factorization of the
/// regularized Gram matrix, followed by a few sweeps of iterative refinement.
pub fn ridge_solve(s: &StateMatrix, y: &DMatrix<f64>, eta: f64) -> Result<DMatrix<f64>> {
    RidgeConfig { eta }.validate()?;
    let s = &s.0;
    if s.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "state matrix has {} rows, targets have {}",
            s.nrows(),
            y.nrows()
        )));
    }
    let mut gram = s.tr_mul(s);
    for i in 0..gram.nrows() {
        gram[(i, i)] += eta;
    }
    let rhs = s.tr_mul(y);

    let chol = gram.clone().cholesky().ok_or(Error::SingularSystem)?;
    // Cholesky succeeds on numerically singular Gram matrices whose pivots
    // round to tiny positive values; reject those explicitly.
    let scale = gram.diagonal().amax();
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if !(min_pivot > scale * f64::EPSILON * gram.nrows() as f64) {
        return Err(Error::SingularSystem);
    }
    let mut w = chol.solve(&rhs);
    for _ in 0..REFINEMENT_SWEEPS {
        let r = &rhs - &gram * &w;
        w += chol.solve(&r);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(w)
}

/// `‖(SᵀS + ηI)·W − SᵀY‖ / ‖SᵀY‖` in Frobenius norm.
pub fn normal_equation_residual(s: &StateMatrix, y: &DMatrix<f64>, eta: f64, w: &DMatrix<f64>) -> f64 {
    let s = &s.0;
    let rhs = s.tr_mul(y);
    let lhs = s.tr_mul(&(s * w)) + w * eta;
    (lhs - &rhs).norm() / rhs.norm()
}

/// Where a training series came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesProvenance {
    pub params: LiSprottParams,
    pub h: f64,
    pub stride: usize,
    pub initial_condition: StateVec4,
    pub rng_seed: Option<u64>,
    pub n_points: usize,
}

impl From<&SampledTrajectory> for SeriesProvenance {
    fn from(t: &SampledTrajectory) -> Self {
        Self {
            params: t.params,
            h: t.h,
            stride: t.stride,
            initial_condition: t.initial_condition,
            rng_seed: t.rng_seed,
            n_points: t.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub series: SeriesProvenance,
    pub eta: f64,
    pub washout: usize,
    /// One-step RMSE over the training rows divided by each target
    /// variable's standard deviation.
    pub fit_nrmse: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub weights: ReservoirWeights,
    pub cfg: ReservoirConfig,
    /// `(N + 1) × 4`; the last row multiplies the bias column.
    pub w_out: DMatrix<f64>,
    /// State after input-free relaxation; autonomous runs restart from here.
    pub relaxed_state: ReservoirState,
    pub meta: TrainingMeta,
}

/// Trains the readout on a series of exactly [`TRAINING_LEN`] points: relax,
/// wash out with the first [`WASHOUT_LEN`] points, record the next
/// [`TRAINING_ROWS`] states and regress them onto the following point.
pub fn train(
    weights: &ReservoirWeights,
    cfg: &ReservoirConfig,
    series: &SampledTrajectory,
    ridge: &RidgeConfig,
) -> Result<TrainedModel> {
    train_with_relaxed(weights, cfg, series, ridge, relax(weights, cfg))
}

/// As [`train`], but relaxing from `initial` instead of the zero state.
pub fn train_from(
    weights: &ReservoirWeights,
    cfg: &ReservoirConfig,
    series: &SampledTrajectory,
    ridge: &RidgeConfig,
    initial: ReservoirState,
) -> Result<TrainedModel> {
    if initial.x.len() != weights.n_nodes() {
        return Err(Error::DimensionMismatch("initial state size".into()));
    }
    train_with_relaxed(weights, cfg, series, ridge, relax_from(weights, cfg, initial))
}

fn train_with_relaxed(
    weights: &ReservoirWeights,
    cfg: &ReservoirConfig,
    series: &SampledTrajectory,
    ridge: &RidgeConfig,
    relaxed_state: ReservoirState,
) -> Result<TrainedModel> {
    cfg.validate()?;
    ridge.validate()?;
    if series.len() != TRAINING_LEN {
        return Err(Error::LengthMismatch { expected: TRAINING_LEN, got: series.len() });
    }
    let n = weights.n_nodes();
    let pts = &series.points;

    let mut integ = Integrator::<1>::for_config(weights, cfg);
    let mut state = relaxed_state.clone();
    integ.drive_each(&mut state, &pts[..WASHOUT_LEN], |_, _| ());

    let mut s = StateMatrix::with_capacity(TRAINING_ROWS, n);
    integ.drive_each(&mut state, &pts[WASHOUT_LEN..TRAINING_LEN - 1], |k, x| s.set_row(k, x));

    let targets = &pts[WASHOUT_LEN + 1..];
    let y = DMatrix::from_fn(TRAINING_ROWS, INPUT_DIM, |k, j| targets[k].to_array()[j]);
    let w_out = ridge_solve(&s, &y, ridge.eta)?;
    let fit_nrmse = one_step_nrmse(&s, &y, &w_out);

    Ok(TrainedModel {
        weights: weights.clone(),
        cfg: cfg.clone(),
        w_out,
        relaxed_state,
        meta: TrainingMeta {
            series: SeriesProvenance::from(series),
            eta: ridge.eta,
            washout: WASHOUT_LEN,
            fit_nrmse,
        },
    })
}

/// Per-variable RMSE of `S·W` against `Y`, normalized by the standard
/// deviation of each column of `Y`. Constant columns report the plain RMSE.
pub fn one_step_nrmse(s: &StateMatrix, y: &DMatrix<f64>, w: &DMatrix<f64>) -> [f64; 4] {
    let pred = &s.0 * w;
    let k = y.nrows() as f64;
    std::array::from_fn(|j| {
        let col = y.column(j);
        let mean = col.sum() / k;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        let mse = pred.column(j).iter().zip(col.iter()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / k;
        if var > 0.0 { (mse / var).sqrt() } else { mse.sqrt() }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sm(m: DMatrix<f64>) -> StateMatrix {
        StateMatrix(m)
    }

    #[test]
    fn assembles_bias_column() {
        let rec = vec![vec![0.1, 0.2], vec![0.3, 0.4], vec![0.5, 0.6]];
        let s = assemble_state_matrix(&rec).unwrap();
        assert_eq!((s.rows(), s.cols()), (3, 3));
        assert_eq!(s.as_matrix().column(2).as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.as_matrix()[(1, 0)], 0.3);
        assert!(matches!(assemble_state_matrix(&[]), Err(Error::EmptySeries)));
        assert!(assemble_state_matrix(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn production_shape() {
        let rec = vec![vec![0.0; 300]; TRAINING_ROWS];
        let s = assemble_state_matrix(&rec).unwrap();
        assert_eq!((s.rows(), s.cols()), (9_999, 301));
    }

    #[test]
    fn unregularized_square_system_interpolates() {
        let s = sm(dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 1.0; 0.0, 1.0, 4.0]);
        let y = dmatrix![1.0; -2.0; 0.5];
        let w = ridge_solve(&s, &y, 0.0).unwrap();
        let fit = s.as_matrix() * &w;
        assert!((fit - &y).amax() < 1e-8);
    }

    #[test]
    fn two_by_two_by_elimination() {
        // SᵀS + I = [[6, 3], [3, 3]], SᵀY = [5, 3]  =>  w = [2/3, 1/3]
        let s = sm(dmatrix![1.0, 1.0; 2.0, 1.0]);
        let y = dmatrix![1.0; 2.0];
        let w = ridge_solve(&s, &y, 1.0).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn linear_in_targets() {
        let s = sm(dmatrix![1.0, 0.5; -0.3, 1.0; 0.2, 0.2; 1.0, 1.0]);
        let y = dmatrix![1.0; 0.0; -1.0; 2.0];
        let w1 = ridge_solve(&s, &y, 0.1).unwrap();
        let w3 = ridge_solve(&s, &(&y * 3.0), 0.1).unwrap();
        assert!((w3 - w1 * 3.0).amax() < 1e-12);
    }

    #[test]
    fn singular_without_regularization() {
        let s = sm(dmatrix![1.0, 1.0; 1.0, 1.0]);
        let y = dmatrix![1.0; 1.0];
        assert!(matches!(ridge_solve(&s, &y, 0.0), Err(Error::SingularSystem)));
        assert!(ridge_solve(&s, &y, 1e-3).is_ok());
        assert!(ridge_solve(&s, &y, -1.0).is_err());
        assert!(ridge_solve(&s, &dmatrix![1.0], 1.0).is_err());
    }

    #[test]
    fn shrinkage_with_eta() {
        let s = sm(dmatrix![1.0, 0.5, 1.0; -0.3, 1.0, 1.0; 0.2, 0.2, 1.0; 1.0, -1.0, 1.0]);
        let y = dmatrix![1.0, 0.0; 0.0, 1.0; -1.0, 2.0; 2.0, 0.5];
        let norms: Vec<f64> = [1e-3, 1e-1, 1.0, 1e2, 1e6]
            .iter()
            .map(|&eta| ridge_solve(&s, &y, eta).unwrap().norm())
            .collect();
        assert!(norms.windows(2).all(|p| p[0] >= p[1]), "{norms:?}");
    }

    #[test]
    fn wrong_series_length_is_rejected() {
        let cfg = ReservoirConfig { n_nodes: 10, ..ReservoirConfig::limit_cycle_preset() };
        let w = crate::reservoir::build_reservoir(&cfg).unwrap();
        let spec = crate::lisprott::ScenarioSpec::scenario_a();
        let short = crate::lisprott::integrate_em(&spec.params, StateVec4::ZERO, 1e-3, 300, 300, 0).unwrap();
        let err = train(&w, &cfg, &short, &RidgeConfig { eta: 1e-3 }).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 11_000, got: 1 }));
    }
}
