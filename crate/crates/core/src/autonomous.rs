//! Closed-loop operation of a trained reservoir.
//!
//! The reservoir restarts from the cached post-relaxation state, is warmed up
//! on a noise-free ground-truth transient, and then feeds each readout
//! prediction back as its next input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lisprott::{StateVec4, TRANSIENT_LEN};
use crate::reservoir::Integrator;
use crate::training::TrainedModel;

/// Default number of self-generated points.
pub const DEFAULT_STEPS: usize = 10_000;

/// A prediction with any component beyond this ends the run.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// Lanes integrated together; one lane per probed attractor.
const LANES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRun {
    pub topology_seed: u64,
    pub attractor_id: String,
    pub warmup_points: Vec<StateVec4>,
    pub generated: Vec<StateVec4>,
    /// Index of the first prediction that hit the divergence guard; the
    /// series is truncated there.
    pub diverged_at: Option<usize>,
}

impl InferenceRun {
    pub fn is_truncated(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Readout applied to a reservoir state: `[x₁ … x_N, 1] · W_out`.
pub fn predict_next(model: &TrainedModel, x: &[f64]) -> StateVec4 {
    let w = &model.w_out;
    let n = x.len();
    debug_assert_eq!(w.nrows(), n + 1);
    StateVec4::from_array(std::array::from_fn(|j| {
        let col = w.column(j);
        let mut acc = col[n];
        for (xi, wi) in x.iter().zip(col.iter()) {
            acc += xi * wi;
        }
        acc
    }))
}

pub fn run_autonomous(
    model: &TrainedModel,
    attractor_id: &str,
    transient: &[StateVec4],
    n_steps: usize,
) -> Result<InferenceRun> {
    let mut runs = run_autonomous_batch(model, &[(attractor_id, transient)], n_steps)?;
    Ok(runs.remove(0))
}

/// Runs several closed-loop probes against one model. Probes are integrated
/// side by side; each one produces exactly what [`run_autonomous`] would.
pub fn run_autonomous_batch(
    model: &TrainedModel,
    probes: &[(&str, &[StateVec4])],
    n_steps: usize,
) -> Result<Vec<InferenceRun>> {
    for (id, transient) in probes {
        if transient.len() != TRANSIENT_LEN {
            return Err(Error::LengthMismatch { expected: TRANSIENT_LEN, got: transient.len() });
        }
        if !transient.iter().all(|p| p.is_finite()) {
            return Err(Error::Format(format!("transient for `{id}` is not finite")));
        }
    }
    let n = model.weights.n_nodes();
    if model.w_out.nrows() != n + 1 || model.w_out.ncols() != 4 || model.relaxed_state.x.len() != n {
        return Err(Error::DimensionMismatch("model readout does not match the reservoir".into()));
    }

    let mut runs = Vec::with_capacity(probes.len());
    for group in probes.chunks(LANES) {
        runs.extend(run_lanes(model, group, n_steps));
    }
    Ok(runs)
}

fn run_lanes(model: &TrainedModel, probes: &[(&str, &[StateVec4])], n_steps: usize) -> Vec<InferenceRun> {
    let n = model.weights.n_nodes();
    let mut integ = Integrator::<LANES>::for_config(&model.weights, &model.cfg);
    let mut x: Vec<[f64; LANES]> = model.relaxed_state.x.iter().map(|&v| [v; LANES]).collect();

    // Unused lanes replay the first probe's transient and are discarded.
    let transient = |lane: usize| probes.get(lane).unwrap_or(&probes[0]).1;
    for k in 0..TRANSIENT_LEN {
        let inputs = std::array::from_fn(|lane| transient(lane)[k]);
        integ.advance(&mut x, &inputs);
    }

    let mut generated: Vec<Vec<StateVec4>> = probes.iter().map(|_| Vec::with_capacity(n_steps)).collect();
    let mut diverged_at: Vec<Option<usize>> = vec![None; probes.len()];
    let mut lane_state = vec![0.0; n];
    let mut inputs = [StateVec4::ZERO; LANES];

    for step in 0..n_steps {
        for (lane, out) in generated.iter_mut().enumerate() {
            if diverged_at[lane].is_some() {
                continue;
            }
            for (dst, src) in lane_state.iter_mut().zip(&x) {
                *dst = src[lane];
            }
            let pred = predict_next(model, &lane_state);
            if pred.is_finite() && pred.max_abs() <= DIVERGENCE_GUARD {
                out.push(pred);
                inputs[lane] = pred;
            } else {
                diverged_at[lane] = Some(step);
                inputs[lane] = StateVec4::ZERO;
            }
        }
        let active = diverged_at.iter().any(Option::is_none);
        if !active || step + 1 == n_steps {
            break;
        }
        integ.advance(&mut x, &inputs);
    }

    probes
        .iter()
        .zip(generated)
        .zip(diverged_at)
        .map(|(((id, transient), generated), diverged_at)| InferenceRun {
            topology_seed: model.cfg.topology_seed,
            attractor_id: id.to_string(),
            warmup_points: transient.to_vec(),
            generated,
            diverged_at,
        })
        .collect()
}
