//! Attractor-reconstruction errors built from time averages.
//!
//! For every variable `i` the prediction and the ground truth are compared
//! through the plain mean and the mean of absolute values, both normalized by
//! the ground truth's absolute mean:
//!
//! ```text
//! Δi   = (⟨i⟩ − ⟨ĩ⟩) / ⟨|ĩ|⟩
//! Δ|i| = (⟨|i|⟩ − ⟨|ĩ|⟩) / ⟨|ĩ|⟩
//! Δatt = sqrt(Σ Δi² + Δ|i|²)
//! Δtot = sqrt(Σ over attractors Δatt²)
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lisprott::StateVec4;

/// Any normalized deviation at or above this marks a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 100.0;

/// All normalized deviations must stay below this for a partial success.
pub const SUCCESS_THRESHOLD: f64 = 2.0;

pub const COMPONENTS: [&str; 4] = ["x", "y", "z", "u"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorStats {
    pub mean: [f64; 4],
    pub mean_abs: [f64; 4],
    pub n_points: usize,
}

/// Time averages of each component and of its absolute value.
pub fn stats(series: &[StateVec4]) -> Result<AttractorStats> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut sum = [0.0; 4];
    let mut sum_abs = [0.0; 4];
    for (k, p) in series.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite { step: k });
        }
        for (i, v) in p.to_array().into_iter().enumerate() {
            sum[i] += v;
            sum_abs[i] += v.abs();
        }
    }
    let n = series.len() as f64;
    Ok(AttractorStats {
        mean: sum.map(|s| s / n),
        mean_abs: sum_abs.map(|s| s / n),
        n_points: series.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorError {
    pub delta: [f64; 4],
    pub delta_abs: [f64; 4],
    pub delta_att: f64,
}

impl AttractorError {
    pub fn from_deltas(delta: [f64; 4], delta_abs: [f64; 4]) -> Self {
        let delta_att = delta.iter().chain(&delta_abs).map(|d| d * d).sum::<f64>().sqrt();
        Self { delta, delta_abs, delta_att }
    }

    /// Stand-in for an attractor whose autonomous run produced nothing usable.
    pub fn unbounded() -> Self {
        Self::from_deltas([f64::INFINITY; 4], [f64::INFINITY; 4])
    }

    /// Largest of the eight `|Δ|`; NaN counts as infinite.
    pub fn max_abs(&self) -> f64 {
        self.delta
            .iter()
            .chain(&self.delta_abs)
            .map(|d| if d.is_nan() { f64::INFINITY } else { d.abs() })
            .fold(0.0, f64::max)
    }

    /// Outcome class of this attractor on its own.
    pub fn class(&self) -> OutcomeClass {
        let m = self.max_abs();
        if m >= DIVERGENCE_THRESHOLD {
            OutcomeClass::Diverged
        } else if m < SUCCESS_THRESHOLD {
            OutcomeClass::PartialSuccess
        } else {
            OutcomeClass::BoundedFailure
        }
    }
}

pub fn attractor_error(pred: &AttractorStats, reference: &AttractorStats) -> Result<AttractorError> {
    let mut delta = [0.0; 4];
    let mut delta_abs = [0.0; 4];
    for i in 0..4 {
        let norm = reference.mean_abs[i];
        if norm == 0.0 {
            return Err(Error::ZeroNormalizer { component: COMPONENTS[i] });
        }
        delta[i] = (pred.mean[i] - reference.mean[i]) / norm;
        delta_abs[i] = (pred.mean_abs[i] - reference.mean_abs[i]) / norm;
    }
    Ok(AttractorError::from_deltas(delta, delta_abs))
}

pub fn total_error(per_attractor: &[AttractorError]) -> f64 {
    per_attractor.iter().map(|e| e.delta_att * e.delta_att).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    Diverged,
    BoundedFailure,
    PartialSuccess,
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Diverged => "Diverged",
            Self::BoundedFailure => "BoundedFailure",
            Self::PartialSuccess => "PartialSuccess",
        })
    }
}

impl FromStr for OutcomeClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Diverged" => Ok(Self::Diverged),
            "BoundedFailure" => Ok(Self::BoundedFailure),
            "PartialSuccess" => Ok(Self::PartialSuccess),
            other => Err(Error::Format(format!("unknown outcome class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub class: OutcomeClass,
    pub per_attractor: Vec<AttractorError>,
    pub delta_tot: f64,
}

/// Classifies a run from the errors of all its attractors. `truncated` runs
/// (an autonomous series hit the divergence guard) are always `Diverged`.
pub fn classify(per_attractor: &[AttractorError], truncated: bool) -> RunOutcome {
    let worst = per_attractor.iter().map(AttractorError::max_abs).fold(0.0, f64::max);
    let class = if truncated || worst >= DIVERGENCE_THRESHOLD {
        OutcomeClass::Diverged
    } else if worst < SUCCESS_THRESHOLD {
        OutcomeClass::PartialSuccess
    } else {
        OutcomeClass::BoundedFailure
    };
    RunOutcome { class, per_attractor: per_attractor.to_vec(), delta_tot: total_error(per_attractor) }
}
