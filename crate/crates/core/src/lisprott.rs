//! The four-dimensional Li–Sprott extension of the Lorenz system,
//!
//! ```text
//! ẋ = y − x        + σξx
//! ẏ = −xz + u      + σξy
//! ż = xy − a       + σξz
//! u̇ = −by          + σξu
//! ```
//!
//! integrated with Euler–Maruyama and sampled every `stride` steps. The two
//! published parameter regimes are available through [`ScenarioSpec::scenario_a`]
//! and [`ScenarioSpec::scenario_b`].
//!
//! Noise is drawn from a ChaCha8 stream seeded with the 64-bit run seed and
//! transformed to standard normals with `rand_distr`'s ziggurat sampler. Runs
//! are bit-reproducible for a fixed seed within this crate.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Euler–Maruyama step.
pub const DEFAULT_H: f64 = 1e-3;

/// Points in every training series: washout + training rows + one reserve target.
pub const TRAINING_LEN: usize = 11_000;

/// Length of the noise-free transient used to warm up autonomous runs.
pub const TRANSIENT_LEN: usize = 1_000;

/// Points per reference attractor used for statistics.
pub const REFERENCE_LEN: usize = 10_000;

/// Sampled points discarded (counted from the initial condition) before the
/// reference statistics window starts.
pub const REFERENCE_DISCARD: usize = 10_000;

/// Any state component beyond this magnitude is treated as a blow-up.
pub const NON_FINITE_LIMIT: f64 = 1e12;

/// Scenario noise strength. The per-step increment has standard deviation
/// `σ√h = 0.2·h`.
pub fn default_sigma() -> f64 {
    0.2 * DEFAULT_H.sqrt()
}

/// One point of the target system.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
}

impl StateVec4 {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64, u: f64) -> Self {
        Self { x, y, z, u }
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.u]
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn max_abs(self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The symmetry of the system: `(x, y, z, u) → (−x, −y, z, −u)`.
    pub fn mirrored(self) -> Self {
        Self::new(-self.x, -self.y, self.z, -self.u)
    }
}

impl Add for StateVec4 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z, self.u + o.u)
    }
}

impl Sub for StateVec4 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z, self.u - o.u)
    }
}

impl Mul<f64> for StateVec4 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k, self.u * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiSprottParams {
    pub a: f64,
    pub b: f64,
    /// Noise strength; zero gives the deterministic system.
    pub sigma: f64,
}

impl LiSprottParams {
    pub fn new(a: f64, b: f64, sigma: f64) -> Result<Self> {
        let p = Self { a, b, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "Li-Sprott parameters must be finite with sigma >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn noise_free(self) -> Self {
        Self { sigma: 0.0, ..self }
    }
}

/// Deterministic part of the vector field.
#[inline]
pub fn drift(s: StateVec4, p: &LiSprottParams) -> StateVec4 {
    StateVec4::new(s.y - s.x, -s.x * s.z + s.u, s.x * s.y - p.a, -p.b * s.y)
}

/// A uniformly sampled stretch of a Li–Sprott trajectory and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTrajectory {
    pub points: Vec<StateVec4>,
    /// Simulation time of `points[0]`.
    pub start_time: f64,
    /// Time between consecutive points (`h · stride`).
    pub sample_interval: f64,
    pub h: f64,
    pub stride: usize,
    pub params: LiSprottParams,
    pub initial_condition: StateVec4,
    /// Noise seed; `None` for noise-free runs.
    pub rng_seed: Option<u64>,
}

impl SampledTrajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.sample_interval
    }

    /// Copy of the points in `range`, with the time axis shifted accordingly.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            start_time: self.time_of(range.start),
            points: self.points[range].to_vec(),
            ..self.clone()
        }
    }
}

/// Euler–Maruyama integration, emitting the state after every `stride`-th step.
///
/// `seed` is ignored (and not recorded) when `params.sigma == 0`.
pub fn integrate_em(
    params: &LiSprottParams,
    x0: StateVec4,
    h: f64,
    n_steps: usize,
    stride: usize,
    seed: u64,
) -> Result<SampledTrajectory> {
    params.validate()?;
    if !(h > 0.0) || stride == 0 || n_steps % stride != 0 {
        return Err(Error::InvalidConfig(format!(
            "need h > 0 and n_steps ({n_steps}) divisible by stride ({stride})"
        )));
    }
    if !x0.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }

    let noisy = params.sigma > 0.0;
    let kick = params.sigma * h.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_steps / stride);
    let mut s = x0;

    for step in 1..=n_steps {
        let d = drift(s, params);
        s = s + d * h;
        if noisy {
            let xi: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            s = s + StateVec4::from_array(xi) * kick;
        }
        if !(s.max_abs() <= NON_FINITE_LIMIT) {
            return Err(Error::NonFinite { step });
        }
        if step % stride == 0 {
            points.push(s);
        }
    }

    let sample_interval = h * stride as f64;
    Ok(SampledTrajectory {
        points,
        start_time: sample_interval,
        sample_interval,
        h,
        stride,
        params: *params,
        initial_condition: x0,
        rng_seed: noisy.then_some(seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttractorLabel {
    LimitCyclePlus,
    LimitCycleMinus,
    Torus,
    ChaosPlus,
    ChaosMinus,
}

impl AttractorLabel {
    pub fn is_chaotic(self) -> bool {
        matches!(self, Self::ChaosPlus | Self::ChaosMinus)
    }
}

impl fmt::Display for AttractorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::LimitCyclePlus => "limit_cycle_plus",
            Self::LimitCycleMinus => "limit_cycle_minus",
            Self::Torus => "torus",
            Self::ChaosPlus => "chaos_plus",
            Self::ChaosMinus => "chaos_minus",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorSpec {
    pub id: String,
    pub initial_condition: StateVec4,
    pub label: AttractorLabel,
}

/// A parameter regime together with the initial conditions that reach each of
/// its coexisting attractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub params: LiSprottParams,
    #[serde(default = "default_h")]
    pub h: f64,
    pub stride: usize,
    pub attractors: Vec<AttractorSpec>,
    pub training_attractor_id: String,
}

fn default_h() -> f64 {
    DEFAULT_H
}

impl ScenarioSpec {
    /// Symmetric limit cycles coexisting with a torus (a = 2, b = 0.8).
    ///
    /// The limit-cycle initial conditions are read as `(±5, ±1, 1, ±1)`.
    pub fn scenario_a() -> Self {
        Self {
            name: "A".into(),
            params: LiSprottParams { a: 2.0, b: 0.8, sigma: default_sigma() },
            h: DEFAULT_H,
            stride: 300,
            attractors: vec![
                AttractorSpec {
                    id: "lc_plus".into(),
                    initial_condition: StateVec4::new(5.0, 1.0, 1.0, 1.0),
                    label: AttractorLabel::LimitCyclePlus,
                },
                AttractorSpec {
                    id: "lc_minus".into(),
                    initial_condition: StateVec4::new(-5.0, -1.0, 1.0, -1.0),
                    label: AttractorLabel::LimitCycleMinus,
                },
                AttractorSpec {
                    id: "torus".into(),
                    initial_condition: StateVec4::new(4.0, 1.0, -1.0, 1.0),
                    label: AttractorLabel::Torus,
                },
            ],
            training_attractor_id: "lc_plus".into(),
        }
    }

    /// Symmetric chaotic attractors coexisting with a torus (a = 6, b = 0.1).
    pub fn scenario_b() -> Self {
        Self {
            name: "B".into(),
            params: LiSprottParams { a: 6.0, b: 0.1, sigma: default_sigma() },
            h: DEFAULT_H,
            stride: 200,
            attractors: vec![
                AttractorSpec {
                    id: "chaos_plus".into(),
                    initial_condition: StateVec4::new(0.0, -4.0, 0.0, 5.0),
                    label: AttractorLabel::ChaosPlus,
                },
                AttractorSpec {
                    id: "chaos_minus".into(),
                    initial_condition: StateVec4::new(0.0, 4.0, 0.0, -5.0),
                    label: AttractorLabel::ChaosMinus,
                },
                AttractorSpec {
                    id: "torus".into(),
                    initial_condition: StateVec4::new(1.0, -1.0, 1.0, -1.0),
                    label: AttractorLabel::Torus,
                },
            ],
            training_attractor_id: "chaos_plus".into(),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "A" | "a" => Ok(Self::scenario_a()),
            "B" | "b" => Ok(Self::scenario_b()),
            other => Err(Error::UnknownScenario(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.stride == 0 || !(self.h > 0.0) {
            return Err(Error::InvalidConfig("scenario needs stride >= 1 and h > 0".into()));
        }
        for (i, a) in self.attractors.iter().enumerate() {
            if self.attractors[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::InvalidConfig(format!("duplicate attractor id `{}`", a.id)));
            }
        }
        self.attractor(&self.training_attractor_id).map(|_| ())
    }

    pub fn attractor(&self, id: &str) -> Result<&AttractorSpec> {
        self.attractors
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| Error::UnknownAttractor(id.to_string()))
    }

    pub fn training_attractor(&self) -> Result<&AttractorSpec> {
        self.attractor(&self.training_attractor_id)
    }

    pub fn sample_interval(&self) -> f64 {
        self.h * self.stride as f64
    }
}

/// Noise-free ground truth for one attractor.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub attractor_id: String,
    /// The first [`TRANSIENT_LEN`] samples from the initial condition.
    pub transient: SampledTrajectory,
    /// [`REFERENCE_LEN`] samples starting after [`REFERENCE_DISCARD`] samples.
    pub stats_source: SampledTrajectory,
}

/// Noisy training series of exactly [`TRAINING_LEN`] points on the scenario's
/// training attractor, rejected with [`Error::BasinEscape`] if it hops basins.
pub fn make_training_series(spec: &ScenarioSpec, seed: u64) -> Result<SampledTrajectory> {
    spec.validate()?;
    let attractor = spec.training_attractor()?;
    let series = integrate_em(
        &spec.params,
        attractor.initial_condition,
        spec.h,
        TRAINING_LEN * spec.stride,
        spec.stride,
        seed,
    )?;
    let reference = make_reference(spec, &attractor.id)?;
    check_basin(attractor, &series, &reference.stats_source)?;
    Ok(series)
}

/// Automated stand-in for checking by eye that the noisy training run never
/// hops to a different attractor.
///
/// Chaotic training attractors are distinguished by the sign of `u`: every
/// consecutive 1,000-point window must average to the same sign as the
/// reference. Otherwise the run must keep `max |u|` within twice the
/// reference's.
pub fn check_basin(
    attractor: &AttractorSpec,
    series: &SampledTrajectory,
    reference: &SampledTrajectory,
) -> Result<()> {
    const WINDOW: usize = 1_000;
    let escape = |detail: String| Error::BasinEscape { attractor: attractor.id.clone(), detail };

    if attractor.label.is_chaotic() {
        let ref_mean = reference.points.iter().map(|p| p.u).sum::<f64>();
        for (w, chunk) in series.points.chunks(WINDOW).enumerate() {
            let mean = chunk.iter().map(|p| p.u).sum::<f64>();
            if mean.signum() != ref_mean.signum() {
                return Err(escape(format!("window {w} has mean u of the wrong sign")));
            }
        }
    } else {
        let max_u = |t: &SampledTrajectory| t.points.iter().fold(0.0_f64, |m, p| m.max(p.u.abs()));
        let (seen, bound) = (max_u(series), 2.0 * max_u(reference));
        if seen > bound {
            return Err(escape(format!("max |u| = {seen} exceeds {bound}")));
        }
    }
    Ok(())
}

/// Noise-free transient and statistics window for one attractor, from a
/// single run of `REFERENCE_DISCARD + REFERENCE_LEN` samples.
pub fn make_reference(spec: &ScenarioSpec, attractor_id: &str) -> Result<Reference> {
    let attractor = spec.attractor(attractor_id)?;
    let total = REFERENCE_DISCARD + REFERENCE_LEN;
    let run = integrate_em(
        &spec.params.noise_free(),
        attractor.initial_condition,
        spec.h,
        total * spec.stride,
        spec.stride,
        0,
    )?;
    Ok(Reference {
        attractor_id: attractor.id.clone(),
        transient: run.slice(0..TRANSIENT_LEN),
        stats_source: run.slice(REFERENCE_DISCARD..total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: LiSprottParams = LiSprottParams { a: 2.0, b: 0.8, sigma: 0.0 };

    #[test]
    fn drift_by_substitution() {
        assert_eq!(drift(StateVec4::ZERO, &A), StateVec4::new(0.0, 0.0, -2.0, 0.0));
        let zero_ab = LiSprottParams { a: 0.0, b: 0.0, sigma: 0.0 };
        assert_eq!(
            drift(StateVec4::new(1.0, 1.0, 1.0, 1.0), &zero_ab),
            StateVec4::new(0.0, 0.0, 1.0, 0.0)
        );
        let d = drift(StateVec4::new(4.0, 1.0, -1.0, 1.0), &A);
        assert_eq!(d, StateVec4::new(-3.0, 5.0, 2.0, -0.8));
    }

    #[test]
    fn single_euler_step() {
        let x0 = StateVec4::new(1.0, 1.0, 1.0, 1.0);
        let t = integrate_em(&A, x0, 1e-3, 1, 1, 99).unwrap();
        assert_eq!(t.points, vec![x0 + drift(x0, &A) * 1e-3]);
        assert_eq!(t.rng_seed, None);
    }

    #[test]
    fn noise_free_runs_ignore_seed() {
        let x0 = StateVec4::new(4.0, 1.0, -1.0, 1.0);
        let a = integrate_em(&A, x0, 1e-3, 3000, 300, 1).unwrap();
        let b = integrate_em(&A, x0, 1e-3, 3000, 300, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_runs_reproduce_per_seed() {
        let p = LiSprottParams { sigma: default_sigma(), ..A };
        let x0 = StateVec4::new(5.0, 1.0, 1.0, 1.0);
        let a = integrate_em(&p, x0, 1e-3, 3000, 300, 5).unwrap();
        let b = integrate_em(&p, x0, 1e-3, 3000, 300, 5).unwrap();
        let c = integrate_em(&p, x0, 1e-3, 3000, 300, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
        assert_eq!(a.rng_seed, Some(5));
    }

    #[test]
    fn rejects_bad_arguments() {
        let x0 = StateVec4::ZERO;
        assert!(matches!(integrate_em(&A, x0, 1e-3, 10, 3, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(integrate_em(&A, x0, 0.0, 10, 1, 0), Err(Error::InvalidConfig(_))));
        let bad = LiSprottParams { sigma: -1.0, ..A };
        assert!(integrate_em(&bad, x0, 1e-3, 10, 1, 0).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // A huge step makes the quadratic terms explode.
        let x0 = StateVec4::new(50.0, -50.0, 50.0, 50.0);
        let err = integrate_em(&A, x0, 1.0, 100, 1, 0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn scenario_registry_is_valid() {
        for s in [ScenarioSpec::scenario_a(), ScenarioSpec::scenario_b()] {
            s.validate().unwrap();
            assert_eq!(s.attractors.len(), 3);
        }
        assert!((ScenarioSpec::scenario_a().sample_interval() - 0.3).abs() < 1e-12);
        assert!((ScenarioSpec::scenario_b().sample_interval() - 0.2).abs() < 1e-12);
        assert!(ScenarioSpec::by_name("C").is_err());

        let mut dup = ScenarioSpec::scenario_a();
        dup.attractors[1].id = "lc_plus".into();
        assert!(dup.validate().is_err());
        let mut missing = ScenarioSpec::scenario_a();
        missing.training_attractor_id = "nope".into();
        assert!(missing.validate().is_err());
    }

    #[test]
    fn mirrored_is_an_involution() {
        let s = StateVec4::new(1.5, -2.0, 3.0, 0.25);
        assert_eq!(s.mirrored().mirrored(), s);
        assert_eq!(s.mirrored(), StateVec4::new(-1.5, 2.0, 3.0, -0.25));
    }
}
