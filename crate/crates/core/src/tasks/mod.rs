//! The ten physics environments plus the keypoint-reprojection task, as
//! deterministic transition systems with parameterised initial conditions.
//!
//! Every transition is a pure function of `(spec, params, state, action)`.
//! Physical parameters and initial-condition parameters share one named range
//! map; [`sample_init`] draws them in sorted-name order and then builds the
//! initial state, drawing any extra state components (reprojection keypoints)
//! afterwards.

mod catalog;
mod collisions;
mod kinematics;
mod rigid;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{step_with_events, DynamicsError, EventSpec, StepOutcome};
use crate::geometry::{self, GeometryError};
use crate::math::{Rng, RngError};

pub use catalog::{action_layout, default_spec, state_layout};
pub use collisions::{bouncing_ball_events, box_motion, elastic_pair, elastic_collision_events, BoxParams, DiscPair};
pub use kinematics::{
    circular_internal, circular_observe, free_fall_events, free_fall_derivative, pendulum_energy,
};
pub use rigid::{spin_constants, spin_energy, spin_kinetic_energy, spin_tilt, SpinConstants, SETTLE_OMEGA, TILT_MAX};

/// Maximum number of whole redraws when a sampled configuration is rejected.
pub const MAX_SAMPLE_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Range(#[from] RngError),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
    #[error("state has {got} components, layout expects {expected}")]
    StateShape { expected: usize, got: usize },
    #[error("action has {got} components, task expects {expected}")]
    ActionShape { expected: usize, got: usize },
    #[error("action component {index} = {value} is outside [-1, 1]")]
    ActionOutOfRange { index: usize, value: f64 },
    #[error("no admissible configuration after {MAX_SAMPLE_ATTEMPTS} draws: {0}")]
    SamplingFailed(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    FreeFall,
    Projectile,
    BouncingBall,
    ElasticCollision,
    Circular,
    InclinedPlane,
    Pendulum,
    Rolling,
    Rotation,
    Spin,
    Reprojection,
}

impl TaskId {
    pub const ALL: [TaskId; 11] = [
        TaskId::FreeFall,
        TaskId::Projectile,
        TaskId::BouncingBall,
        TaskId::ElasticCollision,
        TaskId::Circular,
        TaskId::InclinedPlane,
        TaskId::Pendulum,
        TaskId::Rolling,
        TaskId::Rotation,
        TaskId::Spin,
        TaskId::Reprojection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::FreeFall => "free_fall",
            TaskId::Projectile => "projectile",
            TaskId::BouncingBall => "bouncing_ball",
            TaskId::ElasticCollision => "elastic_collision",
            TaskId::Circular => "circular",
            TaskId::InclinedPlane => "inclined_plane",
            TaskId::Pendulum => "pendulum",
            TaskId::Rolling => "rolling",
            TaskId::Rotation => "rotation",
            TaskId::Spin => "spin",
            TaskId::Reprojection => "reprojection",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| TaskError::UnknownTask(s.to_string()))
    }
}

/// Closed interval `[lo, hi]`, serialised as a two-element list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange(pub f64, pub f64);

impl ParamRange {
    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    pub fn fixed(v: f64) -> Self {
        Self(v, v)
    }

    pub fn is_valid(&self) -> bool {
        self.0.is_finite() && self.1.is_finite() && self.0 <= self.1
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.0 == self.1 && v == self.0) || (self.0 <= v && v < self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimKind {
    Position,
    Velocity,
    Angle,
    AngularVelocity,
    Quaternion,
    /// Normalised pixel coordinate in [-1, 1].
    Pixel,
    /// 0/1 flag.
    Visibility,
    /// Fixed world coordinate carried in the state for full observability.
    World,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub name: String,
    pub unit: String,
    pub kind: DimKind,
    /// Index of the dimension holding this one's time derivative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<usize>,
    /// Index of the visibility flag that gates scoring of this dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<usize>,
    /// Whether the harness includes this dimension in squared-error scores.
    pub scored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateLayout {
    pub dims: Vec<DimSpec>,
    /// Offset of a four-component unit quaternion block, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quat_block: Option<usize>,
}

impl StateLayout {
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDim {
    pub name: String,
    pub unit: String,
    /// Physical magnitude of a unit action.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskId,
    pub dt: f64,
    /// Number of transitions per episode.
    pub horizon: usize,
    /// Fixed RK4 substeps per observation step.
    pub substeps: usize,
    pub param_ranges: BTreeMap<String, ParamRange>,
    pub action_dim: usize,
    pub action_scale: Vec<f64>,
}

impl TaskSpec {
    pub fn new(task: TaskId) -> Self {
        default_spec(task)
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: String| Err(TaskError::InvalidSpec(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.substeps < 1 {
            return bad("substeps must be at least 1".into());
        }
        let expected = action_layout(self.task).len();
        if self.action_dim != expected {
            return bad(format!("{} has action_dim {expected}, spec says {}", self.task, self.action_dim));
        }
        if self.action_scale.len() != self.action_dim {
            return bad("action_scale length differs from action_dim".into());
        }
        let defaults = default_spec(self.task).param_ranges;
        for (name, r) in &self.param_ranges {
            if !r.is_valid() {
                return bad(format!("range for `{name}` is [{}, {}]", r.0, r.1));
            }
            if !defaults.contains_key(name) {
                return bad(format!("{} has no parameter `{name}`", self.task));
            }
        }
        for name in defaults.keys() {
            if !self.param_ranges.contains_key(name) {
                return bad(format!("missing range for `{name}`"));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> StateLayout {
        state_layout(self.task)
    }

    /// Returns a copy with the named ranges replaced.
    pub fn with_ranges(&self, overrides: &BTreeMap<String, ParamRange>) -> Result<Self, TaskError> {
        let mut s = self.clone();
        for (k, r) in overrides {
            if !s.param_ranges.contains_key(k) {
                return Err(TaskError::InvalidSpec(format!("{} has no parameter `{k}`", self.task)));
            }
            s.param_ranges.insert(k.clone(), *r);
        }
        s.validate()?;
        Ok(s)
    }
}

/// Sampled parameter values, keyed by name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskParams(pub BTreeMap<String, f64>);

impl TaskParams {
    pub fn get(&self, name: &str) -> Result<f64, TaskError> {
        self.0.get(name).copied().ok_or_else(|| TaskError::MissingParam(name.to_string()))
    }

    pub fn set(&mut self, name: &str, v: f64) {
        self.0.insert(name.to_string(), v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }
}

/// Draws parameters and the initial state.
pub fn sample_init(spec: &TaskSpec, rng: &mut Rng) -> Result<(TaskParams, Vec<f64>), TaskError> {
    spec.validate()?;
    let mut last_reason = String::new();
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let mut params = TaskParams::default();
        for (name, r) in &spec.param_ranges {
            params.set(name, rng.uniform(r.lo(), r.hi())?);
        }
        match initial_state(spec.task, &params, rng)? {
            Ok(state) => return Ok((params, state)),
            Err(reason) => last_reason = reason,
        }
    }
    Err(TaskError::SamplingFailed(last_reason))
}

/// Builds the initial state from sampled parameters. The inner `Err` is a
/// rejection that triggers a redraw.
fn initial_state(task: TaskId, p: &TaskParams, rng: &mut Rng) -> Result<Result<Vec<f64>, String>, TaskError> {
    Ok(match task {
        TaskId::FreeFall => Ok(vec![0.0, 0.0, p.get("height")?, 0.0, 0.0, 0.0]),
        TaskId::Projectile => Ok(vec![0.0, 0.0, p.get("height")?, p.get("speed")?, 0.0, 0.0]),
        TaskId::BouncingBall => Ok(collisions::bouncing_ball_init(p)?),
        TaskId::ElasticCollision => collisions::elastic_collision_init(p)?,
        TaskId::Circular => Ok(kinematics::circular_init(p)?),
        TaskId::InclinedPlane => kinematics::inclined_init(p)?,
        TaskId::Pendulum => Ok(vec![p.get("amplitude")?, 0.0]),
        TaskId::Rolling => Ok(kinematics::rolling_init(p)?),
        TaskId::Rotation => Ok(rigid::rotation_init(p)?),
        TaskId::Spin => Ok(rigid::spin_init(p)?),
        TaskId::Reprojection => Ok(geometry::reprojection_init(p, rng)?),
    })
}

/// Advances one observation step.
pub fn step(spec: &TaskSpec, params: &TaskParams, state: &[f64], action: &[f64]) -> Result<Vec<f64>, TaskError> {
    let d = state_layout(spec.task).len();
    if state.len() != d {
        return Err(TaskError::StateShape { expected: d, got: state.len() });
    }
    if action.len() != spec.action_dim {
        return Err(TaskError::ActionShape { expected: spec.action_dim, got: action.len() });
    }
    if let Some((index, &value)) = action.iter().enumerate().find(|(_, a)| !(a.abs() <= 1.0)) {
        return Err(TaskError::ActionOutOfRange { index, value });
    }
    match spec.task {
        TaskId::FreeFall | TaskId::Projectile => kinematics::step_free_fall(spec, params, state),
        TaskId::BouncingBall => collisions::step_bouncing_ball(spec, params, state),
        TaskId::ElasticCollision => collisions::step_elastic_collision(spec, params, state),
        TaskId::Circular => kinematics::step_circular(spec, params, state, action),
        TaskId::InclinedPlane => kinematics::step_inclined(spec, params, state),
        TaskId::Pendulum => kinematics::step_pendulum(spec, params, state),
        TaskId::Rolling => kinematics::step_rolling(spec, params, state),
        TaskId::Rotation => rigid::step_rotation(spec, params, state),
        TaskId::Spin => rigid::step_spin(spec, params, state),
        TaskId::Reprojection => Ok(geometry::step_reprojection_state(params, state, action)?),
    }
}

/// Runs `substeps` event-aware RK4 steps covering one observation step,
/// collecting every event hit (times are relative to each substep).
pub(crate) fn integrate<F>(
    spec: &TaskSpec,
    deriv: &F,
    events: &[EventSpec<'_, f64>],
    state: &[f64],
    quat_block: Option<usize>,
) -> Result<StepOutcome<f64>, TaskError>
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let h = spec.dt / spec.substeps as f64;
    let mut out = StepOutcome { state: state.to_vec(), events: Vec::new() };
    for _ in 0..spec.substeps {
        let next = step_with_events(deriv, events, &out.state, h, quat_block)?;
        out.state = next.state;
        out.events.extend(next.events);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_spec_is_valid() {
        for t in TaskId::ALL {
            let s = default_spec(t);
            s.validate().unwrap();
            assert_eq!(s.task, t);
            assert_eq!(t.as_str().parse::<TaskId>().unwrap(), t);
        }
    }

    #[test]
    fn degenerate_ranges_ignore_the_seed() {
        let mut spec = default_spec(TaskId::Pendulum);
        for r in spec.param_ranges.values_mut() {
            *r = ParamRange::fixed(r.lo());
        }
        let a = sample_init(&spec, &mut Rng::new(1)).unwrap();
        let b = sample_init(&spec, &mut Rng::new(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn same_seed_same_init() {
        for t in TaskId::ALL {
            let spec = default_spec(t);
            let a = sample_init(&spec, &mut Rng::new(42)).unwrap();
            let b = sample_init(&spec, &mut Rng::new(42)).unwrap();
            assert_eq!(a, b, "{t}");
            assert_eq!(a.1.len(), spec.layout().len());
        }
    }

    #[test]
    fn free_fall_height_stays_in_range() {
        let spec = default_spec(TaskId::FreeFall);
        let mut rng = Rng::new(3);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..10_000 {
            let (p, _) = sample_init(&spec, &mut rng).unwrap();
            let h = p.get("height").unwrap();
            lo = lo.min(h);
            hi = hi.max(h);
        }
        assert!(lo >= 0.5 && hi < 2.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = default_spec(TaskId::FreeFall);
        s.dt = 0.0;
        assert!(s.validate().is_err());
        let mut s = default_spec(TaskId::Circular);
        s.action_dim = 0;
        assert!(s.validate().is_err());
        let mut s = default_spec(TaskId::FreeFall);
        s.param_ranges.insert("height".into(), ParamRange(2.0, 1.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn action_checks() {
        let spec = default_spec(TaskId::Circular);
        let (p, s) = sample_init(&spec, &mut Rng::new(0)).unwrap();
        assert!(matches!(step(&spec, &p, &s, &[1.5]), Err(TaskError::ActionOutOfRange { .. })));
        assert!(matches!(step(&spec, &p, &s, &[]), Err(TaskError::ActionShape { .. })));
    }

    #[test]
    fn impossible_incline_fails_to_sample() {
        let spec = default_spec(TaskId::InclinedPlane);
        let mut o = BTreeMap::new();
        o.insert("friction".to_string(), ParamRange::fixed(2.0));
        let spec = spec.with_ranges(&o).unwrap();
        assert!(matches!(sample_init(&spec, &mut Rng::new(0)), Err(TaskError::SamplingFailed(_))));
    }
}
