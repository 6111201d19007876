//! World-model baselines behind one imagination contract: see the first
//! `condition_steps` states and every recorded action, emit the rest.

mod linear;
mod mlp;
mod neural;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::episodes::{Episode, PredictionRecord};
use crate::math::{MatrixError, Quat, Vec3};
use crate::tasks::{self, DimKind, StateLayout, TaskError, TaskParams, TaskSpec};

pub use linear::{fit_linear, LinearModel, DEFAULT_RIDGE};
pub use mlp::{adam_step, gradient_check, AdamState, Mlp};
pub use neural::{fit_neural_derivative, NeuralConfig, NeuralModel, Normalizer};

pub const DEFAULT_CONDITION_STEPS: usize = 10;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("non-finite prediction at imagined step {step}")]
    NonFinite { step: usize },
    #[error("non-finite gradient in epoch {epoch}, batch {batch} (loss {loss})")]
    NonFiniteGradient { epoch: usize, batch: usize, loss: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no training transitions")]
    NoData,
    #[error("model file {path}: {reason}")]
    ModelFile { path: String, reason: String },
    #[error("unknown predictor `{0}` (oracle, zoh, constvel, or a model file)")]
    Unknown(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// What a predictor may see of an episode: the conditioning states and the
/// full recorded action sequence. Later states are not reachable from here.
#[derive(Debug, Clone, Copy)]
pub struct RolloutView<'a> {
    task: &'a TaskSpec,
    params: &'a TaskParams,
    layout: &'a StateLayout,
    context: &'a [Vec<f64>],
    actions: &'a [Vec<f64>],
}

impl<'a> RolloutView<'a> {
    pub fn new(e: &'a Episode, condition_steps: usize) -> Result<Self, PredictError> {
        if condition_steps == 0 {
            return Err(PredictError::Shape("condition_steps must be at least 1".into()));
        }
        if e.states.len() < condition_steps + 1 {
            return Err(PredictError::Shape(format!(
                "episode has {} states, needs at least {}",
                e.states.len(),
                condition_steps + 1
            )));
        }
        Ok(Self {
            task: &e.task,
            params: &e.params,
            layout: &e.state_layout,
            context: &e.states[..condition_steps],
            actions: &e.actions,
        })
    }

    pub fn task(&self) -> &TaskSpec {
        self.task
    }

    /// Ground-truth physical parameters; only the oracle should need these.
    pub fn params(&self) -> &TaskParams {
        self.params
    }

    pub fn layout(&self) -> &StateLayout {
        self.layout
    }

    pub fn dt(&self) -> f64 {
        self.task.dt
    }

    pub fn condition_steps(&self) -> usize {
        self.context.len()
    }

    pub fn context(&self) -> &[Vec<f64>] {
        self.context
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        self.actions
    }

    pub fn last_state(&self) -> &[f64] {
        self.context.last().expect("at least one conditioning state")
    }

    /// Imagined steps available: one per remaining recorded action.
    pub fn available_steps(&self) -> usize {
        self.actions.len() + 1 - self.context.len()
    }
}

pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;

    /// Imagines `steps` states after the conditioning window.
    fn rollout(&self, view: &RolloutView<'_>, steps: usize) -> Result<Vec<Vec<f64>>, PredictError>;
}

/// Feeds each imagined state back in with the next recorded action.
pub fn autoregress<F>(view: &RolloutView<'_>, steps: usize, mut f: F) -> Result<Vec<Vec<f64>>, PredictError>
where
    F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>, PredictError>,
{
    if steps > view.available_steps() {
        return Err(PredictError::Shape(format!("{steps} steps requested, {} actions left", view.available_steps())));
    }
    let c = view.condition_steps();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(steps);
    for k in 0..steps {
        let prev = out.last().map_or(view.last_state(), Vec::as_slice);
        let next = f(prev, &view.actions()[c - 1 + k]).map_err(|e| match e {
            PredictError::Dynamics(DynamicsError::NonFinite { .. }) => PredictError::NonFinite { step: k + 1 },
            other => other,
        })?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(PredictError::NonFinite { step: k + 1 });
        }
        out.push(next);
    }
    Ok(out)
}

/// Runs `p` on `e` and packages the imagined states (`T − condition_steps`
/// rows, aligned with `states[condition_steps..T]`).
pub fn predict(p: &dyn Predictor, e: &Episode, condition_steps: usize) -> Result<PredictionRecord, PredictError> {
    let view = RolloutView::new(e, condition_steps)?;
    let steps = e.actions.len() - condition_steps;
    let states = p.rollout(&view, steps)?;
    if states.len() != steps || states.iter().any(|s| s.len() != e.state_dim()) {
        return Err(PredictError::Shape(format!("{} returned a malformed rollout", p.name())));
    }
    Ok(PredictionRecord::new(e.episode_id.clone(), p.name().to_string(), condition_steps, states))
}

/// Re-simulates with the true transition function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oracle;

impl Predictor for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn rollout(&self, view: &RolloutView<'_>, steps: usize) -> Result<Vec<Vec<f64>>, PredictError> {
        autoregress(view, steps, |s, a| Ok(tasks::step(view.task(), view.params(), s, a)?))
    }
}

/// Repeats the last conditioning state.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroOrderHold;

impl Predictor for ZeroOrderHold {
    fn name(&self) -> &str {
        "zoh"
    }

    fn rollout(&self, view: &RolloutView<'_>, steps: usize) -> Result<Vec<Vec<f64>>, PredictError> {
        autoregress(view, steps, |s, _| Ok(s.to_vec()))
    }
}

/// Holds every rate and advances the quantities they drive: positions and
/// angles by their paired velocity, quaternion blocks by a constant body
/// angular velocity. Everything else is held.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl Predictor for ConstantVelocity {
    fn name(&self) -> &str {
        "constvel"
    }

    fn rollout(&self, view: &RolloutView<'_>, steps: usize) -> Result<Vec<Vec<f64>>, PredictError> {
        let layout = view.layout();
        let dt = view.dt();
        let omega = layout.quat_block.and_then(|q| {
            let w = q + 4;
            let ok = layout.dims.get(w..w + 3)?.iter().all(|d| d.kind == DimKind::AngularVelocity);
            ok.then_some(w)
        });
        autoregress(view, steps, |s, _| {
            let mut next = s.to_vec();
            for (i, d) in layout.dims.iter().enumerate() {
                if let Some(r) = d.rate {
                    next[i] = s[i] + s[r] * dt;
                }
            }
            if let (Some(q), Some(w)) = (layout.quat_block, omega) {
                let turn = Quat::from_rotation_vector(Vec3::from_slice(&s[w..w + 3]).scale(dt));
                let rotated = (Quat::from_slice(&s[q..q + 4]) * turn).normalized();
                next[q..q + 4].copy_from_slice(&rotated.to_array());
            }
            Ok(next)
        })
    }
}

/// Built-in predictor by name.
pub fn builtin(name: &str) -> Option<Box<dyn Predictor>> {
    match name {
        "oracle" => Some(Box::new(Oracle)),
        "zoh" => Some(Box::new(ZeroOrderHold)),
        "constvel" => Some(Box::new(ConstantVelocity)),
        _ => None,
    }
}

/// A fitted model as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearModel),
    Neural(NeuralModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: FittedModel,
}

impl FittedModel {
    pub fn into_predictor(self) -> Box<dyn Predictor> {
        match self {
            FittedModel::Linear(m) => Box::new(m),
            FittedModel::Neural(m) => Box::new(m),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictError> {
        let file = ModelFile { format_version: MODEL_FORMAT_VERSION, model: self.clone() };
        let mut bytes = serde_json::to_vec_pretty(&file).expect("serializable model");
        bytes.push(b'\n');
        fs::write(path, bytes)
            .map_err(|e| PredictError::ModelFile { path: path.display().to_string(), reason: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, PredictError> {
        let err = |reason: String| PredictError::ModelFile { path: path.display().to_string(), reason };
        let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
        let file: ModelFile = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(err(format!("format_version {} (expected {MODEL_FORMAT_VERSION})", file.format_version)));
        }
        Ok(file.model)
    }
}

/// Resolves a built-in name or a model file path.
pub fn resolve(spec: &str) -> Result<Box<dyn Predictor>, PredictError> {
    if let Some(p) = builtin(spec) {
        return Ok(p);
    }
    let path = Path::new(spec);
    if path.exists() {
        return Ok(FittedModel::load(path)?.into_predictor());
    }
    Err(PredictError::Unknown(spec.to_string()))
}

pub(crate) fn check_dims(view: &RolloutView<'_>, state_dim: usize, action_dim: usize) -> Result<(), PredictError> {
    let (d, a) = (view.layout().len(), view.task().action_dim);
    if (d, a) != (state_dim, action_dim) {
        return Err(PredictError::Shape(format!(
            "model expects state/action dims {state_dim}/{action_dim}, episode has {d}/{a}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodes::generate_episode;
    use crate::tasks::{default_spec, TaskId};

    #[test]
    fn oracle_is_exact_on_every_task() {
        for t in TaskId::ALL {
            let e = generate_episode(&default_spec(t), 17).unwrap();
            let r = predict(&Oracle, &e, 10).unwrap();
            assert_eq!(r.states.len(), 90);
            assert_eq!(r.states, e.states[10..100].to_vec(), "{t}");
        }
    }

    #[test]
    fn zoh_repeats_last_context_state() {
        let e = generate_episode(&default_spec(TaskId::Projectile), 3).unwrap();
        let r = predict(&ZeroOrderHold, &e, 10).unwrap();
        assert!(r.states.iter().all(|s| s == &e.states[9]));
    }

    #[test]
    fn constvel_free_fall_error_is_half_g_h_dt_squared() {
        let spec = default_spec(TaskId::FreeFall);
        // Tall drop so no bounce occurs inside the window.
        let mut ranges = std::collections::BTreeMap::new();
        ranges.insert("height".to_string(), tasks::ParamRange(30.0, 31.0));
        let e = generate_episode(&spec.with_ranges(&ranges).unwrap(), 1).unwrap();
        let r = predict(&ConstantVelocity, &e, 10).unwrap();
        for (k, s) in r.states.iter().enumerate() {
            let h = (k + 1) as f64 * spec.dt;
            let err = s[2] - e.states[10 + k][2];
            assert!((err - 0.5 * 9.81 * h * h).abs() < 1e-9, "h={h}: {err}");
        }
    }

    #[test]
    fn constvel_tracks_free_rotation() {
        let e = generate_episode(&default_spec(TaskId::Rotation), 4).unwrap();
        let r = predict(&ConstantVelocity, &e, 10).unwrap();
        let err = r.states.iter().zip(&e.states[10..]).flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn view_hides_future_states() {
        let e = generate_episode(&default_spec(TaskId::Pendulum), 2).unwrap();
        let v = RolloutView::new(&e, 10).unwrap();
        assert_eq!(v.context().len(), 10);
        assert_eq!(v.available_steps(), 91);
        assert!(RolloutView::new(&e, 0).is_err());
        assert!(RolloutView::new(&e, 101).is_err());
    }

    #[test]
    fn unknown_predictor_is_reported() {
        assert!(matches!(resolve("dreamer"), Err(PredictError::Unknown(_))));
    }
}
