//! Seeded episode generation, datasets with train/eval range splits, and the
//! on-disk interchange format shared with external predictors.

mod format;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{self, Intrinsics, DEFAULT_KEYPOINTS};
use crate::math::{child_seed, Rng};
use crate::tasks::{self, ActionDim, ParamRange, StateLayout, TaskError, TaskId, TaskParams, TaskSpec};

pub use format::{
    probe_version, read_dataset, read_episode, read_prediction, read_predictions, write_dataset, write_episode,
    write_prediction, PredictionRecord, MANIFEST_FILE,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0} already exists (pass --overwrite to replace it)")]
    AlreadyExists(PathBuf),
    #[error("train and eval splits share {0} episode seed(s)")]
    OverlappingSeeds(usize),
    #[error(transparent)]
    Task(#[from] TaskError),
}

impl EpisodeError {
    pub(crate) fn format(path: impl AsRef<Path>, reason: impl Into<String>) -> Self {
        Self::Format { path: path.as_ref().display().to_string(), reason: reason.into() }
    }
}

/// Task-specific extras. Reprojection episodes carry their intrinsics and
/// keypoint count so raw pixels are recoverable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<Intrinsics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub format_version: u32,
    pub episode_id: String,
    pub task: TaskSpec,
    pub dt: f64,
    pub seed: u64,
    pub params: TaskParams,
    pub state_layout: StateLayout,
    pub action_layout: Vec<ActionDim>,
    /// `T + 1` rows of `D` values.
    pub states: Vec<Vec<f64>>,
    /// `T` rows of `A` values.
    pub actions: Vec<Vec<f64>>,
    #[serde(default)]
    pub metadata: EpisodeMetadata,
}

/// Content address of an episode: SHA-256 over the task id, the seed and the
/// exact bit patterns of the sampled parameters in name order.
pub fn episode_id(task: TaskId, seed: u64, params: &TaskParams) -> String {
    let mut h = Sha256::new();
    h.update(format!("{}\n{}\n", task.as_str(), seed));
    for (k, v) in params.iter() {
        h.update(format!("{k}={:016x}\n", v.to_bits()));
    }
    hex::encode(h.finalize())
}

impl Episode {
    pub fn task_id(&self) -> TaskId {
        self.task.task
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_layout.len()
    }

    /// Checks shapes, finiteness and the content address.
    pub fn validate(&self) -> Result<(), String> {
        if self.format_version != FORMAT_VERSION {
            return Err(format!("format_version {} (expected {FORMAT_VERSION})", self.format_version));
        }
        self.task.validate().map_err(|e| e.to_string())?;
        if self.dt != self.task.dt {
            return Err(format!("dt {} disagrees with task dt {}", self.dt, self.task.dt));
        }
        let d = self.state_layout.len();
        let expected = tasks::state_layout(self.task.task);
        if self.state_layout != expected {
            return Err(format!("state_layout does not match the {} catalog entry", self.task.task));
        }
        if self.action_layout.len() != self.task.action_dim {
            return Err(format!("action_layout has {} entries, action_dim is {}", self.action_layout.len(), self.task.action_dim));
        }
        if self.states.is_empty() {
            return Err("episode has no states".into());
        }
        if self.actions.len() + 1 != self.states.len() {
            return Err(format!("{} states need {} actions, found {}", self.states.len(), self.states.len() - 1, self.actions.len()));
        }
        for (t, row) in self.states.iter().enumerate() {
            if row.len() != d {
                return Err(format!("state {t} has {} values, layout has {d}", row.len()));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(format!("state {t} has a non-finite value"));
            }
        }
        for (t, row) in self.actions.iter().enumerate() {
            if row.len() != self.task.action_dim {
                return Err(format!("action {t} has {} values, action_dim is {}", row.len(), self.task.action_dim));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(format!("action {t} has a non-finite value"));
            }
        }
        let id = episode_id(self.task.task, self.seed, &self.params);
        if id != self.episode_id {
            return Err(format!("digest mismatch: episode_id {} but content hashes to {id}", self.episode_id));
        }
        Ok(())
    }

    /// Re-simulates every stored transition; returns the first step whose
    /// recorded next state differs in any bit.
    pub fn verify_transitions(&self) -> Result<(), (usize, String)> {
        for t in 0..self.actions.len() {
            let next = tasks::step(&self.task, &self.params, &self.states[t], &self.actions[t])
                .map_err(|e| (t, e.to_string()))?;
            if next != self.states[t + 1] {
                return Err((t, "re-simulated state differs".into()));
            }
        }
        Ok(())
    }
}

/// Generates the episode with the given seed.
pub fn generate_episode(spec: &TaskSpec, seed: u64) -> Result<Episode, TaskError> {
    let mut rng = Rng::new(seed);
    let (params, s0) = tasks::sample_init(spec, &mut rng)?;
    let mut states = Vec::with_capacity(spec.horizon + 1);
    let mut actions = Vec::with_capacity(spec.horizon);
    states.push(s0);
    let mut prev = vec![0.0; spec.action_dim];
    for _ in 0..spec.horizon {
        let a = match spec.task {
            TaskId::Reprojection => geometry::smoothed_action(&prev, &mut rng)?,
            _ => (0..spec.action_dim).map(|_| rng.uniform(-1.0, 1.0)).collect::<Result<Vec<_>, _>>()?,
        };
        let next = tasks::step(spec, &params, states.last().expect("non-empty"), &a)?;
        states.push(next);
        prev.clone_from(&a);
        actions.push(a);
    }
    let metadata = match spec.task {
        TaskId::Reprojection => EpisodeMetadata {
            intrinsics: Some(Intrinsics::from_params(&params)?),
            keypoints: Some(DEFAULT_KEYPOINTS),
        },
        _ => EpisodeMetadata::default(),
    };
    Ok(Episode {
        format_version: FORMAT_VERSION,
        episode_id: episode_id(spec.task, seed, &params),
        task: spec.clone(),
        dt: spec.dt,
        seed,
        params,
        state_layout: tasks::state_layout(spec.task),
        action_layout: tasks::action_layout(spec.task),
        states,
        actions,
        metadata,
    })
}

/// A failed episode, reported without aborting the rest of the batch.
#[derive(Debug)]
pub struct GenerationFailure {
    pub index: usize,
    pub seed: u64,
    pub error: TaskError,
}

#[derive(Debug, Default)]
pub struct Generated {
    /// `(index, episode)` in index order.
    pub episodes: Vec<(usize, Episode)>,
    pub failures: Vec<GenerationFailure>,
}

/// Generates `count` episodes; episode `i` uses `child_seed(base_seed, i)`.
/// Runs on the current rayon pool; the result does not depend on it.
pub fn generate(spec: &TaskSpec, count: usize, base_seed: u64) -> Result<Generated, TaskError> {
    spec.validate()?;
    let results: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = child_seed(base_seed, i as u64);
            (i, seed, generate_episode(spec, seed))
        })
        .collect();
    let mut out = Generated::default();
    for (index, seed, r) in results {
        match r {
            Ok(e) => out.episodes.push((index, e)),
            Err(error) => out.failures.push(GenerationFailure { index, seed, error }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            _ => Err(format!("unknown split `{s}` (train|eval)")),
        }
    }
}

/// What to generate for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPlan {
    pub spec: TaskSpec,
    pub count: usize,
    pub base_seed: u64,
    pub split: Split,
}

impl DatasetPlan {
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count as u64).map(|i| child_seed(self.base_seed, i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    pub episode_id: String,
    pub file: String,
    /// SHA-256 of the file bytes.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub task_id: TaskId,
    pub dt: f64,
    pub horizon: usize,
    pub count: usize,
    pub split: Split,
    pub param_ranges: BTreeMap<String, ParamRange>,
    pub base_seed: u64,
    pub episodes: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<ManifestFailure>,
    /// Resolved configuration of the invocation that wrote the dataset.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub invocation: BTreeMap<String, String>,
}

/// Builds train and eval plans over possibly different parameter ranges.
/// The two splits must not share any episode seed.
pub fn split_ood(
    spec: &TaskSpec,
    train_ranges: &BTreeMap<String, ParamRange>,
    eval_ranges: &BTreeMap<String, ParamRange>,
    train: (usize, u64),
    eval: (usize, u64),
) -> Result<(DatasetPlan, DatasetPlan), EpisodeError> {
    let train = DatasetPlan { spec: spec.with_ranges(train_ranges)?, count: train.0, base_seed: train.1, split: Split::Train };
    let eval = DatasetPlan { spec: spec.with_ranges(eval_ranges)?, count: eval.0, base_seed: eval.1, split: Split::Eval };
    let train_seeds: BTreeSet<u64> = train.seeds().collect();
    let shared = eval.seeds().filter(|s| train_seeds.contains(s)).count();
    if shared > 0 {
        return Err(EpisodeError::OverlappingSeeds(shared));
    }
    Ok((train, eval))
}

/// Sha-256 hex digest of raw bytes.
pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
