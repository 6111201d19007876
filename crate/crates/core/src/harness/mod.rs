//! Evaluation protocol: rollout MSE, per-horizon error curves, normalised
//! ratio tables, and their on-disk reports.

mod report;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episodes::{Episode, EpisodeError, PredictionRecord};
use crate::predictors::{PredictError, Predictor, RolloutView};
use crate::tasks::TaskId;

pub use report::{read_report, write_curves, write_radar, write_report, write_table};

pub const DEFAULT_ROLLOUT_STEPS: usize = 90;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no prediction for episode {0}")]
    Join(String),
    #[error("reference `{reference}` has zero MSE on {task}")]
    ZeroReference { reference: String, task: TaskId },
    #[error("report has no cell for predictor `{predictor}` on {task}")]
    MissingCell { predictor: String, task: TaskId },
    #[error("episode {episode}: {source}")]
    Predict { episode: String, source: PredictError },
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Results for one (predictor, task) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub predictor: String,
    pub task: TaskId,
    pub episodes: usize,
    pub mse: f64,
    /// `curve[h − 1] = e[h]`, the mean squared error `h` steps into the rollout.
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition_steps: usize,
    pub rollout_steps: usize,
    pub cells: Vec<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar: Option<RadarTable>,
}

impl EvalReport {
    pub fn new(condition_steps: usize, rollout_steps: usize) -> Self {
        Self { condition_steps, rollout_steps, cells: Vec::new(), radar: None }
    }

    pub fn cell(&self, predictor: &str, task: TaskId) -> Option<&Cell> {
        self.cells.iter().find(|c| c.predictor == predictor && c.task == task)
    }

    /// Appends the cells of another report over the same protocol.
    pub fn merge(&mut self, other: EvalReport) -> Result<(), HarnessError> {
        if (other.condition_steps, other.rollout_steps) != (self.condition_steps, self.rollout_steps) {
            return Err(HarnessError::Shape("reports use different condition/rollout steps".into()));
        }
        self.cells.extend(other.cells);
        Ok(())
    }

    pub fn tasks(&self) -> Vec<TaskId> {
        self.cells.iter().map(|c| c.task).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Predictors in first-seen order.
    pub fn predictors(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.predictor) {
                out.push(c.predictor.clone());
            }
        }
        out
    }
}

/// Per-step squared error of one episode, each averaged over the scored
/// dimensions; `None` where no scored dimension is visible.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeScore {
    pub steps: Vec<Option<f64>>,
}

impl EpisodeScore {
    pub fn mse(&self) -> Option<f64> {
        let valid: Vec<f64> = self.steps.iter().flatten().copied().collect();
        (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64)
    }
}

/// Scores imagined states against `states[c..c + rollout]`. A dimension
/// carrying a visibility mask counts only where the ground truth marks it
/// visible; unscored dimensions never count.
pub fn score_episode(e: &Episode, condition_steps: usize, rollout: usize, predicted: &[Vec<f64>]) -> Result<EpisodeScore, HarnessError> {
    if condition_steps == 0 || e.states.len() < condition_steps + rollout {
        return Err(HarnessError::Shape(format!(
            "episode {} has {} states, protocol needs {}",
            e.episode_id,
            e.states.len(),
            condition_steps + rollout
        )));
    }
    if predicted.len() < rollout {
        return Err(HarnessError::Shape(format!("{} predicted states for a {rollout}-step rollout", predicted.len())));
    }
    let dims = &e.state_layout.dims;
    let mut steps = Vec::with_capacity(rollout);
    for (k, p) in predicted[..rollout].iter().enumerate() {
        let truth = &e.states[condition_steps + k];
        if p.len() != truth.len() {
            return Err(HarnessError::Shape(format!("predicted state has {} values, episode has {}", p.len(), truth.len())));
        }
        let (mut sum, mut n) = (0.0, 0usize);
        for (i, d) in dims.iter().enumerate() {
            let visible = d.mask.map_or(true, |m| truth[m] > 0.5);
            if d.scored && visible {
                let r = p[i] - truth[i];
                sum += r * r;
                n += 1;
            }
        }
        steps.push((n > 0).then(|| sum / n as f64));
    }
    Ok(EpisodeScore { steps })
}

/// Reduces scores (already in canonical order) into one cell.
fn reduce(predictor: &str, task: TaskId, rollout: usize, scores: &[EpisodeScore]) -> Cell {
    let mut curve = vec![0.0; rollout];
    let mut counts = vec![0usize; rollout];
    let (mut total, mut n) = (0.0, 0usize);
    for s in scores {
        for (h, v) in s.steps.iter().enumerate() {
            if let Some(v) = v {
                curve[h] += v;
                counts[h] += 1;
            }
        }
        if let Some(m) = s.mse() {
            total += m;
            n += 1;
        }
    }
    for (c, &k) in curve.iter_mut().zip(&counts) {
        if k > 0 {
            *c /= k as f64;
        }
    }
    Cell { predictor: predictor.to_string(), task, episodes: scores.len(), mse: if n > 0 { total / n as f64 } else { 0.0 }, curve }
}

/// Groups episodes by task and orders each group by episode id, so the
/// reduction is independent of input order and scheduling.
fn canonical_groups(eval: &[Episode]) -> BTreeMap<TaskId, Vec<&Episode>> {
    let mut groups: BTreeMap<TaskId, Vec<&Episode>> = BTreeMap::new();
    for e in eval {
        groups.entry(e.task.task).or_default().push(e);
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    }
    groups
}

/// Rolls `p` out on every episode and scores it: squared error averaged over
/// dimensions, then rollout steps, then episodes.
pub fn evaluate(p: &dyn Predictor, eval: &[Episode], condition_steps: usize, rollout: usize) -> Result<EvalReport, HarnessError> {
    let mut report = EvalReport::new(condition_steps, rollout);
    for (task, episodes) in canonical_groups(eval) {
        let scores = episodes
            .par_iter()
            .map(|e| {
                let wrap = |source| HarnessError::Predict { episode: e.episode_id.clone(), source };
                let view = RolloutView::new(e, condition_steps).map_err(wrap)?;
                let states = p.rollout(&view, rollout).map_err(wrap)?;
                score_episode(e, condition_steps, rollout, &states)
            })
            .collect::<Result<Vec<_>, _>>()?;
        report.cells.push(reduce(p.name(), task, rollout, &scores));
    }
    Ok(report)
}

/// Scores externally produced predictions with the same arithmetic as
/// [`evaluate`]. Records join to episodes by `episode_id`.
pub fn score_external(records: &[PredictionRecord], eval: &[Episode], rollout: usize) -> Result<EvalReport, HarnessError> {
    let first = records.first().ok_or_else(|| HarnessError::Shape("no prediction records".into()))?;
    let condition_steps = first.condition_steps;
    let predictor = first.predictor.clone();
    let mut by_id: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    for r in records {
        if r.condition_steps != condition_steps || r.predictor != predictor {
            return Err(HarnessError::Shape(format!(
                "record for {} has predictor `{}` / condition_steps {}, expected `{predictor}` / {condition_steps}",
                r.episode_id, r.predictor, r.condition_steps
            )));
        }
        by_id.insert(&r.episode_id, r);
    }
    let ids: BTreeSet<&str> = eval.iter().map(|e| e.episode_id.as_str()).collect();
    if let Some(orphan) = by_id.keys().find(|k| !ids.contains(*k)) {
        return Err(HarnessError::Join(format!("{orphan} (prediction has no matching episode)")));
    }
    let mut report = EvalReport::new(condition_steps, rollout);
    for (task, episodes) in canonical_groups(eval) {
        let scores = episodes
            .par_iter()
            .map(|e| {
                let r = by_id.get(e.episode_id.as_str()).ok_or_else(|| HarnessError::Join(e.episode_id.clone()))?;
                score_episode(e, condition_steps, rollout, &r.states)
            })
            .collect::<Result<Vec<_>, _>>()?;
        report.cells.push(reduce(&predictor, task, rollout, &scores));
    }
    Ok(report)
}

/// `(h, e[h])` pairs of one cell.
pub fn horizon_curve(cell: &Cell) -> Vec<(usize, f64)> {
    cell.curve.iter().enumerate().map(|(i, &e)| (i + 1, e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarTable {
    pub reference: String,
    pub tasks: Vec<TaskId>,
    pub predictors: Vec<String>,
    /// `ratios[t][p] = MSE / MSE_reference`.
    pub ratios: Vec<Vec<f64>>,
    /// Ratios divided by their per-task maximum.
    pub normalized: Vec<Vec<f64>>,
}

pub fn radar_ratios(report: &EvalReport, reference: &str) -> Result<RadarTable, HarnessError> {
    let tasks = report.tasks();
    let predictors = report.predictors();
    let mut ratios = Vec::with_capacity(tasks.len());
    let mut normalized = Vec::with_capacity(tasks.len());
    for &task in &tasks {
        let mse = |p: &str| {
            report.cell(p, task).map(|c| c.mse).ok_or_else(|| HarnessError::MissingCell { predictor: p.to_string(), task })
        };
        let reference_mse = mse(reference)?;
        if !(reference_mse > 0.0) {
            return Err(HarnessError::ZeroReference { reference: reference.to_string(), task });
        }
        let row: Vec<f64> = predictors.iter().map(|p| mse(p).map(|m| m / reference_mse)).collect::<Result<_, _>>()?;
        let max = row.iter().copied().fold(0.0, f64::max);
        normalized.push(row.iter().map(|r| r / max).collect());
        ratios.push(row);
    }
    Ok(RadarTable { reference: reference.to_string(), tasks, predictors, ratios, normalized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodes::generate;
    use crate::predictors::{predict, Oracle, ZeroOrderHold};
    use crate::tasks::default_spec;

    fn set(task: TaskId, n: usize) -> Vec<Episode> {
        generate(&default_spec(task), n, 21).unwrap().episodes.into_iter().map(|(_, e)| e).collect()
    }

    fn fake(mses: &[(&str, f64)]) -> EvalReport {
        let mut r = EvalReport::new(10, 90);
        for (p, m) in mses {
            r.cells.push(Cell { predictor: p.to_string(), task: TaskId::Pendulum, episodes: 1, mse: *m, curve: vec![] });
        }
        r
    }

    #[test]
    fn oracle_scores_zero() {
        let eval = set(TaskId::ElasticCollision, 4);
        let r = evaluate(&Oracle, &eval, 10, 90).unwrap();
        assert_eq!(r.cells[0].mse, 0.0);
        assert!(r.cells[0].curve.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn order_does_not_matter() {
        let mut eval = set(TaskId::Circular, 6);
        let a = evaluate(&ZeroOrderHold, &eval, 10, 90).unwrap();
        eval.reverse();
        assert_eq!(a, evaluate(&ZeroOrderHold, &eval, 10, 90).unwrap());
    }

    #[test]
    fn radar_arithmetic() {
        let t = radar_ratios(&fake(&[("a", 2.0), ("b", 4.0), ("c", 8.0)]), "a").unwrap();
        assert_eq!(t.ratios[0], vec![1.0, 2.0, 4.0]);
        assert_eq!(t.normalized[0], vec![0.25, 0.5, 1.0]);
        let solo = radar_ratios(&fake(&[("a", 3.0)]), "a").unwrap();
        assert_eq!(solo.ratios[0], vec![1.0]);
        assert!(matches!(radar_ratios(&fake(&[("oracle", 0.0), ("b", 1.0)]), "oracle"), Err(HarnessError::ZeroReference { .. })));
        assert!(matches!(radar_ratios(&fake(&[("b", 1.0)]), "linear"), Err(HarnessError::MissingCell { .. })));
    }

    #[test]
    fn external_scores_match_direct_evaluation() {
        let eval = set(TaskId::Reprojection, 3);
        let records: Vec<_> = eval.iter().map(|e| predict(&ZeroOrderHold, e, 10).unwrap()).collect();
        assert_eq!(score_external(&records, &eval, 90).unwrap(), evaluate(&ZeroOrderHold, &eval, 10, 90).unwrap());
        let err = score_external(&records[1..], &eval, 90).unwrap_err();
        assert!(matches!(err, HarnessError::Join(ref id) if id == &eval[0].episode_id));
    }

    #[test]
    fn foreign_prediction_is_a_join_error() {
        let eval = set(TaskId::Pendulum, 2);
        let other = set(TaskId::Rolling, 1);
        let records = vec![predict(&ZeroOrderHold, &other[0], 10).unwrap()];
        assert!(matches!(score_external(&records, &eval, 90), Err(HarnessError::Join(_))));
    }

    #[test]
    fn short_prediction_is_a_shape_error() {
        let eval = set(TaskId::Pendulum, 1);
        assert!(matches!(score_episode(&eval[0], 10, 90, &vec![vec![0.0, 0.0]; 5]), Err(HarnessError::Shape(_))));
        assert!(matches!(score_episode(&eval[0], 10, 90, &vec![vec![0.0; 3]; 90]), Err(HarnessError::Shape(_))));
    }
}
