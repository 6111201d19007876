//! Ridge-regressed affine transition model `s' ≈ W·[s; a] + b`.

use serde::{Deserialize, Serialize};

use super::{autoregress, check_dims, PredictError, Predictor, RolloutView};
use crate::dynamics::renormalize_quat;
use crate::episodes::Episode;
use crate::math::{solve_spd, Matrix};
use crate::tasks::TaskId;

pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub task: TaskId,
    pub state_dim: usize,
    pub action_dim: usize,
    pub quat_block: Option<usize>,
    pub lambda: f64,
    /// `state_dim` rows of `state_dim + action_dim` coefficients.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn apply(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, &b)| b + row.iter().zip(s.iter().chain(a)).map(|(w, x)| w * x).sum::<f64>())
            .collect();
        if let Some(q) = self.quat_block {
            renormalize_quat(&mut out, q);
        }
        out
    }
}

pub(crate) fn check_training_set(train: &[Episode]) -> Result<(TaskId, usize, usize, Option<usize>), PredictError> {
    let first = train.first().ok_or(PredictError::NoData)?;
    let key = (first.task.task, first.state_dim(), first.task.action_dim, first.state_layout.quat_block);
    for e in train {
        if (e.task.task, e.state_dim(), e.task.action_dim) != (key.0, key.1, key.2) {
            return Err(PredictError::Shape(format!("training set mixes {} and {}", key.0, e.task.task)));
        }
    }
    if train.iter().all(|e| e.actions.is_empty()) {
        return Err(PredictError::NoData);
    }
    Ok(key)
}

/// Least squares on mean-centred data, so the ridge term shrinks only the
/// coefficients and never the intercept.
pub fn fit_linear(train: &[Episode], lambda: f64) -> Result<LinearModel, PredictError> {
    let (task, d, a, quat_block) = check_training_set(train)?;
    let p = d + a;
    let transitions = || {
        train.iter().flat_map(|e| {
            (0..e.actions.len()).map(move |t| (e.states[t].iter().chain(&e.actions[t]), &e.states[t + 1]))
        })
    };
    let mut n = 0.0;
    let mut x_mean = vec![0.0; p];
    let mut y_mean = vec![0.0; d];
    for (x, y) in transitions() {
        n += 1.0;
        x_mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
        y_mean.iter_mut().zip(y).for_each(|(m, v)| *m += v);
    }
    x_mean.iter_mut().for_each(|m| *m /= n);
    y_mean.iter_mut().for_each(|m| *m /= n);

    let mut gram = Matrix::<f64>::zeros(p, p);
    let mut cross = Matrix::<f64>::zeros(p, d);
    let mut xc = vec![0.0; p];
    for (x, y) in transitions() {
        xc.iter_mut().zip(x.zip(&x_mean)).for_each(|(c, (v, m))| *c = v - m);
        for i in 0..p {
            for j in 0..p {
                gram[(i, j)] += xc[i] * xc[j];
            }
            for k in 0..d {
                cross[(i, k)] += xc[i] * (y[k] - y_mean[k]);
            }
        }
    }
    for i in 0..p {
        gram[(i, i)] += lambda;
    }
    let coef = solve_spd(&gram, &cross)?;
    let weights: Vec<Vec<f64>> = (0..d).map(|k| (0..p).map(|i| coef[(i, k)]).collect()).collect();
    let bias = (0..d).map(|k| y_mean[k] - (0..p).map(|i| weights[k][i] * x_mean[i]).sum::<f64>()).collect();
    Ok(LinearModel { task, state_dim: d, action_dim: a, quat_block, lambda, weights, bias })
}

impl Predictor for LinearModel {
    fn name(&self) -> &str {
        "linear"
    }

    fn rollout(&self, view: &RolloutView<'_>, steps: usize) -> Result<Vec<Vec<f64>>, PredictError> {
        check_dims(view, self.state_dim, self.action_dim)?;
        autoregress(view, steps, |s, a| Ok(self.apply(s, a)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodes::generate;
    use crate::predictors::predict;
    use crate::tasks::{default_spec, ParamRange};

    #[test]
    fn single_repeated_transition_is_reproduced() {
        let spec = default_spec(TaskId::InclinedPlane);
        let mut e = generate(&spec, 1, 0).unwrap().episodes.remove(0).1;
        e.states.truncate(2);
        e.actions.truncate(1);
        let m = fit_linear(&[e.clone(), e.clone()], DEFAULT_RIDGE).unwrap();
        let next = m.apply(&e.states[0], &e.actions[0]);
        assert_eq!(next, e.states[1]);
    }

    #[test]
    fn huge_ridge_collapses_to_mean() {
        let g = generate(&default_spec(TaskId::Pendulum), 5, 1).unwrap();
        let eps: Vec<_> = g.episodes.into_iter().map(|(_, e)| e).collect();
        let m = fit_linear(&eps, 1e20).unwrap();
        assert!(m.weights.iter().flatten().all(|w| w.abs() < 1e-12));
        let n: f64 = eps.iter().map(|e| e.actions.len() as f64).sum();
        let mean: f64 = eps.iter().flat_map(|e| e.states[1..].iter().map(|s| s[0])).sum::<f64>() / n;
        assert!((m.bias[0] - mean).abs() < 1e-9);
    }

    #[test]
    fn linear_dynamics_are_learned() {
        let mut spec = default_spec(TaskId::InclinedPlane);
        spec.param_ranges.insert("incline".into(), ParamRange::fixed(0.5));
        spec.param_ranges.insert("friction".into(), ParamRange::fixed(0.1));
        let g = generate(&spec, 20, 2).unwrap();
        let eps: Vec<_> = g.episodes.into_iter().map(|(_, e)| e).collect();
        let m = fit_linear(&eps, DEFAULT_RIDGE).unwrap();
        let r = predict(&m, &eps[0], 10).unwrap();
        let mse: f64 = r.states.iter().zip(&eps[0].states[10..]).flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).powi(2))).sum::<f64>() / 180.0;
        assert!(mse < 1e-6, "{mse}");
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(matches!(fit_linear(&[], DEFAULT_RIDGE), Err(PredictError::NoData)));
    }
}
