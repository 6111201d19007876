//! Learned-derivative model: an MLP approximates `ds/dt` from `(s, a)` and the
//! rollout integrates it with RK4.

use serde::{Deserialize, Serialize};

use super::linear::check_training_set;
use super::mlp::{adam_step, AdamState, Mlp};
use super::{autoregress, check_dims, PredictError, Predictor, RolloutView};
use crate::dynamics::rk4_step;
use crate::episodes::Episode;
use crate::math::Rng;
use crate::tasks::TaskId;

/// Per-dimension affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(n: usize) -> Self {
        Self { mean: vec![0.0; n], std: vec![1.0; n] }
    }

    /// Statistics over the rows; (near-)constant columns keep unit scale.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, n: usize) -> Self {
        let mut mean = vec![0.0; n];
        let mut count = 0.0;
        for r in rows.clone() {
            count += 1.0;
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n];
        for r in rows {
            var.iter_mut().zip(r.iter().zip(&mean)).for_each(|(v, (x, m))| *v += (x - m) * (x - m));
        }
        let std = var.iter().map(|v| (v / count).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((z, m), s)| z * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 64], epochs: 50, batch: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub task: TaskId,
    pub dt: f64,
    pub state_dim: usize,
    pub action_dim: usize,
    pub quat_block: Option<usize>,
    pub input_norm: Normalizer,
    pub target_norm: Normalizer,
    pub mlp: Mlp<f64>,
    /// Mean training loss of every epoch, in normalised units.
    pub epoch_losses: Vec<f64>,
}

impl NeuralModel {
    /// An untrained model with zero weights and identity normalisation; its
    /// derivative is zero everywhere.
    pub fn zeros(task: TaskId, dt: f64, state_dim: usize, action_dim: usize, quat_block: Option<usize>, hidden: &[usize]) -> Self {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        Self {
            task,
            dt,
            state_dim,
            action_dim,
            quat_block,
            input_norm: Normalizer::identity(state_dim + action_dim),
            target_norm: Normalizer::identity(state_dim),
            mlp: Mlp::zeros(&sizes),
            epoch_losses: Vec::new(),
        }
    }

    pub fn derivative(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = s.iter().chain(a).copied().collect();
        self.target_norm.denormalize(&self.mlp.forward(&self.input_norm.normalize(&x)))
    }
}

/// Trains on finite-difference derivative targets `(s[t+1] − s[t]) / dt`.
pub fn fit_neural_derivative(train: &[Episode], cfg: &NeuralConfig) -> Result<NeuralModel, PredictError> {
    let (task, d, a, quat_block) = check_training_set(train)?;
    if cfg.batch == 0 {
        return Err(PredictError::Shape("batch size must be positive".into()));
    }
    let p = d + a;
    let dt = train[0].dt;
    let mut inputs: Vec<f64> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for e in train {
        for t in 0..e.actions.len() {
            inputs.extend(e.states[t].iter().chain(&e.actions[t]));
            targets.extend(e.states[t + 1].iter().zip(&e.states[t]).map(|(n, c)| (n - c) / e.dt));
        }
    }
    let n = inputs.len() / p;
    let input_norm = Normalizer::fit(inputs.chunks(p), p);
    let target_norm = Normalizer::fit(targets.chunks(d), d);
    let xs: Vec<f64> = inputs.chunks(p).flat_map(|r| input_norm.normalize(r)).collect();
    let ys: Vec<f64> = targets.chunks(d).flat_map(|r| target_norm.normalize(r)).collect();

    let mut rng = Rng::new(cfg.seed);
    let mut sizes = vec![p];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(d);
    let mut mlp = Mlp::<f64>::random(&sizes, &mut rng);
    let mut opt = AdamState::new(mlp.params().len());
    let mut grad = vec![0.0; mlp.params().len()];
    let mut bx = Vec::with_capacity(cfg.batch * p);
    let mut by = Vec::with_capacity(cfg.batch * d);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = rng.permutation(n);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(&xs[i * p..(i + 1) * p]);
                by.extend_from_slice(&ys[i * d..(i + 1) * d]);
            }
            let loss = mlp.loss_and_grad(&bx, &by, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PredictError::NonFiniteGradient { epoch, batch: b, loss });
            }
            total += loss * chunk.len() as f64;
            adam_step(&mut opt, mlp.params_mut(), &grad);
        }
        epoch_losses.push(total / n as f64);
    }
    Ok(NeuralModel { task, dt, state_dim: d, action_dim: a, quat_block, input_norm, target_norm, mlp, epoch_losses })
}

impl Predictor for NeuralModel {
    fn name(&self) -> &str {
        "neural"
    }

    fn rollout(&self, view: &RolloutView<'_>, steps: usize) -> Result<Vec<Vec<f64>>, PredictError> {
        check_dims(view, self.state_dim, self.action_dim)?;
        autoregress(view, steps, |s, a| {
            let f = |x: &[f64], out: &mut [f64]| out.copy_from_slice(&self.derivative(x, a));
            Ok(rk4_step(&f, s, view.dt(), self.quat_block)?)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episodes::generate;
    use crate::predictors::{predict, ZeroOrderHold};
    use crate::tasks::default_spec;

    #[test]
    fn zero_model_rolls_out_as_zoh() {
        for t in [TaskId::Pendulum, TaskId::Circular] {
            let e = generate(&default_spec(t), 1, 3).unwrap().episodes.remove(0).1;
            let m = NeuralModel::zeros(t, e.dt, e.state_dim(), e.task.action_dim, None, &[64, 64]);
            assert_eq!(predict(&m, &e, 10).unwrap().states, predict(&ZeroOrderHold, &e, 10).unwrap().states);
        }
    }

    #[test]
    fn normalizer_round_trip() {
        let rows = [vec![1.0, 5.0, 3.0], vec![2.0, 5.0, -7.5], vec![0.25, 5.0, 1e3]];
        let n = Normalizer::fit(rows.iter().map(Vec::as_slice), 3);
        assert_eq!(n.std[1], 1.0);
        for r in &rows {
            let back = n.denormalize(&n.normalize(r));
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let g = generate(&default_spec(TaskId::Pendulum), 4, 8).unwrap();
        let eps: Vec<_> = g.episodes.into_iter().map(|(_, e)| e).collect();
        let cfg = NeuralConfig { epochs: 3, batch: 64, seed: 11, ..Default::default() };
        let a = fit_neural_derivative(&eps, &cfg).unwrap();
        let b = fit_neural_derivative(&eps, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.epoch_losses.iter().all(|l| l.is_finite()));
    }
}
