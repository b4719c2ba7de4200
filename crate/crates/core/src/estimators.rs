//! Trajectory-level return and advantage estimation.
//!
//! Everything here is a pure function over per-step arrays. The value
//! array convention is `values.len() == rewards.len() + 1`: the final slot
//! is the bootstrap value of the state after the last transition, and it
//! is treated as 0 when the episode terminated.

use thiserror::Error;

/// Discount and decay parameters shared by GAE and the lambda-return.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaeConfig {
    pub gamma: f64,
    pub lambda: f64,
}

impl GaeConfig {
    pub fn new(gamma: f64, lambda: f64) -> Self {
        assert!((0.0..=1.0).contains(&gamma), "gamma out of [0, 1]");
        assert!((0.0..=1.0).contains(&lambda), "lambda out of [0, 1]");
        Self { gamma, lambda }
    }
}

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("values has length {values}, expected rewards length {rewards} + 1")]
    LengthMismatch { rewards: usize, values: usize },
}

/// Discounted returns by backward recursion: `G_t = r_{t+1} + gamma G_{t+1}`
/// with `G_T = 0`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// One-step TD errors `d_t = r_{t+1} + gamma V(s_{t+1}) - V(s_t)`.
///
/// `values` must hold one more entry than `rewards`; the final entry is the
/// bootstrap value, forced to 0 when `terminal`.
pub fn td_errors(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    terminal: bool,
) -> Result<Vec<f64>, EstimatorError> {
    if values.len() != rewards.len() + 1 {
        return Err(EstimatorError::LengthMismatch {
            rewards: rewards.len(),
            values: values.len(),
        });
    }
    let t_max = rewards.len();
    Ok((0..t_max)
        .map(|t| {
            let next = if t + 1 == t_max && terminal {
                0.0
            } else {
                values[t + 1]
            };
            rewards[t] + gamma * next - values[t]
        })
        .collect())
}

/// The n-step advantage
/// `r_{t+1} + ... + gamma^{n-1} r_{t+n} + gamma^n V(s_{t+n}) - V(s_t)`,
/// with `t + n` clipped at the episode end (the bootstrap slot).
pub fn n_step_advantage(rewards: &[f64], values: &[f64], gamma: f64, n: usize, t: usize) -> f64 {
    assert!(n >= 1, "n must be at least 1");
    assert_eq!(values.len(), rewards.len() + 1, "values length mismatch");
    assert!(t < rewards.len(), "t out of range");
    let horizon = n.min(rewards.len() - t);
    let mut acc = 0.0;
    let mut scale = 1.0;
    for l in 0..horizon {
        acc += scale * rewards[t + l];
        scale *= gamma;
    }
    acc + scale * values[t + horizon] - values[t]
}

/// GAE by backward recursion `A_t = d_t + gamma lambda A_{t+1}`, `A_T = 0`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    cfg: &GaeConfig,
    terminal: bool,
) -> Result<Vec<f64>, EstimatorError> {
    let deltas = td_errors(rewards, values, cfg.gamma, terminal)?;
    let mut out = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        acc = deltas[t] + cfg.gamma * cfg.lambda * acc;
        out[t] = acc;
    }
    Ok(out)
}

/// Per-step lambda-returns, computed as `GAE_t + V(s_t)`.
pub fn lambda_return(
    rewards: &[f64],
    values: &[f64],
    cfg: &GaeConfig,
    terminal: bool,
) -> Result<Vec<f64>, EstimatorError> {
    let adv = gae(rewards, values, cfg, terminal)?;
    Ok(adv.iter().zip(values).map(|(a, v)| a + v).collect())
}

/// Final-reward adjustment at a time limit: a truncated episode bootstraps
/// `r + gamma V`, a terminated one keeps `r` unchanged.
pub fn timeout_bootstrap(
    last_reward: f64,
    bootstrap_value: f64,
    gamma: f64,
    truncated: bool,
) -> f64 {
    if truncated {
        last_reward + gamma * bootstrap_value
    } else {
        last_reward
    }
}

/// `(A - mean(A)) / (std(A) + eps)` with the population standard deviation.
pub fn normalize_advantages(adv: &[f64], eps: f64) -> Vec<f64> {
    assert!(!adv.is_empty(), "cannot normalize an empty advantage list");
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + eps;
    adv.iter().map(|a| (a - mean) / denom).collect()
}

/// How the running variance folds in a new batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarianceRule {
    /// Exponential moving average with the `(1 - rate)(mu_hat - mu)^2`
    /// cross term; keeps the estimate a genuine second moment.
    CrossTerm,
    /// `var += rate * (var_hat - var + mu_hat - mu * mu_hat)`, which mixes
    /// first and second moments. Kept selectable for comparison; clamped
    /// at zero.
    MeanMix,
}

/// Dynamic per-component mean and variance of observation vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningMoments {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub rate: f64,
    pub eps: f64,
    pub rule: VarianceRule,
}

impl RunningMoments {
    pub fn new(dim: usize, rate: f64, eps: f64) -> Self {
        assert!(rate > 0.0 && rate <= 1.0, "rate out of (0, 1]");
        assert!(eps > 0.0, "eps must be positive");
        Self {
            mean: vec![0.0; dim],
            var: vec![0.0; dim],
            rate,
            eps,
            rule: VarianceRule::CrossTerm,
        }
    }

    pub fn with_rule(mut self, rule: VarianceRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Folds one batch of observation vectors into the moving moments.
    pub fn update(&mut self, batch: &[Vec<f64>]) {
        assert!(
            !batch.is_empty(),
            "cannot update moments from an empty batch"
        );
        let dim = self.dim();
        let n = batch.len() as f64;
        for row in batch {
            assert_eq!(row.len(), dim, "observation dimension mismatch");
        }

        for k in 0..dim {
            let batch_mean = batch.iter().map(|row| row[k]).sum::<f64>() / n;
            let batch_var = batch
                .iter()
                .map(|row| (row[k] - batch_mean).powi(2))
                .sum::<f64>()
                / n;
            let delta = batch_mean - self.mean[k];
            let a = self.rate;
            self.var[k] = match self.rule {
                VarianceRule::CrossTerm => {
                    self.var[k] + a * (batch_var - self.var[k] + (1.0 - a) * delta * delta)
                }
                VarianceRule::MeanMix => {
                    self.var[k]
                        + a * (batch_var - self.var[k] + batch_mean - self.mean[k] * batch_mean)
                }
            }
            .max(0.0);
            self.mean[k] += a * delta;
        }
    }

    /// Componentwise `(s - mean) / (sqrt(var) + eps)`.
    pub fn normalize(&self, s: &[f64]) -> Vec<f64> {
        assert_eq!(s.len(), self.dim(), "observation dimension mismatch");
        s.iter()
            .enumerate()
            .map(|(k, x)| (x - self.mean[k]) / (self.var[k].sqrt() + self.eps))
            .collect()
    }
}
