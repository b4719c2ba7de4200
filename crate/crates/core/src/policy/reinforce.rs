//! Monte-Carlo policy gradient: score-function updates weighted by the
//! whole-trajectory return, the reward-to-go, or the reward-to-go minus a
//! learned state-value baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::approx::{self, GradVector, MlpSpec};
use crate::estimators;
use crate::mdp::MdpModel;

use super::{
    collect_batch, rollout_stream_base, BatchGoal, IterationMetrics, Network, RolloutBatch,
    UpdateError, STREAM_INIT,
};

/// Which per-step weight multiplies the score function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReinforceWeight {
    /// The whole trajectory's discounted return on every step.
    TotalReturn,
    /// Discounted rewards from the step onward.
    RewardToGo,
    /// Reward-to-go minus the collected value estimate.
    Baseline,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReinforceConfig {
    pub gamma: f64,
    pub lr: f64,
    pub variant: ReinforceWeight,
    pub batch_episodes: usize,
    pub max_episode_len: usize,
    /// Step size for the baseline critic regression (Baseline variant).
    pub critic_lr: f64,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 0.01,
            variant: ReinforceWeight::RewardToGo,
            batch_episodes: 64,
            max_episode_len: 200,
            critic_lr: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReinforceDiagnostics {
    /// `-(1/|D|) sum_tau sum_t log pi * W_t`, the minimized view.
    pub policy_loss: f64,
    pub grad_norm: f64,
    pub mean_weight: f64,
}

/// Per-step weights for the configured variant. Truncated episodes fold
/// the bootstrap value into the final reward first.
fn step_weights(batch: &RolloutBatch, gamma: f64, variant: ReinforceWeight) -> Vec<f64> {
    let mut weights = vec![0.0; batch.len()];
    for ep in &batch.episodes {
        let span = ep.start..ep.start + ep.len;
        let mut rewards = batch.rewards[span.clone()].to_vec();
        let last = rewards.len() - 1;
        rewards[last] =
            estimators::timeout_bootstrap(rewards[last], ep.bootstrap_value, gamma, !ep.terminated);
        let to_go = estimators::discounted_returns(&rewards, gamma);
        for t in 0..ep.len {
            weights[ep.start + t] = match variant {
                ReinforceWeight::TotalReturn => to_go[0],
                ReinforceWeight::RewardToGo => to_go[t],
                ReinforceWeight::Baseline => to_go[t] - batch.old_values[ep.start + t],
            };
        }
    }
    weights
}

/// One ascent step of the Monte-Carlo policy gradient
/// `(1/|D|) sum_tau sum_t grad log pi(a_t|s_t) W_t`.
pub fn reinforce_update(
    batch: &RolloutBatch,
    actor: &Network,
    cfg: &ReinforceConfig,
) -> Result<(Network, ReinforceDiagnostics), UpdateError> {
    assert!(!batch.is_empty(), "empty batch");
    let weights = step_weights(batch, cfg.gamma, cfg.variant);
    let scale = 1.0 / batch.n_episodes() as f64;

    let mut grad = GradVector::zeros(actor.params.len());
    let mut surrogate = 0.0;
    for (i, &weight) in weights.iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let (log_prob, lp_grad) = approx::logprob_and_grad(
            &actor.spec,
            &actor.params,
            &batch.features[i],
            batch.actions[i],
        );
        grad.add_scaled(&lp_grad, weight * scale);
        surrogate += log_prob * weight * scale;
    }

    if !grad.is_finite() {
        return Err(UpdateError::NonFinite {
            what: "policy gradient",
        });
    }

    let diagnostics = ReinforceDiagnostics {
        policy_loss: -surrogate,
        grad_norm: grad.norm(),
        mean_weight: weights.iter().sum::<f64>() / weights.len() as f64,
    };
    let next = Network::new(
        actor.spec.clone(),
        approx::sgd_step(&actor.params, &grad, cfg.lr, true),
    );
    Ok((next, diagnostics))
}

/// Batch-episode training loop around [`reinforce_update`]. The Baseline
/// variant carries a critic fitted to the discounted returns by mean
/// squared error after every actor step.
pub fn reinforce_train(
    model: &MdpModel,
    cfg: &ReinforceConfig,
    actor_spec: &MlpSpec,
    iterations: usize,
    seed: u64,
    threads: usize,
) -> Result<(Network, Option<Network>, Vec<IterationMetrics>), UpdateError> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(STREAM_INIT);
    let mut actor = Network::init(actor_spec.clone(), &mut init_rng);
    let mut critic = matches!(cfg.variant, ReinforceWeight::Baseline).then(|| {
        Network::init(
            MlpSpec::new(actor_spec.input_dim, actor_spec.hidden_dims.clone(), 1),
            &mut init_rng,
        )
    });

    let mut history = Vec::with_capacity(iterations);
    let mut total_episodes = 0usize;

    for iteration in 0..iterations {
        let batch = collect_batch(
            model,
            &actor,
            critic.as_ref(),
            None,
            BatchGoal::Episodes(cfg.batch_episodes),
            cfg.max_episode_len,
            seed,
            rollout_stream_base(iteration),
            threads,
        );
        total_episodes += batch.n_episodes();

        let (next_actor, diag) = reinforce_update(&batch, &actor, cfg)?;
        actor = next_actor;

        // Regress the baseline toward the observed discounted returns.
        let mut value_loss = 0.0;
        if let Some(c) = critic.as_mut() {
            let mut targets = vec![0.0; batch.len()];
            for ep in &batch.episodes {
                let span = ep.start..ep.start + ep.len;
                let mut rewards = batch.rewards[span].to_vec();
                let last = rewards.len() - 1;
                rewards[last] = estimators::timeout_bootstrap(
                    rewards[last],
                    ep.bootstrap_value,
                    cfg.gamma,
                    !ep.terminated,
                );
                for (t, g) in estimators::discounted_returns(&rewards, cfg.gamma)
                    .into_iter()
                    .enumerate()
                {
                    targets[ep.start + t] = g;
                }
            }
            let n = batch.len() as f64;
            let mut grad = GradVector::zeros(c.params.len());
            for (features, target) in batch.features.iter().zip(&targets) {
                let v = c.value(features);
                value_loss += (v - target).powi(2) / n;
                let g = approx::backward(&c.spec, &c.params, features, &[2.0 * (v - target) / n]);
                grad.add_scaled(&g, 1.0);
            }
            if !grad.is_finite() {
                return Err(UpdateError::NonFinite {
                    what: "baseline gradient",
                });
            }
            c.params = approx::sgd_step(&c.params, &grad, cfg.critic_lr, false);
        }

        history.push(IterationMetrics {
            iteration,
            episodes: total_episodes,
            mean_return: batch.mean_return(),
            success_rate: batch.success_rate(),
            policy_loss: diag.policy_loss,
            value_loss,
            entropy: 0.0,
            approx_kl: 0.0,
            clip_fraction: 0.0,
            lr: cfg.lr,
            grad_norm: diag.grad_norm,
        });
    }

    Ok((actor, critic, history))
}
