//! One-step actor-critic: the actor ascends the score function weighted by
//! TD errors while the critic regresses onto TD targets built from its own
//! frozen estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::approx::{self, GradVector, MlpSpec};
use crate::mdp::MdpModel;

use super::{
    clip_gradient, collect_batch, rollout_stream_base, BatchGoal, CriticTarget, IterationMetrics,
    Network, RolloutBatch, UpdateError, STREAM_INIT,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ActorCriticConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Critic regression passes per batch, against fixed targets.
    pub critic_epochs: usize,
    /// Rollout size in steps.
    pub batch_size: usize,
    pub max_episode_len: usize,
    /// Joint gradient-norm cap; `None` leaves gradients unclipped.
    pub grad_norm_cap: Option<f64>,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 0.02,
            critic_lr: 0.1,
            critic_epochs: 5,
            batch_size: 512,
            max_episode_len: 200,
            grad_norm_cap: Some(5.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ActorCriticDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub actor_grad_norm: f64,
}

/// One actor-critic update on a collected batch.
///
/// The actor takes an ascent step on
/// `(1/|D|) sum_tau sum_t grad log pi(a_t|s_t) delta_t` where `delta_t` is
/// the 1-step TD advantage from the collected (old) value estimates; the
/// critic descends the mean squared error against TD targets built from
/// the same frozen estimates.
pub fn actor_critic_update(
    batch: &RolloutBatch,
    actor: &Network,
    critic: &Network,
    cfg: &ActorCriticConfig,
) -> Result<(Network, Network, ActorCriticDiagnostics), UpdateError> {
    assert!(!batch.is_empty(), "empty batch");
    // GAE with lambda = 0 is exactly the 1-step TD error sequence, and the
    // TD critic target comes from the same pass.
    let mut prepared = batch.clone();
    prepared.compute_targets(cfg.gamma, 0.0, CriticTarget::TdTarget);

    let scale = 1.0 / prepared.n_episodes() as f64;
    let mut actor_grad = GradVector::zeros(actor.params.len());
    let mut surrogate = 0.0;
    for i in 0..prepared.len() {
        let delta = prepared.advantages[i];
        if delta == 0.0 {
            continue;
        }
        let (log_prob, lp_grad) = approx::logprob_and_grad(
            &actor.spec,
            &actor.params,
            &prepared.features[i],
            prepared.actions[i],
        );
        actor_grad.add_scaled(&lp_grad, delta * scale);
        surrogate += log_prob * delta * scale;
    }
    if !actor_grad.is_finite() {
        return Err(UpdateError::NonFinite {
            what: "actor gradient",
        });
    }
    if let Some(cap) = cfg.grad_norm_cap {
        actor_grad = clip_gradient(&actor_grad, cap);
    }
    let next_actor = Network::new(
        actor.spec.clone(),
        approx::sgd_step(&actor.params, &actor_grad, cfg.actor_lr, true),
    );

    // Critic regression against the fixed TD targets.
    let mut next_critic = critic.clone();
    let n = prepared.len() as f64;
    let mut value_loss = 0.0;
    for epoch in 0..cfg.critic_epochs.max(1) {
        let mut grad = GradVector::zeros(next_critic.params.len());
        let mut loss = 0.0;
        for i in 0..prepared.len() {
            let v = next_critic.value(&prepared.features[i]);
            let err = v - prepared.return_targets[i];
            loss += err * err / n;
            let g = approx::backward(
                &next_critic.spec,
                &next_critic.params,
                &prepared.features[i],
                &[2.0 * err / n],
            );
            grad.add_scaled(&g, 1.0);
        }
        if !grad.is_finite() {
            return Err(UpdateError::NonFinite {
                what: "critic gradient",
            });
        }
        if let Some(cap) = cfg.grad_norm_cap {
            grad = clip_gradient(&grad, cap);
        }
        next_critic.params = approx::sgd_step(&next_critic.params, &grad, cfg.critic_lr, false);
        if epoch == 0 {
            value_loss = loss;
        }
    }

    Ok((
        next_actor,
        next_critic,
        ActorCriticDiagnostics {
            policy_loss: -surrogate,
            value_loss,
            actor_grad_norm: actor_grad.norm(),
        },
    ))
}

/// Iterated collect-and-update loop around [`actor_critic_update`].
pub fn actor_critic_train(
    model: &MdpModel,
    cfg: &ActorCriticConfig,
    actor_spec: &MlpSpec,
    critic_spec: &MlpSpec,
    iterations: usize,
    seed: u64,
    threads: usize,
) -> Result<(Network, Network, Vec<IterationMetrics>), UpdateError> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(STREAM_INIT);
    let mut actor = Network::init(actor_spec.clone(), &mut init_rng);
    let mut critic = Network::init(critic_spec.clone(), &mut init_rng);

    let mut history = Vec::with_capacity(iterations);
    let mut total_episodes = 0usize;

    for iteration in 0..iterations {
        let batch = collect_batch(
            model,
            &actor,
            Some(&critic),
            None,
            BatchGoal::Steps(cfg.batch_size),
            cfg.max_episode_len,
            seed,
            rollout_stream_base(iteration),
            threads,
        );
        total_episodes += batch.n_episodes();

        let (next_actor, next_critic, diag) = actor_critic_update(&batch, &actor, &critic, cfg)?;
        actor = next_actor;
        critic = next_critic;

        history.push(IterationMetrics {
            iteration,
            episodes: total_episodes,
            mean_return: batch.mean_return(),
            success_rate: batch.success_rate(),
            policy_loss: diag.policy_loss,
            value_loss: diag.value_loss,
            entropy: 0.0,
            approx_kl: 0.0,
            clip_fraction: 0.0,
            lr: cfg.actor_lr,
            grad_norm: diag.actor_grad_norm,
        });
    }

    Ok((actor, critic, history))
}
