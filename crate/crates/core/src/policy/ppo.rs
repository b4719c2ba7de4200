//! The clipped-objective training loop: composite loss, minibatch epochs
//! with KL early stopping, learning-rate adaptation, and joint gradient
//! clipping across both networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::approx::{self, AdamState, GradVector, MlpSpec};
use crate::estimators::RunningMoments;
use crate::mdp::MdpModel;

use super::{
    adaptive_lr, clip_gradient, clipped_surrogate, clipped_value_loss, clipped_value_loss_grad,
    collect_batch, importance_ratio_checked, rollout_stream_base, shuffle_indices,
    surrogate_ratio_grad, BatchGoal, IterationMetrics, Network, PpoConfig, RolloutBatch,
    UpdateError, STREAM_INIT, STREAM_SHUFFLE,
};

/// Scalar loss and diagnostics of one minibatch evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossBreakdown {
    /// The minimized scalar: `-mean(surrogate) + c1 mean(L^V) - c2 mean(H)`.
    pub total: f64,
    /// `mean(surrogate)`, reported as the policy objective.
    pub policy_surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// `mean(old_log_prob - new_log_prob)`.
    pub approx_kl: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Importance-ratio exponent clamps seen in this minibatch.
    pub ratio_clamps: usize,
}

/// Composite PPO loss over `indices` of the batch, with exact gradients
/// for both networks.
///
/// Advantages must already be computed (and optionally normalized) on the
/// whole batch. Any non-finite intermediate aborts the update.
pub fn total_ppo_loss(
    batch: &RolloutBatch,
    indices: &[usize],
    actor: &Network,
    critic: &Network,
    cfg: &PpoConfig,
) -> Result<(LossBreakdown, GradVector, GradVector), UpdateError> {
    assert!(!indices.is_empty(), "empty minibatch");
    assert_eq!(
        batch.advantages.len(),
        batch.len(),
        "advantages not computed"
    );

    let n = indices.len() as f64;
    let mut actor_grad = GradVector::zeros(actor.params.len());
    let mut critic_grad = GradVector::zeros(critic.params.len());
    let mut out = LossBreakdown::default();

    for &i in indices {
        let features = &batch.features[i];
        let action = batch.actions[i];
        let advantage = batch.advantages[i];
        let target = batch.return_targets[i];

        // Policy head.
        let (new_log_prob, log_prob_grad) =
            approx::logprob_and_grad(&actor.spec, &actor.params, features, action);
        let (ratio, clamped) = importance_ratio_checked(new_log_prob, batch.old_log_probs[i]);
        let (surrogate, clipped) = clipped_surrogate(ratio, advantage, cfg.clip_eps);
        // d surrogate / d new_log_prob = (d surrogate / d ratio) * ratio.
        let surrogate_lp_grad = surrogate_ratio_grad(ratio, advantage, cfg.clip_eps) * ratio;

        let (entropy, entropy_grad) =
            approx::entropy_and_grad(&actor.spec, &actor.params, features);

        // Value head.
        let new_value = critic.value(features);
        let (vloss, vloss_grad) = if cfg.value_clip {
            (
                clipped_value_loss(new_value, batch.old_values[i], target, cfg.clip_eps),
                clipped_value_loss_grad(new_value, batch.old_values[i], target, cfg.clip_eps),
            )
        } else {
            ((new_value - target).powi(2), 2.0 * (new_value - target))
        };

        if !surrogate.is_finite() || !entropy.is_finite() || !vloss.is_finite() {
            return Err(UpdateError::NonFinite { what: "loss term" });
        }

        // Minimized objective: -surrogate + c1 vloss - c2 entropy.
        actor_grad.add_scaled(&log_prob_grad, -surrogate_lp_grad / n);
        actor_grad.add_scaled(&entropy_grad, -cfg.ent_coef / n);
        let critic_out_grad = [cfg.vf_coef * vloss_grad / n];
        let per_sample = approx::backward(&critic.spec, &critic.params, features, &critic_out_grad);
        critic_grad.add_scaled(&per_sample, 1.0);

        out.total += (-surrogate + cfg.vf_coef * vloss - cfg.ent_coef * entropy) / n;
        out.policy_surrogate += surrogate / n;
        out.value_loss += vloss / n;
        out.entropy += entropy / n;
        out.approx_kl += (batch.old_log_probs[i] - new_log_prob) / n;
        out.mean_ratio += ratio / n;
        out.clip_fraction += if clipped { 1.0 / n } else { 0.0 };
        out.ratio_clamps += usize::from(clamped);
    }

    if !actor_grad.is_finite() || !critic_grad.is_finite() || !out.total.is_finite() {
        return Err(UpdateError::NonFinite { what: "gradient" });
    }
    Ok((out, actor_grad, critic_grad))
}

/// Final networks plus the per-iteration metric history.
#[derive(Clone, Debug)]
pub struct PpoTrainResult {
    pub actor: Network,
    pub critic: Network,
    pub history: Vec<IterationMetrics>,
    /// Observation normalizer state, present when `obs_norm` was on.
    pub normalizer: Option<RunningMoments>,
}

/// Runs the full clipped-objective loop for `iterations` rollout batches.
///
/// Per iteration: collect a batch of at least `cfg.batch_size` steps with
/// frozen log-probs and values, bootstrap truncated tails, compute GAE
/// advantages and return targets, optionally normalize advantages, then
/// run shuffled minibatch epochs (stopping early once the approximate KL
/// exceeds `1.5 * target_kl`), and finally adapt the learning rate.
///
/// Fully deterministic in `(seed, cfg, specs, iterations)`; `threads` only
/// parallelizes episode collection.
pub fn ppo_train(
    model: &MdpModel,
    cfg: &PpoConfig,
    actor_spec: &MlpSpec,
    critic_spec: &MlpSpec,
    iterations: usize,
    seed: u64,
    threads: usize,
) -> Result<PpoTrainResult, UpdateError> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(STREAM_INIT);
    let mut actor = Network::init(actor_spec.clone(), &mut init_rng);
    let mut critic = Network::init(critic_spec.clone(), &mut init_rng);

    let mut normalizer = cfg
        .obs_norm
        .then(|| RunningMoments::new(model.n_states(), 0.01, 1e-8));
    let mut adam = cfg.adam.then(|| {
        (
            AdamState::new(actor.params.len()),
            AdamState::new(critic.params.len()),
        )
    });

    let mut lr = cfg.lr;
    let mut history = Vec::with_capacity(iterations);
    let mut total_episodes = 0usize;

    for iteration in 0..iterations {
        let mut batch = collect_batch(
            model,
            &actor,
            Some(&critic),
            normalizer.as_ref(),
            BatchGoal::Steps(cfg.batch_size),
            cfg.max_episode_len,
            seed,
            rollout_stream_base(iteration),
            threads,
        );
        total_episodes += batch.n_episodes();

        if let Some(m) = normalizer.as_mut() {
            // Fold the raw one-hot observations of this batch into the
            // running moments; the stored features stay as collected.
            let raw: Vec<Vec<f64>> = batch
                .states
                .iter()
                .map(|&s| super::one_hot(s, model.n_states()))
                .collect();
            m.update(&raw);
        }

        batch.compute_targets(cfg.gamma, cfg.lambda, cfg.critic_target);
        if cfg.adv_norm {
            batch.normalize_advantages(1e-8);
        }

        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
        shuffle_rng.set_stream(STREAM_SHUFFLE | iteration as u64);

        let mut kl_sum = 0.0;
        let mut kl_count = 0usize;
        let mut agg = LossBreakdown::default();
        let mut agg_count = 0usize;
        let mut grad_norm_sum = 0.0;
        let mut failed = false;

        'epochs: for _ in 0..cfg.epochs_per_batch {
            let order = shuffle_indices(batch.len(), &mut shuffle_rng);
            for minibatch in order.chunks(cfg.minibatch_size.max(1)) {
                let step = total_ppo_loss(&batch, minibatch, &actor, &critic, cfg);
                let (breakdown, actor_grad, critic_grad) = match step {
                    Ok(v) => v,
                    Err(_) => {
                        // Keep the pre-minibatch parameters and move on to
                        // the next rollout.
                        failed = true;
                        break 'epochs;
                    }
                };

                // Joint clip across both networks.
                let mut joint = GradVector {
                    data: actor_grad
                        .data
                        .iter()
                        .chain(&critic_grad.data)
                        .copied()
                        .collect(),
                };
                grad_norm_sum += joint.norm();
                joint = clip_gradient(&joint, cfg.grad_norm_cap);
                let (a_part, c_part) = joint.data.split_at(actor_grad.data.len());
                let actor_grad = GradVector {
                    data: a_part.to_vec(),
                };
                let critic_grad = GradVector {
                    data: c_part.to_vec(),
                };

                match adam.as_mut() {
                    Some((adam_a, adam_c)) => {
                        actor.params = adam_a.step(&actor.params, &actor_grad, lr, false);
                        critic.params = adam_c.step(&critic.params, &critic_grad, lr, false);
                    }
                    None => {
                        actor.params = approx::sgd_step(&actor.params, &actor_grad, lr, false);
                        critic.params = approx::sgd_step(&critic.params, &critic_grad, lr, false);
                    }
                }

                kl_sum += breakdown.approx_kl;
                kl_count += 1;
                agg.total += breakdown.total;
                agg.policy_surrogate += breakdown.policy_surrogate;
                agg.value_loss += breakdown.value_loss;
                agg.entropy += breakdown.entropy;
                agg.clip_fraction += breakdown.clip_fraction;
                agg_count += 1;

                if breakdown.approx_kl > 1.5 * cfg.target_kl {
                    break 'epochs;
                }
            }
        }

        let mean_kl = if kl_count > 0 {
            kl_sum / kl_count as f64
        } else {
            0.0
        };
        let denom = agg_count.max(1) as f64;
        history.push(IterationMetrics {
            iteration,
            episodes: total_episodes,
            mean_return: batch.mean_return(),
            success_rate: batch.success_rate(),
            policy_loss: -agg.policy_surrogate / denom,
            value_loss: agg.value_loss / denom,
            entropy: agg.entropy / denom,
            approx_kl: mean_kl,
            clip_fraction: agg.clip_fraction / denom,
            lr,
            grad_norm: grad_norm_sum / denom,
        });

        if !failed {
            lr = adaptive_lr(lr, mean_kl, cfg.target_kl);
        }
    }

    Ok(PpoTrainResult {
        actor,
        critic,
        history,
        normalizer,
    })
}
