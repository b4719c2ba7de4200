//! Policy-gradient algorithms over the function approximator: REINFORCE,
//! actor-critic, and PPO with clipped policy and value objectives,
//! entropy bonus, KL-based learning-rate adaptation, and gradient
//! clipping.
//!
//! Rollout collection is deterministic: episode `e` of iteration `i` draws
//! from its own counter-based stream `(seed, stream = i << 32 | e)`, so
//! results are identical no matter how many worker threads collect them.

mod actor_critic;
mod ppo;
mod reinforce;

pub use actor_critic::{actor_critic_train, actor_critic_update, ActorCriticConfig};
pub use ppo::{ppo_train, total_ppo_loss, LossBreakdown, PpoTrainResult};
pub use reinforce::{reinforce_train, reinforce_update, ReinforceConfig, ReinforceWeight};

use std::sync::mpsc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::approx::{self, GradVector, MlpSpec, ParamVector};
use crate::estimators::{self, GaeConfig, RunningMoments};
use crate::mdp::{step, ActionId, MdpModel, TabularPolicy};

/// A network spec bundled with its parameters.
#[derive(Clone, Debug)]
pub struct Network {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl Network {
    pub fn new(spec: MlpSpec, params: ParamVector) -> Self {
        assert_eq!(params.len(), spec.param_count());
        Self { spec, params }
    }

    pub fn init<R: Rng>(spec: MlpSpec, rng: &mut R) -> Self {
        let params = spec.init_params(rng);
        Self { spec, params }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        approx::forward(&self.spec, &self.params, input)
    }

    pub fn value(&self, input: &[f64]) -> f64 {
        self.forward(input)[0]
    }

    pub fn action_probs(&self, input: &[f64]) -> Vec<f64> {
        approx::softmax_policy(&self.spec, &self.params, input)
    }
}

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("non-finite {what} encountered during update")]
    NonFinite { what: &'static str },
}

/// How the critic regression target is built from a rollout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticTarget {
    /// Lambda-return: advantage plus the collected value estimate.
    LambdaReturn,
    /// One-step TD target from the collected value estimates.
    TdTarget,
}

/// PPO hyperparameters, including the appendix tricks.
#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub lr: f64,
    pub target_kl: f64,
    pub grad_norm_cap: f64,
    pub value_clip: bool,
    pub adv_norm: bool,
    pub obs_norm: bool,
    /// Rollout size in steps; whole episodes are collected until reached.
    pub batch_size: usize,
    pub max_episode_len: usize,
    pub critic_target: CriticTarget,
    /// Use the adaptive-moment optimizer instead of the plain gradient
    /// step. Off by default.
    pub adam: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.01,
            epochs_per_batch: 10,
            minibatch_size: 64,
            lr: 3e-4,
            target_kl: 0.01,
            grad_norm_cap: 0.5,
            value_clip: true,
            adv_norm: true,
            obs_norm: false,
            batch_size: 1024,
            max_episode_len: 200,
            critic_target: CriticTarget::LambdaReturn,
            adam: false,
        }
    }
}

/// Byte span of one episode inside a [`RolloutBatch`].
#[derive(Clone, Copy, Debug)]
pub struct EpisodeSlice {
    pub start: usize,
    pub len: usize,
    pub terminated: bool,
    /// Critic value of the truncation state (zero when terminated).
    pub bootstrap_value: f64,
    pub total_reward: f64,
    pub success: bool,
}

/// Flattened rollout data plus the derived advantage and return targets.
#[derive(Clone, Debug, Default)]
pub struct RolloutBatch {
    pub features: Vec<Vec<f64>>,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub old_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub return_targets: Vec<f64>,
    pub episodes: Vec<EpisodeSlice>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn mean_return(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(|e| e.total_reward).sum::<f64>() / self.episodes.len() as f64
    }

    pub fn success_rate(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().filter(|e| e.success).count() as f64 / self.episodes.len() as f64
    }

    /// Fills advantages (GAE) and critic return targets. Truncated episode
    /// ends are folded into the last reward via the timeout bootstrap, so
    /// every segment is processed with a zero terminal bootstrap.
    pub fn compute_targets(&mut self, gamma: f64, lambda: f64, critic_target: CriticTarget) {
        let cfg = GaeConfig::new(gamma, lambda);
        self.advantages = vec![0.0; self.len()];
        self.return_targets = vec![0.0; self.len()];
        for ep in &self.episodes {
            let span = ep.start..ep.start + ep.len;
            let mut rewards = self.rewards[span.clone()].to_vec();
            let last = rewards.len() - 1;
            rewards[last] = estimators::timeout_bootstrap(
                rewards[last],
                ep.bootstrap_value,
                gamma,
                !ep.terminated,
            );
            let mut values = self.old_values[span.clone()].to_vec();
            values.push(0.0);
            let adv = estimators::gae(&rewards, &values, &cfg, true)
                .expect("values array built to match");
            for (t, a) in adv.iter().enumerate() {
                self.advantages[ep.start + t] = *a;
                self.return_targets[ep.start + t] = match critic_target {
                    CriticTarget::LambdaReturn => a + values[t],
                    CriticTarget::TdTarget => rewards[t] + gamma * values[t + 1],
                };
            }
        }
    }

    /// Replaces advantages with their batch-normalized form.
    pub fn normalize_advantages(&mut self, eps: f64) {
        self.advantages = estimators::normalize_advantages(&self.advantages, eps);
    }
}

/// One-hot featurization of tabular states.
pub fn one_hot(state: usize, n_states: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_states];
    v[state] = 1.0;
    v
}

/// How much data one collection pass gathers.
#[derive(Clone, Copy, Debug)]
pub enum BatchGoal {
    /// Whole episodes until at least this many steps.
    Steps(usize),
    /// Exactly this many episodes.
    Episodes(usize),
}

struct PlayedEpisode {
    features: Vec<Vec<f64>>,
    states: Vec<usize>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    terminated: bool,
    bootstrap_value: f64,
    success: bool,
}

fn featurize(state: usize, n_states: usize, normalizer: Option<&RunningMoments>) -> Vec<f64> {
    let raw = one_hot(state, n_states);
    match normalizer {
        Some(m) => m.normalize(&raw),
        None => raw,
    }
}

fn play_episode(
    model: &MdpModel,
    actor: &Network,
    critic: Option<&Network>,
    normalizer: Option<&RunningMoments>,
    max_len: usize,
    rng: &mut ChaCha8Rng,
) -> PlayedEpisode {
    let n = model.n_states();
    let mut ep = PlayedEpisode {
        features: Vec::new(),
        states: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        log_probs: Vec::new(),
        values: Vec::new(),
        terminated: false,
        bootstrap_value: 0.0,
        success: false,
    };

    let mut s = model.sample_initial(rng);
    for t in 0..max_len {
        let features = featurize(s.0, n, normalizer);
        let probs = actor.action_probs(&features);
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut action = probs.len() - 1;
        for (a, p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                action = a;
                break;
            }
        }
        let value = critic.map_or(0.0, |c| c.value(&features));
        let tr = step(model, s, ActionId(action), rng).expect("sampled state is non-terminal");

        ep.features.push(features);
        ep.states.push(s.0);
        ep.actions.push(action);
        ep.rewards.push(tr.reward);
        ep.log_probs.push(probs[action].ln());
        ep.values.push(value);

        if tr.terminated {
            ep.terminated = true;
            ep.success = model.is_success(tr.next_state);
            break;
        }
        if t + 1 == max_len {
            // Timeout: remember the critic's view of the cut state.
            ep.bootstrap_value =
                critic.map_or(0.0, |c| c.value(&featurize(tr.next_state.0, n, normalizer)));
            break;
        }
        s = tr.next_state;
    }
    ep
}

/// Collects whole episodes into a flat batch.
///
/// Episode `e` uses the RNG stream `stream_base + e`, which makes the
/// result a pure function of `(seed, stream_base, nets, goal)` regardless
/// of `threads`.
#[allow(clippy::too_many_arguments)]
pub fn collect_batch(
    model: &MdpModel,
    actor: &Network,
    critic: Option<&Network>,
    normalizer: Option<&RunningMoments>,
    goal: BatchGoal,
    max_episode_len: usize,
    seed: u64,
    stream_base: u64,
    threads: usize,
) -> RolloutBatch {
    let play = |index: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_base.wrapping_add(index));
        play_episode(model, actor, critic, normalizer, max_episode_len, &mut rng)
    };

    let mut episodes: Vec<PlayedEpisode> = Vec::new();
    let mut steps = 0usize;
    let mut next_index = 0u64;
    let done = |episodes: &Vec<PlayedEpisode>, steps: usize| match goal {
        BatchGoal::Steps(target) => steps >= target,
        BatchGoal::Episodes(target) => episodes.len() >= target,
    };

    while !done(&episodes, steps) {
        let chunk = match goal {
            BatchGoal::Episodes(target) => (target - episodes.len()) as u64,
            BatchGoal::Steps(_) => threads.max(1) as u64,
        };
        let indices = next_index..next_index + chunk;
        next_index += chunk;

        let mut rolled: Vec<PlayedEpisode> = if threads <= 1 || chunk == 1 {
            indices.map(play).collect()
        } else {
            std::thread::scope(|scope| {
                let (tx, rx) = mpsc::channel();
                for w in 0..threads {
                    let tx = tx.clone();
                    let indices = indices.clone();
                    let play = &play;
                    scope.spawn(move || {
                        for i in indices.skip(w).step_by(threads) {
                            tx.send((i, play(i))).expect("collector channel closed");
                        }
                    });
                }
                drop(tx);
                let mut tagged: Vec<(u64, PlayedEpisode)> = rx.iter().collect();
                tagged.sort_by_key(|(i, _)| *i);
                tagged.into_iter().map(|(_, e)| e).collect()
            })
        };

        // Keep episodes in index order; drop speculative surplus.
        for ep in rolled.drain(..) {
            if done(&episodes, steps) {
                break;
            }
            steps += ep.actions.len();
            episodes.push(ep);
        }
    }

    let mut batch = RolloutBatch::default();
    for ep in episodes {
        let start = batch.len();
        let len = ep.actions.len();
        batch.episodes.push(EpisodeSlice {
            start,
            len,
            terminated: ep.terminated,
            bootstrap_value: ep.bootstrap_value,
            total_reward: ep.rewards.iter().sum(),
            success: ep.success,
        });
        batch.features.extend(ep.features);
        batch.states.extend(ep.states);
        batch.actions.extend(ep.actions);
        batch.rewards.extend(ep.rewards);
        batch.old_log_probs.extend(ep.log_probs);
        batch.old_values.extend(ep.values);
    }
    batch
}

/// `exp(new - old)`, with the exponent clamped to +-60 to dodge overflow.
pub fn importance_ratio(new_log_prob: f64, old_log_prob: f64) -> f64 {
    importance_ratio_checked(new_log_prob, old_log_prob).0
}

/// Importance ratio plus whether the exponent clamp engaged.
pub fn importance_ratio_checked(new_log_prob: f64, old_log_prob: f64) -> (f64, bool) {
    let exponent = new_log_prob - old_log_prob;
    let clamped = exponent.abs() > 60.0;
    ((exponent.clamp(-60.0, 60.0)).exp(), clamped)
}

/// `min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)` and whether the
/// clipped branch is strictly active (ties count as unclipped).
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> (f64, bool) {
    debug_assert!(clip_eps > 0.0 && clip_eps < 1.0);
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if clipped < unclipped {
        (clipped, true)
    } else {
        (unclipped, false)
    }
}

/// Derivative of the clipped surrogate with respect to the ratio: zero in
/// the saturated region, the advantage otherwise (ties take the unclipped
/// branch).
pub fn surrogate_ratio_grad(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let (_, clipped) = clipped_surrogate(ratio, advantage, clip_eps);
    if clipped {
        0.0
    } else {
        advantage
    }
}

/// Pessimistic clipped value loss:
/// `max[(V - targ)^2, (clip(V, V_old - eps, V_old + eps) - targ)^2]`.
pub fn clipped_value_loss(new_value: f64, old_value: f64, target: f64, clip_eps: f64) -> f64 {
    let plain = (new_value - target).powi(2);
    let clipped = (new_value.clamp(old_value - clip_eps, old_value + clip_eps) - target).powi(2);
    plain.max(clipped)
}

/// Derivative of [`clipped_value_loss`] with respect to the new value.
/// When the clipped branch strictly attains the max the value sits outside
/// the clamp, so the derivative is zero.
pub fn clipped_value_loss_grad(new_value: f64, old_value: f64, target: f64, clip_eps: f64) -> f64 {
    let plain = (new_value - target).powi(2);
    let clipped = (new_value.clamp(old_value - clip_eps, old_value + clip_eps) - target).powi(2);
    if plain >= clipped {
        2.0 * (new_value - target)
    } else {
        0.0
    }
}

/// KL-driven learning-rate schedule: divide by 1.5 when the measured KL
/// overshoots twice the target, multiply by 1.5 when it undershoots half,
/// clamped to `[1e-6, 1e-2]`.
pub fn adaptive_lr(current_lr: f64, measured_kl: f64, target_kl: f64) -> f64 {
    let next = if measured_kl > 2.0 * target_kl {
        current_lr / 1.5
    } else if measured_kl < target_kl / 2.0 {
        current_lr * 1.5
    } else {
        current_lr
    };
    next.clamp(1e-6, 1e-2)
}

/// Rescales `g` to norm `cap` when it exceeds it.
pub fn clip_gradient(g: &GradVector, cap: f64) -> GradVector {
    assert!(cap > 0.0, "gradient cap must be positive");
    let norm = g.norm();
    if norm <= cap {
        return g.clone();
    }
    let mut out = g.clone();
    out.scale(cap / norm);
    out
}

/// Extracts the full per-state action distribution of the actor.
pub fn actor_policy(
    model: &MdpModel,
    actor: &Network,
    normalizer: Option<&RunningMoments>,
) -> TabularPolicy {
    let n = model.n_states();
    let rows = (0..n)
        .map(|s| actor.action_probs(&featurize(s, n, normalizer)))
        .collect();
    TabularPolicy::from_rows(rows).expect("softmax rows are normalized")
}

/// Deterministic argmax policy of the actor.
pub fn greedy_actor_policy(
    model: &MdpModel,
    actor: &Network,
    normalizer: Option<&RunningMoments>,
) -> TabularPolicy {
    let n = model.n_states();
    let actions: Vec<ActionId> = (0..n)
        .map(|s| {
            let probs = actor.action_probs(&featurize(s, n, normalizer));
            let mut best = 0;
            for (a, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = a;
                }
            }
            ActionId(best)
        })
        .collect();
    TabularPolicy::deterministic(model.n_actions(), &actions)
}

/// Per-iteration training metrics, one CSV row per iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub episodes: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub lr: f64,
    pub grad_norm: f64,
}

impl IterationMetrics {
    pub const CSV_HEADER: &'static str = "iteration,episodes,mean_return,success_rate,policy_loss,value_loss,entropy,approx_kl,clip_fraction,lr,grad_norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.episodes,
            self.mean_return,
            self.success_rate,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.approx_kl,
            self.clip_fraction,
            self.lr,
            self.grad_norm
        )
    }
}

/// Stream id for parameter initialization draws.
pub(crate) const STREAM_INIT: u64 = u64::MAX;
/// Stream id base for minibatch shuffling; one stream per iteration.
pub(crate) const STREAM_SHUFFLE: u64 = 1 << 63;

pub(crate) fn rollout_stream_base(iteration: usize) -> u64 {
    (iteration as u64) << 32
}

/// Deterministic Fisher-Yates shuffle of minibatch indices.
pub(crate) fn shuffle_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    indices
}
