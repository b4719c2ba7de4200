//! Sampling-based policy evaluation and control over tabular values.
//!
//! Monte-Carlo evaluation follows the every-visit scheme with backward
//! return accumulation and incremental-mean updates; the TD family covers
//! 1-step, n-step, and the forward-view lambda-return, all bootstrapping
//! with the current table. Control is Monte-Carlo GPI with an
//! epsilon-greedy behavior policy.

use rand::Rng;

use crate::estimators;
use crate::mdp::{rollout_policy, step, ActionId, MdpModel, StateId, TabularPolicy, Trajectory};

/// Step-size schedule for incremental updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    /// `1/(m+1)` on the m-th revisit: exact incremental mean.
    Harmonic,
    /// Fixed step in (0, 1].
    Constant(f64),
}

impl StepSize {
    fn rate(&self, count_after: u64) -> f64 {
        match self {
            StepSize::Harmonic => 1.0 / count_after as f64,
            StepSize::Constant(a) => {
                debug_assert!(*a > 0.0 && *a <= 1.0);
                *a
            }
        }
    }
}

/// Settings shared by the sampling evaluators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub gamma: f64,
    pub alpha: StepSize,
    /// Step count for the n-step evaluator.
    pub n: usize,
    /// Decay for the lambda-return evaluator.
    pub lambda: f64,
    pub episodes: usize,
    /// Episode truncation length for sampling.
    pub max_steps: usize,
    /// Convergence tolerance, used by callers that sweep until stable.
    pub delta: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: StepSize::Harmonic,
            n: 1,
            lambda: 0.9,
            episodes: 10_000,
            max_steps: 1_000,
            delta: 1e-8,
        }
    }
}

/// Per-state value estimates with visit counts.
#[derive(Clone, Debug, PartialEq)]
pub struct VTable {
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
}

impl VTable {
    pub fn zeros(n_states: usize) -> Self {
        Self {
            values: vec![0.0; n_states],
            counts: vec![0; n_states],
        }
    }

    pub fn get(&self, s: StateId) -> f64 {
        self.values[s.0]
    }

    fn update(&mut self, s: StateId, target: f64, alpha: StepSize) {
        self.counts[s.0] += 1;
        let rate = alpha.rate(self.counts[s.0]);
        self.values[s.0] += rate * (target - self.values[s.0]);
    }

    pub fn max_abs_diff(&self, reference: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV dump in the same `state,value` shape as the exact solver.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,value\n");
        for (s, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{s},{v}\n"));
        }
        out
    }
}

/// Per-(state, action) value estimates with visit counts.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
            counts: vec![0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.values[s.0 * self.n_actions + a.0]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s.0 * self.n_actions..(s.0 + 1) * self.n_actions]
    }

    fn update(&mut self, s: StateId, a: ActionId, target: f64, alpha: StepSize) {
        let idx = s.0 * self.n_actions + a.0;
        self.counts[idx] += 1;
        let rate = alpha.rate(self.counts[idx]);
        self.values[idx] += rate * (target - self.values[idx]);
    }

    /// View of the estimates as an exact-solver matrix, for oracle diffs.
    pub fn to_matrix(&self) -> crate::dp::QMatrix {
        let mut q = crate::dp::QMatrix::zeros(self.n_states, self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                q.set(StateId(s), ActionId(a), self.get(StateId(s), ActionId(a)));
            }
        }
        q
    }

    /// Greedy action per row, ties to the lowest index.
    pub fn greedy_actions(&self) -> Vec<ActionId> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(StateId(s));
                let mut best = 0;
                for (a, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = a;
                    }
                }
                ActionId(best)
            })
            .collect()
    }

    /// CSV dump in the same `state,action,value` shape as the exact solver.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,action,value\n");
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.push_str(&format!("{s},{a},{}\n", self.get(StateId(s), ActionId(a))));
            }
        }
        out
    }
}

/// Value array along a trajectory plus the bootstrap slot: zero after
/// termination, the current estimate of the truncation state otherwise.
fn values_along<F: Fn(StateId) -> f64>(traj: &Trajectory, lookup: F) -> Vec<f64> {
    let mut values: Vec<f64> = traj.transitions.iter().map(|t| lookup(t.state)).collect();
    let last = traj.transitions.last().expect("trajectory is never empty");
    values.push(if last.terminated {
        0.0
    } else {
        lookup(last.next_state)
    });
    values
}

/// Every-visit Monte-Carlo state-value evaluation with backward return
/// accumulation `G <- gamma G + r` and incremental-mean updates.
///
/// Truncated episodes seed the accumulator with the current estimate of
/// the truncation state; unvisited states stay at zero.
pub fn mc_evaluate_v<R: Rng>(
    model: &MdpModel,
    policy: &TabularPolicy,
    cfg: &EvalConfig,
    rng: &mut R,
) -> VTable {
    let mut table = VTable::zeros(model.n_states());
    for _ in 0..cfg.episodes {
        let traj = rollout_policy(model, policy, cfg.max_steps, rng);
        let last = traj.transitions.last().unwrap();
        let mut g = if last.truncated {
            table.get(last.next_state)
        } else {
            0.0
        };
        for tr in traj.transitions.iter().rev() {
            g = cfg.gamma * g + tr.reward;
            table.update(tr.state, g, cfg.alpha);
        }
    }
    table
}

/// Every-visit Monte-Carlo action-value evaluation.
///
/// The policy must give every action nonzero probability in visited states
/// for the estimates to cover the table.
pub fn mc_evaluate_q<R: Rng>(
    model: &MdpModel,
    policy: &TabularPolicy,
    cfg: &EvalConfig,
    rng: &mut R,
) -> QTable {
    let mut table = QTable::zeros(model.n_states(), model.n_actions());
    for _ in 0..cfg.episodes {
        let traj = rollout_policy(model, policy, cfg.max_steps, rng);
        let last = traj.transitions.last().unwrap();
        let mut g = if last.truncated {
            // Bootstrap with the behavior policy's value of the cut state.
            let s = last.next_state;
            (0..model.n_actions())
                .map(|a| policy.prob(s, ActionId(a)) * table.get(s, ActionId(a)))
                .sum()
        } else {
            0.0
        };
        for tr in traj.transitions.iter().rev() {
            g = cfg.gamma * g + tr.reward;
            table.update(tr.state, tr.action, g, cfg.alpha);
        }
    }
    table
}

/// Online 1-step TD evaluation: after every step,
/// `V(s) += alpha (r + gamma V(s') - V(s))` with a zero bootstrap at
/// terminal successors.
pub fn td_evaluate_v<R: Rng>(
    model: &MdpModel,
    policy: &TabularPolicy,
    cfg: &EvalConfig,
    rng: &mut R,
) -> VTable {
    let mut table = VTable::zeros(model.n_states());
    for _ in 0..cfg.episodes {
        let mut s = model.sample_initial(rng);
        for _ in 0..cfg.max_steps {
            let a = policy.sample_action(s, rng);
            let tr = step(model, s, a, rng).expect("sampled state is non-terminal");
            let bootstrap = if tr.terminated {
                0.0
            } else {
                table.get(tr.next_state)
            };
            let target = tr.reward + cfg.gamma * bootstrap;
            table.update(s, target, cfg.alpha);
            if tr.terminated {
                break;
            }
            s = tr.next_state;
        }
    }
    table
}

/// Per-episode offline n-step TD evaluation.
///
/// Targets use the table as frozen at episode end; episode boundaries
/// truncate the lookahead naturally (terminal bootstrap zero, truncation
/// bootstrap from the table).
pub fn n_step_td_evaluate_v<R: Rng>(
    model: &MdpModel,
    policy: &TabularPolicy,
    cfg: &EvalConfig,
    rng: &mut R,
) -> VTable {
    assert!(cfg.n >= 1, "n must be at least 1");
    let mut table = VTable::zeros(model.n_states());
    for _ in 0..cfg.episodes {
        let traj = rollout_policy(model, policy, cfg.max_steps, rng);
        let rewards = traj.rewards();
        let values = values_along(&traj, |s| table.get(s));
        let targets: Vec<f64> = (0..rewards.len())
            .map(|t| {
                estimators::n_step_advantage(&rewards, &values, cfg.gamma, cfg.n, t) + values[t]
            })
            .collect();
        for (tr, target) in traj.transitions.iter().zip(&targets) {
            table.update(tr.state, *target, cfg.alpha);
        }
    }
    table
}

/// Forward-view TD(lambda): per episode, compute the lambda-return of
/// every visited state against the frozen table, then update toward it.
pub fn td_lambda_evaluate_v<R: Rng>(
    model: &MdpModel,
    policy: &TabularPolicy,
    cfg: &EvalConfig,
    rng: &mut R,
) -> VTable {
    assert!((0.0..=1.0).contains(&cfg.lambda), "lambda out of [0, 1]");
    let mut table = VTable::zeros(model.n_states());
    let gae_cfg = estimators::GaeConfig::new(cfg.gamma, cfg.lambda);
    for _ in 0..cfg.episodes {
        let traj = rollout_policy(model, policy, cfg.max_steps, rng);
        let rewards = traj.rewards();
        let values = values_along(&traj, |s| table.get(s));
        let targets = estimators::lambda_return(&rewards, &values, &gae_cfg, traj.terminated())
            .expect("values array built to match");
        for (tr, target) in traj.transitions.iter().zip(&targets) {
            table.update(tr.state, *target, cfg.alpha);
        }
    }
    table
}

/// Improvement rounds before Monte-Carlo control gives up on a stable
/// greedy policy.
const MAX_IMPROVEMENT_ROUNDS: usize = 512;

/// Monte-Carlo control: alternates a batch of `cfg.episodes` episodes of
/// every-visit Q evaluation under an epsilon-greedy behavior policy with a
/// greedy improvement step, until the greedy policy survives an
/// improvement unchanged (or the round cap is hit).
///
/// Returns the final greedy policy and the Q table behind it.
pub fn mc_control_gpi<R: Rng>(
    model: &MdpModel,
    cfg: &EvalConfig,
    epsilon: f64,
    rng: &mut R,
) -> (TabularPolicy, QTable) {
    assert!(epsilon > 0.0 && epsilon <= 1.0, "epsilon out of (0, 1]");
    let mut table = QTable::zeros(model.n_states(), model.n_actions());
    let mut greedy = vec![ActionId(0); model.n_states()];

    for round in 0..MAX_IMPROVEMENT_ROUNDS {
        let behavior = TabularPolicy::epsilon_greedy(model.n_actions(), &greedy, epsilon);
        for _ in 0..cfg.episodes {
            let traj = rollout_policy(model, &behavior, cfg.max_steps, rng);
            let last = traj.transitions.last().unwrap();
            let mut g = if last.truncated {
                let s = last.next_state;
                (0..model.n_actions())
                    .map(|a| behavior.prob(s, ActionId(a)) * table.get(s, ActionId(a)))
                    .sum()
            } else {
                0.0
            };
            for tr in traj.transitions.iter().rev() {
                g = cfg.gamma * g + tr.reward;
                table.update(tr.state, tr.action, g, cfg.alpha);
            }
        }
        let improved = table.greedy_actions();
        // Stable across an improvement step: the control loop is done. An
        // all-zero table has evaluated nothing yet and does not count.
        let informed = table.values.iter().any(|&v| v != 0.0);
        if improved == greedy && round > 0 && informed {
            break;
        }
        greedy = improved;
    }

    (
        TabularPolicy::deterministic(model.n_actions(), &greedy),
        table,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp;
    use crate::mdp::{frozen_lake, Outcome, DOWN, RIGHT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    /// Deterministic policy that walks 0 -> 4 -> 8 -> 9 -> 13 -> 14 -> 15.
    fn optimal_lake_policy() -> TabularPolicy {
        let mut actions = vec![RIGHT; 16];
        actions[0] = DOWN;
        actions[4] = DOWN;
        actions[8] = RIGHT;
        actions[9] = DOWN;
        actions[13] = RIGHT;
        actions[14] = RIGHT;
        TabularPolicy::deterministic(4, &actions)
    }

    fn chain_with_two_actions() -> MdpModel {
        // Action 1 pays 1 and terminates; action 0 idles at zero reward.
        MdpModel::new(
            2,
            2,
            vec![
                vec![Outcome {
                    next: StateId(0),
                    reward: 0.0,
                    prob: 1.0,
                }],
                vec![Outcome {
                    next: StateId(1),
                    reward: 1.0,
                    prob: 1.0,
                }],
                vec![],
                vec![],
            ],
            vec![false, true],
            vec![1.0, 0.0],
            BTreeSet::from([1]),
        )
        .unwrap()
    }

    #[test]
    fn mc_single_optimal_episode() {
        let model = frozen_lake(false);
        let cfg = EvalConfig {
            gamma: 0.9,
            episodes: 1,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let table = mc_evaluate_v(&model, &optimal_lake_policy(), &cfg, &mut rng);
        assert!((table.get(StateId(0)) - 0.9f64.powi(5)).abs() < 1e-12);
        assert!((table.get(StateId(14)) - 1.0).abs() < 1e-12);
        assert_eq!(table.counts[0], 1);
        // Never-visited states stay at their initialization.
        assert_eq!(table.get(StateId(3)), 0.0);
        assert_eq!(table.counts[3], 0);
    }

    #[test]
    fn mc_gamma_zero_averages_immediate_rewards() {
        let model = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let cfg = EvalConfig {
            gamma: 0.0,
            episodes: 20_000,
            max_steps: 100,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = mc_evaluate_v(&model, &policy, &cfg, &mut rng);
        // Exact expected immediate reward under the uniform policy.
        let oracle = dp::evaluate_policy_exact(&model, &policy, 0.0).unwrap();
        for s in 0..16 {
            if table.counts[s] > 500 {
                assert!((table.get(StateId(s)) - oracle.get(StateId(s))).abs() < 0.05);
            }
        }
    }

    #[test]
    fn mc_incremental_equals_list_averaging() {
        let model = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let cfg = EvalConfig {
            gamma: 0.9,
            episodes: 400,
            max_steps: 60,
            ..EvalConfig::default()
        };

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let incremental = mc_evaluate_v(&model, &policy, &cfg, &mut rng);

        // Same episode stream, but store every observed return in a list
        // and average at the end.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut lists: Vec<Vec<f64>> = vec![Vec::new(); 16];
        for _ in 0..cfg.episodes {
            let traj = rollout_policy(&model, &policy, cfg.max_steps, &mut rng);
            let last = traj.transitions.last().unwrap();
            // List-averaging needs the same truncation bootstrap; read it
            // from the incremental estimate exactly as the estimator does.
            let mut g = if last.truncated {
                let s = last.next_state;
                if lists[s.0].is_empty() {
                    0.0
                } else {
                    lists[s.0].iter().sum::<f64>() / lists[s.0].len() as f64
                }
            } else {
                0.0
            };
            for tr in traj.transitions.iter().rev() {
                g = cfg.gamma * g + tr.reward;
                lists[tr.state.0].push(g);
            }
        }
        for (s, list) in lists.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let mean: f64 = list.iter().sum::<f64>() / list.len() as f64;
            assert!(
                (incremental.get(StateId(s)) - mean).abs() < 1e-12,
                "state {s}: incremental {} vs list mean {mean}",
                incremental.get(StateId(s))
            );
        }
    }

    #[test]
    fn mc_q_one_step_chain() {
        let model = chain_with_two_actions();
        let policy = TabularPolicy::uniform(2, 2);
        let cfg = EvalConfig {
            gamma: 0.7,
            episodes: 50,
            max_steps: 200,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let table = mc_evaluate_q(&model, &policy, &cfg, &mut rng);
        // Every episode ends by taking action 1 from state 0.
        assert!(table.counts[1] > 0);
        assert!((table.get(StateId(0), ActionId(1)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mc_q_consistent_with_mc_v() {
        let model = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let cfg = EvalConfig {
            gamma: 0.9,
            episodes: 10_000,
            max_steps: 100,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = mc_evaluate_q(&model, &policy, &cfg, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = mc_evaluate_v(&model, &policy, &cfg, &mut rng);

        for s in 0..16 {
            if v.counts[s] < 100 {
                continue;
            }
            let from_q: f64 = (0..4)
                .map(|a| policy.prob(StateId(s), ActionId(a)) * q.get(StateId(s), ActionId(a)))
                .sum();
            assert!(
                (from_q - v.get(StateId(s))).abs() < 0.1,
                "state {s}: {from_q} vs {}",
                v.get(StateId(s))
            );
        }
    }

    #[test]
    fn td_full_overwrite_one_step_chain() {
        let model = chain_with_two_actions();
        // Only the rewarding action.
        let policy = TabularPolicy::deterministic(2, &[ActionId(1), ActionId(0)]);
        let cfg = EvalConfig {
            gamma: 0.5,
            alpha: StepSize::Constant(1.0),
            episodes: 1,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let table = td_evaluate_v(&model, &policy, &cfg, &mut rng);
        assert_eq!(table.get(StateId(0)), 1.0);
    }

    #[test]
    fn td_error_has_zero_mean_at_the_fixed_point() {
        let model = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let oracle = dp::evaluate_policy_exact(&model, &policy, 0.9).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        while n < 100_000 {
            let traj = rollout_policy(&model, &policy, 200, &mut rng);
            for tr in &traj.transitions {
                let bootstrap = if tr.terminated {
                    0.0
                } else {
                    oracle.get(tr.next_state)
                };
                let delta = tr.reward + 0.9 * bootstrap - oracle.get(tr.state);
                sum += delta;
                sum_sq += delta * delta;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let std_err = (var / n as f64).sqrt();
        assert!(
            mean.abs() <= 3.0 * std_err,
            "mean TD error {mean} exceeds 3 x standard error {std_err}"
        );
    }

    #[test]
    fn n_step_one_no_repeat_path_matches_td() {
        // The optimal path visits each state once, so the offline n = 1
        // pass and the online TD pass produce identical tables.
        let model = frozen_lake(false);
        let policy = optimal_lake_policy();
        let cfg = EvalConfig {
            gamma: 0.9,
            alpha: StepSize::Constant(0.5),
            n: 1,
            episodes: 3,
            ..EvalConfig::default()
        };
        let mut rng_a = ChaCha8Rng::seed_from_u64(6);
        let a = n_step_td_evaluate_v(&model, &policy, &cfg, &mut rng_a);
        let mut rng_b = ChaCha8Rng::seed_from_u64(6);
        let b = td_evaluate_v(&model, &policy, &cfg, &mut rng_b);
        for s in 0..16 {
            assert!((a.get(StateId(s)) - b.get(StateId(s))).abs() < 1e-12);
        }
    }

    #[test]
    fn long_n_step_single_episode_matches_mc() {
        let model = frozen_lake(false);
        let policy = optimal_lake_policy();
        let cfg = EvalConfig {
            gamma: 0.9,
            n: 1_000,
            episodes: 1,
            ..EvalConfig::default()
        };
        let mut rng_a = ChaCha8Rng::seed_from_u64(7);
        let a = n_step_td_evaluate_v(&model, &policy, &cfg, &mut rng_a);
        let mut rng_b = ChaCha8Rng::seed_from_u64(7);
        let b = mc_evaluate_v(&model, &policy, &cfg, &mut rng_b);
        for s in 0..16 {
            assert!((a.get(StateId(s)) - b.get(StateId(s))).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_half_hand_built_episode() {
        // Chain paying rewards 0, 0, 1 with gamma 1: the lambda = 0.5
        // return from the start against a zero table is 0.25, and a first
        // visit overwrites exactly.
        let model = MdpModel::new(
            4,
            1,
            vec![
                vec![Outcome {
                    next: StateId(1),
                    reward: 0.0,
                    prob: 1.0,
                }],
                vec![Outcome {
                    next: StateId(2),
                    reward: 0.0,
                    prob: 1.0,
                }],
                vec![Outcome {
                    next: StateId(3),
                    reward: 1.0,
                    prob: 1.0,
                }],
                vec![],
            ],
            vec![false, false, false, true],
            vec![1.0, 0.0, 0.0, 0.0],
            BTreeSet::from([3]),
        )
        .unwrap();
        let policy = TabularPolicy::uniform(4, 1);
        let cfg = EvalConfig {
            gamma: 1.0,
            lambda: 0.5,
            episodes: 1,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let table = td_lambda_evaluate_v(&model, &policy, &cfg, &mut rng);
        assert!((table.get(StateId(0)) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn lambda_one_single_episode_matches_mc() {
        let model = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let cfg = EvalConfig {
            gamma: 0.9,
            lambda: 1.0,
            episodes: 200,
            max_steps: 80,
            ..EvalConfig::default()
        };
        let mut rng_a = ChaCha8Rng::seed_from_u64(9);
        let a = td_lambda_evaluate_v(&model, &policy, &cfg, &mut rng_a);
        let mut rng_b = ChaCha8Rng::seed_from_u64(9);
        let b = mc_evaluate_v(&model, &policy, &cfg, &mut rng_b);
        for s in 0..16 {
            assert!(
                (a.get(StateId(s)) - b.get(StateId(s))).abs() < 1e-9,
                "state {s}: {} vs {}",
                a.get(StateId(s)),
                b.get(StateId(s))
            );
        }
    }

    #[test]
    fn mc_control_two_state_chain() {
        let model = chain_with_two_actions();
        let cfg = EvalConfig {
            gamma: 0.9,
            alpha: StepSize::Harmonic,
            episodes: 200,
            max_steps: 50,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (policy, q) = mc_control_gpi(&model, &cfg, 0.2, &mut rng);
        assert_eq!(policy.greedy_actions()[0], ActionId(1));
        assert!((q.get(StateId(0), ActionId(1)) - 1.0).abs() < 0.05);
    }

    #[test]
    fn mc_control_solves_the_lake() {
        let model = frozen_lake(false);
        let cfg = EvalConfig {
            gamma: 0.9,
            alpha: StepSize::Constant(0.15),
            episodes: 3_000,
            max_steps: 100,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (policy, _) = mc_control_gpi(&model, &cfg, 0.3, &mut rng);
        let success = dp::goal_success_probability(&model, &policy);
        assert_eq!(success, 1.0);
    }

    #[test]
    fn never_truncated_when_terminal_hit() {
        let model = frozen_lake(false);
        let policy = optimal_lake_policy();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        // Exactly at the budget: termination wins over truncation.
        let traj = rollout_policy(&model, &policy, 6, &mut rng);
        assert!(traj.terminated() && !traj.truncated());
    }
}
