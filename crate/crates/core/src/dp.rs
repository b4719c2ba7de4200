//! Exact dynamic programming over explicit models.
//!
//! Policy evaluation is solved as a dense linear system (Gaussian
//! elimination with partial pivoting); value iteration and policy iteration
//! build on it. These are the ground-truth oracles the sampling estimators
//! are tested against, including the absorption-probability solve used as
//! the exact success-rate metric.

use thiserror::Error;

use crate::mdp::{ActionId, MdpModel, StateId, TabularPolicy};

/// Per-state values; zero at terminal states.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueVector {
    values: Vec<f64>,
}

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n_states: usize) -> Self {
        Self {
            values: vec![0.0; n_states],
        }
    }

    pub fn get(&self, s: StateId) -> f64 {
        self.values[s.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &ValueVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV dump `state,value`, one row per state.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,value\n");
        for (s, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{s},{v}\n"));
        }
        out
    }
}

/// Per-(state, action) values; terminal rows are all zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QMatrix {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
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

    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.values[s.0 * self.n_actions + a.0] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.values[s.0 * self.n_actions..(s.0 + 1) * self.n_actions]
    }

    /// CSV dump `state,action,value`, row-major.
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

/// Convergence settings for the iterative solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpiConfig {
    pub gamma: f64,
    pub delta: f64,
    pub max_sweeps: usize,
}

impl Default for GpiConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            delta: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum DpError {
    #[error(
        "singular evaluation system: model is not episodic under this policy at gamma={gamma}"
    )]
    NonEpisodic { gamma: f64 },
    #[error("no convergence after {sweeps} sweeps; last residual {residual}")]
    NoConvergence { sweeps: usize, residual: f64 },
}

/// Dense Gaussian elimination with partial pivoting. `a` is row-major.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

/// Exact policy evaluation: the unique fixed point of
/// `V(s) = sum_a pi(a|s) sum_{s',r} p(s',r|s,a) [r + gamma V(s')]`,
/// solved as a dense linear system. Terminal states get value 0.
pub fn evaluate_policy_exact(
    model: &MdpModel,
    policy: &TabularPolicy,
    gamma: f64,
) -> Result<ValueVector, DpError> {
    let n = model.n_states();
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];

    for s in 0..n {
        a[s * n + s] = 1.0;
        if model.is_terminal(StateId(s)) {
            continue;
        }
        for act in 0..model.n_actions() {
            let pi = policy.prob(StateId(s), ActionId(act));
            if pi == 0.0 {
                continue;
            }
            for o in model.outcomes(StateId(s), ActionId(act)) {
                a[s * n + o.next.0] -= gamma * pi * o.prob;
                b[s] += pi * o.prob * o.reward;
            }
        }
    }

    solve_dense(a, b, n)
        .map(ValueVector::new)
        .ok_or(DpError::NonEpisodic { gamma })
}

/// `Q(s,a) = sum_{s',r} p(s',r|s,a) [r + gamma v(s')]`; terminal rows zero.
pub fn q_from_v(model: &MdpModel, v: &ValueVector, gamma: f64) -> QMatrix {
    let mut q = QMatrix::zeros(model.n_states(), model.n_actions());
    for s in 0..model.n_states() {
        if model.is_terminal(StateId(s)) {
            continue;
        }
        for a in 0..model.n_actions() {
            let total: f64 = model
                .outcomes(StateId(s), ActionId(a))
                .iter()
                .map(|o| o.prob * (o.reward + gamma * v.get(o.next)))
                .sum();
            q.set(StateId(s), ActionId(a), total);
        }
    }
    q
}

/// `V(s) = sum_a pi(a|s) Q(s,a)`.
pub fn v_from_q(policy: &TabularPolicy, q: &QMatrix) -> ValueVector {
    assert_eq!(policy.n_states(), q.n_states());
    assert_eq!(policy.n_actions(), q.n_actions());
    let values = (0..q.n_states())
        .map(|s| {
            (0..q.n_actions())
                .map(|a| policy.prob(StateId(s), ActionId(a)) * q.get(StateId(s), ActionId(a)))
                .sum()
        })
        .collect();
    ValueVector::new(values)
}

/// `A(s,a) = Q(s,a) - V(s)` under the exact evaluation of `policy`.
pub fn advantage_exact(
    model: &MdpModel,
    policy: &TabularPolicy,
    gamma: f64,
) -> Result<QMatrix, DpError> {
    let v = evaluate_policy_exact(model, policy, gamma)?;
    let q = q_from_v(model, &v, gamma);
    let mut adv = QMatrix::zeros(model.n_states(), model.n_actions());
    for s in 0..model.n_states() {
        if model.is_terminal(StateId(s)) {
            continue;
        }
        for a in 0..model.n_actions() {
            adv.set(
                StateId(s),
                ActionId(a),
                q.get(StateId(s), ActionId(a)) - v.get(StateId(s)),
            );
        }
    }
    Ok(adv)
}

/// Deterministic policy putting mass 1 on the lowest-indexed maximizer of
/// each Q row.
pub fn greedy_improvement(q: &QMatrix) -> TabularPolicy {
    let actions: Vec<ActionId> = (0..q.n_states())
        .map(|s| {
            let row = q.row(StateId(s));
            let mut best = 0;
            for (a, &val) in row.iter().enumerate() {
                if val > row[best] {
                    best = a;
                }
            }
            ActionId(best)
        })
        .collect();
    TabularPolicy::deterministic(q.n_actions(), &actions)
}

/// Iterates `V <- max_a sum p(s',r|s,a) [r + gamma V(s')]` until the
/// max-change drops to `cfg.delta`, then returns the value table and its
/// greedy policy.
pub fn value_iteration(
    model: &MdpModel,
    cfg: &GpiConfig,
) -> Result<(ValueVector, TabularPolicy), DpError> {
    let n = model.n_states();
    let mut v = vec![0.0; n];
    let mut residual = f64::INFINITY;

    for _ in 0..cfg.max_sweeps {
        residual = 0.0;
        let mut next = vec![0.0; n];
        for s in 0..n {
            if model.is_terminal(StateId(s)) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..model.n_actions() {
                let total: f64 = model
                    .outcomes(StateId(s), ActionId(a))
                    .iter()
                    .map(|o| o.prob * (o.reward + cfg.gamma * v[o.next.0]))
                    .sum();
                best = best.max(total);
            }
            next[s] = best;
            residual = residual.max((next[s] - v[s]).abs());
        }
        v = next;
        if residual <= cfg.delta {
            let values = ValueVector::new(v);
            let policy = greedy_improvement(&q_from_v(model, &values, cfg.gamma));
            return Ok((values, policy));
        }
    }

    Err(DpError::NoConvergence {
        sweeps: cfg.max_sweeps,
        residual,
    })
}

/// Alternates exact evaluation and greedy improvement from a uniform
/// starting policy until the policy is stable.
pub fn policy_iteration(
    model: &MdpModel,
    cfg: &GpiConfig,
) -> Result<(TabularPolicy, ValueVector), DpError> {
    let uniform = TabularPolicy::uniform(model.n_states(), model.n_actions());
    policy_iteration_from(model, cfg, uniform)
}

/// Policy iteration from an explicit starting policy.
pub fn policy_iteration_from(
    model: &MdpModel,
    cfg: &GpiConfig,
    initial: TabularPolicy,
) -> Result<(TabularPolicy, ValueVector), DpError> {
    let mut policy = initial;
    for _ in 0..cfg.max_sweeps {
        let v = evaluate_policy_exact(model, &policy, cfg.gamma)?;
        let improved = greedy_improvement(&q_from_v(model, &v, cfg.gamma));
        if improved == policy {
            return Ok((policy, v));
        }
        policy = improved;
    }
    Err(DpError::NoConvergence {
        sweeps: cfg.max_sweeps,
        residual: f64::NAN,
    })
}

/// Exact probability of eventually entering one of `targets` under
/// `policy`, per start state.
///
/// States from which no target is reachable get probability 0 outright;
/// the remaining states form a transient system that is solved exactly.
pub fn absorption_probabilities(
    model: &MdpModel,
    policy: &TabularPolicy,
    targets: &[StateId],
) -> Vec<f64> {
    let n = model.n_states();
    let is_target: Vec<bool> = {
        let mut v = vec![false; n];
        for t in targets {
            v[t.0] = true;
        }
        v
    };

    // Markov chain under the policy, support only.
    let mut chain = vec![0.0; n * n];
    for s in 0..n {
        if model.is_terminal(StateId(s)) {
            continue;
        }
        for a in 0..model.n_actions() {
            let pi = policy.prob(StateId(s), ActionId(a));
            if pi == 0.0 {
                continue;
            }
            for o in model.outcomes(StateId(s), ActionId(a)) {
                chain[s * n + o.next.0] += pi * o.prob;
            }
        }
    }

    // Backward reachability from the targets.
    let mut can_reach = is_target.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if can_reach[s] || model.is_terminal(StateId(s)) {
                continue;
            }
            if (0..n).any(|next| chain[s * n + next] > 0.0 && can_reach[next]) {
                can_reach[s] = true;
                changed = true;
            }
        }
    }

    // Unknowns: non-terminal states that can reach a target. Everything in
    // a closed class away from the targets is exactly 0.
    let unknowns: Vec<usize> = (0..n)
        .filter(|&s| can_reach[s] && !model.is_terminal(StateId(s)))
        .collect();
    let index_of: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (i, &s) in unknowns.iter().enumerate() {
            v[s] = Some(i);
        }
        v
    };

    let m = unknowns.len();
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for (i, &s) in unknowns.iter().enumerate() {
        a[i * m + i] = 1.0;
        for next in 0..n {
            let p = chain[s * n + next];
            if p == 0.0 {
                continue;
            }
            if is_target[next] {
                b[i] += p;
            } else if let Some(j) = index_of[next] {
                a[i * m + j] -= p;
            }
        }
    }

    let h = solve_dense(a, b, m).expect("transient absorption system is nonsingular");
    let mut out = vec![0.0; n];
    for (i, &s) in unknowns.iter().enumerate() {
        // Probabilities by construction; shave off solver rounding.
        out[s] = h[i].clamp(0.0, 1.0);
    }
    for t in targets {
        out[t.0] = 1.0;
    }
    out
}

/// Absorption probability weighted by the model's initial distribution.
pub fn success_probability(model: &MdpModel, policy: &TabularPolicy, targets: &[StateId]) -> f64 {
    let h = absorption_probabilities(model, policy, targets);
    model
        .initial_dist()
        .iter()
        .zip(&h)
        .map(|(p, v)| p * v)
        .sum()
}

/// Success probability against the model's own success set.
pub fn goal_success_probability(model: &MdpModel, policy: &TabularPolicy) -> f64 {
    let targets: Vec<StateId> = model.success_states().iter().map(|&s| StateId(s)).collect();
    success_probability(model, policy, &targets)
}

/// Componentwise Bellman residual of `v` under `policy`:
/// `max_s |V(s) - sum_a pi sum p [r + gamma V(s')]|`.
pub fn bellman_residual(
    model: &MdpModel,
    policy: &TabularPolicy,
    v: &ValueVector,
    gamma: f64,
) -> f64 {
    let backup = v_from_q(policy, &q_from_v(model, v, gamma));
    backup.max_abs_diff(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{frozen_lake, random_mdp, Outcome, RIGHT};
    use std::collections::BTreeSet;

    /// Two-state chain: s0 steps to terminal s1 with reward 1.
    fn one_step_chain() -> MdpModel {
        MdpModel::new(
            2,
            1,
            vec![
                vec![Outcome {
                    next: StateId(1),
                    reward: 1.0,
                    prob: 1.0,
                }],
                vec![],
            ],
            vec![false, true],
            vec![1.0, 0.0],
            BTreeSet::from([1]),
        )
        .unwrap()
    }

    /// Non-terminal self-loop, for singularity checks at gamma = 1.
    fn self_loop() -> MdpModel {
        MdpModel::new(
            2,
            1,
            vec![
                vec![Outcome {
                    next: StateId(0),
                    reward: 0.5,
                    prob: 1.0,
                }],
                vec![],
            ],
            vec![false, true],
            vec![1.0, 0.0],
            BTreeSet::new(),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_chain_exactly() {
        let m = one_step_chain();
        let policy = TabularPolicy::uniform(2, 1);
        let v = evaluate_policy_exact(&m, &policy, 0.9).unwrap();
        assert!((v.get(StateId(0)) - 1.0).abs() < 1e-15);
        assert_eq!(v.get(StateId(1)), 0.0);
    }

    #[test]
    fn gamma_zero_is_expected_immediate_reward() {
        let m = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let v = evaluate_policy_exact(&m, &policy, 0.0).unwrap();
        for s in 0..16 {
            let expected: f64 = (0..4)
                .map(|a| 0.25 * m.expected_reward(StateId(s), ActionId(a)))
                .sum();
            let expected = if m.is_terminal(StateId(s)) {
                0.0
            } else {
                expected
            };
            assert!((v.get(StateId(s)) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_system_reports_non_episodic() {
        let m = self_loop();
        let policy = TabularPolicy::uniform(2, 1);
        let err = evaluate_policy_exact(&m, &policy, 1.0).unwrap_err();
        assert!(matches!(err, DpError::NonEpisodic { .. }));
    }

    #[test]
    fn gamma_one_is_fine_for_episodic_chains() {
        let m = one_step_chain();
        let policy = TabularPolicy::uniform(2, 1);
        let v = evaluate_policy_exact(&m, &policy, 1.0).unwrap();
        assert!((v.get(StateId(0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_from_v_terminal_rows_zero() {
        let m = frozen_lake(false);
        let policy = TabularPolicy::uniform(16, 4);
        let v = evaluate_policy_exact(&m, &policy, 0.9).unwrap();
        let q = q_from_v(&m, &v, 0.9);
        for s in [5, 7, 11, 12, 15] {
            for a in 0..4 {
                assert_eq!(q.get(StateId(s), ActionId(a)), 0.0);
            }
        }
    }

    #[test]
    fn q_into_goal_is_one() {
        let m = frozen_lake(false);
        let cfg = GpiConfig {
            gamma: 0.9,
            delta: 1e-12,
            max_sweeps: 10_000,
        };
        let (v, _) = value_iteration(&m, &cfg).unwrap();
        let q = q_from_v(&m, &v, 0.9);
        // Entering the goal pays 1 and the goal itself is worth 0.
        assert!((q.get(StateId(14), RIGHT) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn v_from_q_weighted_average() {
        let mut q = QMatrix::zeros(1, 4);
        for (a, val) in [0.0, 0.0, 0.0, 4.0].into_iter().enumerate() {
            q.set(StateId(0), ActionId(a), val);
        }
        let uniform = TabularPolicy::uniform(1, 4);
        let v = v_from_q(&uniform, &q);
        assert!((v.get(StateId(0)) - 1.0).abs() < 1e-15);

        let det = TabularPolicy::deterministic(4, &[ActionId(3)]);
        let v = v_from_q(&det, &q);
        assert!((v.get(StateId(0)) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn v_from_q_three_action_mix() {
        // Action distribution (0.5, 0.25, 0.25) over three actions.
        let mut q = QMatrix::zeros(1, 3);
        q.set(StateId(0), ActionId(0), 0.72);
        q.set(StateId(0), ActionId(1), 0.1);
        q.set(StateId(0), ActionId(2), 0.3);
        let policy = TabularPolicy::from_rows(vec![vec![0.5, 0.25, 0.25]]).unwrap();
        let v = v_from_q(&policy, &q);
        let expected = 0.5 * 0.72 + 0.25 * 0.1 + 0.25 * 0.3;
        assert!((v.get(StateId(0)) - expected).abs() < 1e-15);
    }

    #[test]
    fn q_v_round_trip_reproduces_evaluation() {
        let m = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let v = evaluate_policy_exact(&m, &policy, 0.9).unwrap();
        let q = q_from_v(&m, &v, 0.9);
        let v2 = v_from_q(&policy, &q);
        assert!(v.max_abs_diff(&v2) < 1e-12);
    }

    #[test]
    fn advantage_is_centered_and_zero_for_deterministic() {
        let m = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let adv = advantage_exact(&m, &policy, 0.9).unwrap();
        for s in 0..16 {
            let mean: f64 = (0..4)
                .map(|a| policy.prob(StateId(s), ActionId(a)) * adv.get(StateId(s), ActionId(a)))
                .sum();
            assert!(mean.abs() < 1e-12, "advantage row {s} not centered: {mean}");
        }

        // A deterministic policy has zero advantage on its chosen action.
        let det = TabularPolicy::deterministic(4, &[RIGHT; 16]);
        let adv = advantage_exact(&m, &det, 0.9).unwrap();
        for s in 0..16 {
            if !m.is_terminal(StateId(s)) {
                assert!(adv.get(StateId(s), RIGHT).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn advantage_favors_moving_right_at_fourteen() {
        let m = frozen_lake(true);
        let policy = TabularPolicy::uniform(16, 4);
        let adv = advantage_exact(&m, &policy, 0.9).unwrap();
        let row = adv.row(StateId(14));
        let best = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, RIGHT.0);
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let mut q = QMatrix::zeros(2, 4);
        for (a, val) in [0.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
            q.set(StateId(0), ActionId(a), val);
        }
        for (a, val) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            q.set(StateId(1), ActionId(a), val);
        }
        let policy = greedy_improvement(&q);
        assert_eq!(policy.greedy_actions()[0], ActionId(1));
        assert_eq!(policy.greedy_actions()[1], ActionId(3));
    }

    #[test]
    fn value_iteration_shortest_path_values() {
        let m = frozen_lake(false);
        let cfg = GpiConfig {
            gamma: 0.9,
            delta: 1e-12,
            max_sweeps: 10_000,
        };
        let (v, policy) = value_iteration(&m, &cfg).unwrap();
        assert!((v.get(StateId(14)) - 1.0).abs() < 1e-9);
        assert!((v.get(StateId(13)) - 0.9).abs() < 1e-9);
        // The greedy policy must actually reach the goal.
        assert!((goal_success_probability(&m, &policy) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn value_iteration_gamma_zero_one_sweep() {
        let m = frozen_lake(false);
        let cfg = GpiConfig {
            gamma: 0.0,
            delta: 1e-12,
            max_sweeps: 5,
        };
        let (v, _) = value_iteration(&m, &cfg).unwrap();
        for s in 0..16 {
            let expected = (0..4)
                .map(|a| m.expected_reward(StateId(s), ActionId(a)))
                .fold(f64::NEG_INFINITY, f64::max);
            let expected = if m.is_terminal(StateId(s)) {
                0.0
            } else {
                expected
            };
            assert!((v.get(StateId(s)) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn value_iteration_reports_non_convergence() {
        let m = frozen_lake(true);
        let cfg = GpiConfig {
            gamma: 0.99,
            delta: 1e-14,
            max_sweeps: 3,
        };
        let err = value_iteration(&m, &cfg).unwrap_err();
        assert!(matches!(err, DpError::NoConvergence { sweeps: 3, .. }));
    }

    #[test]
    fn policy_iteration_fixed_point_stops_immediately() {
        let m = frozen_lake(false);
        let cfg = GpiConfig {
            gamma: 0.9,
            delta: 1e-12,
            max_sweeps: 1_000,
        };
        let (_, optimal_policy) = value_iteration(&m, &cfg).unwrap();
        // Starting from the optimum, one improvement step leaves it alone.
        let (stable, _) = policy_iteration_from(&m, &cfg, optimal_policy.clone()).unwrap();
        assert_eq!(stable, optimal_policy);
    }

    #[test]
    fn policy_iteration_matches_value_iteration() {
        let cfg = GpiConfig {
            gamma: 0.9,
            delta: 1e-13,
            max_sweeps: 100_000,
        };
        for model in [frozen_lake(false), random_mdp(5, 2, 9)] {
            let (vi_v, _) = value_iteration(&model, &cfg).unwrap();
            let (_, pi_v) = policy_iteration(&model, &cfg).unwrap();
            assert!(vi_v.max_abs_diff(&pi_v) < 1e-9);
        }
    }

    #[test]
    fn evaluation_satisfies_bellman_residual() {
        let m = random_mdp(7, 3, 123);
        let policy = TabularPolicy::uniform(7, 3);
        let v = evaluate_policy_exact(&m, &policy, 0.9).unwrap();
        assert!(bellman_residual(&m, &policy, &v, 0.9) <= 1e-9);
    }

    #[test]
    fn absorption_of_optimal_policy_is_one() {
        let m = frozen_lake(false);
        let cfg = GpiConfig {
            gamma: 0.9,
            delta: 1e-12,
            max_sweeps: 10_000,
        };
        let (_, policy) = value_iteration(&m, &cfg).unwrap();
        let h = absorption_probabilities(&m, &policy, &[StateId(15)]);
        assert_eq!(h[0], 1.0);
        // Holes can never reach the goal.
        assert_eq!(h[5], 0.0);
    }

    #[test]
    fn absorption_handles_policies_that_never_terminate() {
        let m = frozen_lake(false);
        // Always pushing up from the start row loops forever.
        let policy = TabularPolicy::deterministic(4, &[crate::mdp::UP; 16]);
        let p = goal_success_probability(&m, &policy);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn csv_dumps_have_expected_shape() {
        let v = ValueVector::new(vec![0.5, 0.25]);
        assert_eq!(v.to_csv(), "state,value\n0,0.5\n1,0.25\n");
        let mut q = QMatrix::zeros(1, 2);
        q.set(StateId(0), ActionId(1), 1.5);
        assert_eq!(q.to_csv(), "state,action,value\n0,0,0\n0,1,1.5\n");
    }
}
