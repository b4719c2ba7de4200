//! Explicit tabular MDPs, trajectories, and the frozen-lake environment.
//!
//! Models are immutable after construction and carry their full dynamics
//! `p(s', r | s, a)` as outcome lists, so every estimator in this crate can
//! be checked against exact dynamic programming on the same object.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Index of a state in `0..n_states`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StateId(pub usize);

/// Index of an action in `0..n_actions`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One entry of the transition model: reach `next` with `reward`, with
/// probability `prob`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub next: StateId,
    pub reward: f64,
    pub prob: f64,
}

/// Tolerance for probability rows summing to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("outgoing probabilities for state {state} action {action} sum to {sum}, expected 1")]
    BadOutcomeSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    #[error("terminal state {0} has outgoing dynamics")]
    TerminalHasDynamics(usize),
    #[error("initial distribution sums to {0}, expected 1")]
    BadInitialDist(f64),
    #[error("probability {prob} out of [0, 1] for state {state} action {action}")]
    BadProbability {
        state: usize,
        action: usize,
        prob: f64,
    },
    #[error("cannot step from terminal state {0}")]
    StepFromTerminal(usize),
    #[error("policy row for state {state} sums to {sum}, expected 1")]
    BadPolicyRow { state: usize, sum: f64 },
}

/// Explicit dynamics `p(s', r | s, a)` over finite state and action sets.
///
/// Terminal states carry no outgoing entries; every non-terminal `(s, a)`
/// row sums to one within [`PROB_SUM_TOL`].
#[derive(Clone, Debug)]
pub struct MdpModel {
    n_states: usize,
    n_actions: usize,
    // Indexed by s * n_actions + a. Empty for terminal states.
    dynamics: Vec<Vec<Outcome>>,
    terminal: Vec<bool>,
    initial_dist: Vec<f64>,
    // States whose entry counts as success for reporting and for the
    // absorption-probability oracle. May be empty.
    success_states: BTreeSet<usize>,
}

impl MdpModel {
    /// Validates row sums, terminal emptiness, and the initial distribution.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        dynamics: Vec<Vec<Outcome>>,
        terminal: Vec<bool>,
        initial_dist: Vec<f64>,
        success_states: BTreeSet<usize>,
    ) -> Result<Self, MdpError> {
        assert_eq!(dynamics.len(), n_states * n_actions);
        assert_eq!(terminal.len(), n_states);
        assert_eq!(initial_dist.len(), n_states);

        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &dynamics[s * n_actions + a];
                if terminal[s] {
                    if !row.is_empty() {
                        return Err(MdpError::TerminalHasDynamics(s));
                    }
                    continue;
                }
                let mut sum = 0.0;
                for o in row {
                    if !(0.0..=1.0).contains(&o.prob) {
                        return Err(MdpError::BadProbability {
                            state: s,
                            action: a,
                            prob: o.prob,
                        });
                    }
                    sum += o.prob;
                }
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    return Err(MdpError::BadOutcomeSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }

        let dist_sum: f64 = initial_dist.iter().sum();
        if (dist_sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(MdpError::BadInitialDist(dist_sum));
        }

        Ok(Self {
            n_states,
            n_actions,
            dynamics,
            terminal,
            initial_dist,
            success_states,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.0]
    }

    pub fn outcomes(&self, s: StateId, a: ActionId) -> &[Outcome] {
        &self.dynamics[s.0 * self.n_actions + a.0]
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn success_states(&self) -> &BTreeSet<usize> {
        &self.success_states
    }

    pub fn is_success(&self, s: StateId) -> bool {
        self.success_states.contains(&s.0)
    }

    /// Probability of transitioning to `next` with reward `reward`.
    pub fn transition_prob(&self, s: StateId, a: ActionId, next: StateId, reward: f64) -> f64 {
        self.outcomes(s, a)
            .iter()
            .filter(|o| o.next == next && o.reward == reward)
            .map(|o| o.prob)
            .sum()
    }

    /// Expected immediate reward for taking `a` in `s`.
    pub fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.outcomes(s, a).iter().map(|o| o.prob * o.reward).sum()
    }

    pub fn sample_initial<R: Rng>(&self, rng: &mut R) -> StateId {
        StateId(sample_index(&self.initial_dist, rng))
    }

    /// Line-oriented debug dump: header `MDP v1 n_states n_actions`, then
    /// one `s a s' reward prob` entry per line.
    pub fn dump(&self) -> String {
        let mut out = format!("MDP v1 {} {}\n", self.n_states, self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                for o in self.outcomes(StateId(s), ActionId(a)) {
                    out.push_str(&format!(
                        "{} {} {} {} {}\n",
                        s, a, o.next.0, o.reward, o.prob
                    ));
                }
            }
        }
        out
    }
}

/// Draws an index from an (assumed normalized) probability vector.
fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // Floating-point shortfall: fall back to the last positive entry.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("probability vector has no positive entry")
}

/// One environment step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: StateId,
    pub action: ActionId,
    pub reward: f64,
    pub next_state: StateId,
    pub terminated: bool,
    pub truncated: bool,
}

/// An ordered episode record, optionally carrying the sampler's log-probs
/// and value estimates in parallel arrays.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub log_probs: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn terminated(&self) -> bool {
        self.transitions.last().is_some_and(|t| t.terminated)
    }

    pub fn truncated(&self) -> bool {
        self.transitions.last().is_some_and(|t| t.truncated)
    }
}

/// A stochastic tabular policy: one probability row per state.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    /// Validates that each row is a distribution (entries in [0, 1], sum
    /// within [`PROB_SUM_TOL`] of one).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, MdpError> {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_actions, "ragged policy rows");
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(MdpError::BadPolicyRow { state: s, sum });
            }
            probs.extend_from_slice(row);
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Mass 1 on `actions[s]` for each state.
    pub fn deterministic(n_actions: usize, actions: &[ActionId]) -> Self {
        let n_states = actions.len();
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, a) in actions.iter().enumerate() {
            probs[s * n_actions + a.0] = 1.0;
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    /// Mixes a greedy action with uniform exploration: the greedy action
    /// keeps `1 - eps + eps/|A|`, every other action gets `eps/|A|`.
    pub fn epsilon_greedy(n_actions: usize, greedy: &[ActionId], eps: f64) -> Self {
        let n_states = greedy.len();
        let explore = eps / n_actions as f64;
        let mut probs = vec![explore; n_states * n_actions];
        for (s, a) in greedy.iter().enumerate() {
            probs[s * n_actions + a.0] += 1.0 - eps;
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: StateId, a: ActionId) -> f64 {
        self.probs[s.0 * self.n_actions + a.0]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.probs[s.0 * self.n_actions..(s.0 + 1) * self.n_actions]
    }

    pub fn sample_action<R: Rng>(&self, s: StateId, rng: &mut R) -> ActionId {
        ActionId(sample_index(self.row(s), rng))
    }

    /// Greedy action per state (lowest index wins ties on probabilities).
    pub fn greedy_actions(&self) -> Vec<ActionId> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(StateId(s));
                let mut best = 0;
                for (a, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = a;
                    }
                }
                ActionId(best)
            })
            .collect()
    }
}

/// What a rollout sampler returns for one decision.
#[derive(Clone, Copy, Debug)]
pub struct SampledAction {
    pub action: ActionId,
    pub log_prob: Option<f64>,
    pub value: Option<f64>,
}

impl SampledAction {
    pub fn plain(action: ActionId) -> Self {
        Self {
            action,
            log_prob: None,
            value: None,
        }
    }
}

/// Samples one transition from the model.
///
/// Stepping from a terminal state is a usage error.
pub fn step<R: Rng>(
    model: &MdpModel,
    s: StateId,
    a: ActionId,
    rng: &mut R,
) -> Result<Transition, MdpError> {
    if model.is_terminal(s) {
        return Err(MdpError::StepFromTerminal(s.0));
    }
    let outcomes = model.outcomes(s, a);
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut chosen = outcomes.len() - 1;
    for (i, o) in outcomes.iter().enumerate() {
        cum += o.prob;
        if u < cum {
            chosen = i;
            break;
        }
    }
    let o = outcomes[chosen];
    Ok(Transition {
        state: s,
        action: a,
        reward: o.reward,
        next_state: o.next,
        terminated: model.is_terminal(o.next),
        truncated: false,
    })
}

/// Plays `sampler` against the model until termination or `max_len` steps.
///
/// The trajectory ends with `terminated = true` when a terminal state is
/// entered, otherwise with `truncated = true` on the final step. Aux arrays
/// are filled when the sampler provides log-probs / value estimates.
pub fn rollout<R, F>(model: &MdpModel, mut sampler: F, max_len: usize, rng: &mut R) -> Trajectory
where
    R: Rng,
    F: FnMut(StateId, &mut R) -> SampledAction,
{
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut s = model.sample_initial(rng);
    assert!(!model.is_terminal(s), "initial state must be non-terminal");

    let mut transitions = Vec::new();
    let mut log_probs = Vec::new();
    let mut values = Vec::new();
    let mut has_log_probs = true;
    let mut has_values = true;

    for t in 0..max_len {
        let sampled = sampler(s, rng);
        let mut tr = step(model, s, sampled.action, rng).expect("rollout stepped from terminal");
        match sampled.log_prob {
            Some(lp) => log_probs.push(lp),
            None => has_log_probs = false,
        }
        match sampled.value {
            Some(v) => values.push(v),
            None => has_values = false,
        }
        if !tr.terminated && t + 1 == max_len {
            tr.truncated = true;
        }
        let done = tr.terminated || tr.truncated;
        transitions.push(tr);
        if done {
            break;
        }
        s = tr.next_state;
    }

    Trajectory {
        transitions,
        log_probs: has_log_probs.then_some(log_probs),
        values: has_values.then_some(values),
    }
}

/// Rollout helper for plain tabular policies.
pub fn rollout_policy<R: Rng>(
    model: &MdpModel,
    policy: &TabularPolicy,
    max_len: usize,
    rng: &mut R,
) -> Trajectory {
    rollout(
        model,
        |s, rng| SampledAction::plain(policy.sample_action(s, rng)),
        max_len,
        rng,
    )
}

pub const FROZEN_LAKE_SIZE: usize = 4;
pub const FROZEN_LAKE_GOAL: usize = 15;
pub const FROZEN_LAKE_HOLES: [usize; 4] = [5, 7, 11, 12];

pub const LEFT: ActionId = ActionId(0);
pub const DOWN: ActionId = ActionId(1);
pub const RIGHT: ActionId = ActionId(2);
pub const UP: ActionId = ActionId(3);

/// Grid move with clamping at the borders: off-grid moves keep the state.
fn lake_move(s: usize, dir: usize) -> usize {
    let (row, col) = (s / FROZEN_LAKE_SIZE, s % FROZEN_LAKE_SIZE);
    let (row, col) = match dir {
        0 => (row, col.saturating_sub(1)),
        1 => ((row + 1).min(FROZEN_LAKE_SIZE - 1), col),
        2 => (row, (col + 1).min(FROZEN_LAKE_SIZE - 1)),
        3 => (row.saturating_sub(1), col),
        _ => unreachable!("action out of range"),
    };
    row * FROZEN_LAKE_SIZE + col
}

/// The 4x4 frozen lake: start at 0, holes {5, 7, 11, 12}, goal 15, reward
/// +1 only on transitions entering the goal.
///
/// With `slippery`, the intended direction is taken with probability 0.8
/// and each of the two unintended directions with 0.1. The unintended
/// directions for action `a` are `a+1` and `a+2` in the cycle
/// left -> down -> right -> up; from 14 moving right this puts the slips
/// at 13 and 10, with `p(15, r=1) = 0.8` and `p(13, r=0) = 0.1`.
pub fn frozen_lake(slippery: bool) -> MdpModel {
    let n_states = FROZEN_LAKE_SIZE * FROZEN_LAKE_SIZE;
    let n_actions = 4;
    let mut terminal = vec![false; n_states];
    terminal[FROZEN_LAKE_GOAL] = true;
    for h in FROZEN_LAKE_HOLES {
        terminal[h] = true;
    }

    let mut dynamics = vec![Vec::new(); n_states * n_actions];
    for s in 0..n_states {
        if terminal[s] {
            continue;
        }
        for a in 0..n_actions {
            let moves: Vec<(usize, f64)> = if slippery {
                vec![(a, 0.8), ((a + 1) % 4, 0.1), ((a + 2) % 4, 0.1)]
            } else {
                vec![(a, 1.0)]
            };
            let mut row: Vec<Outcome> = Vec::new();
            for (dir, prob) in moves {
                let next = lake_move(s, dir);
                let reward = if next == FROZEN_LAKE_GOAL { 1.0 } else { 0.0 };
                match row
                    .iter_mut()
                    .find(|o| o.next.0 == next && o.reward == reward)
                {
                    Some(o) => o.prob += prob,
                    None => row.push(Outcome {
                        next: StateId(next),
                        reward,
                        prob,
                    }),
                }
            }
            row.sort_by_key(|x| x.next);
            dynamics[s * n_actions + a] = row;
        }
    }

    let mut initial = vec![0.0; n_states];
    initial[0] = 1.0;

    MdpModel::new(
        n_states,
        n_actions,
        dynamics,
        terminal,
        initial,
        BTreeSet::from([FROZEN_LAKE_GOAL]),
    )
    .expect("frozen lake model is valid by construction")
}

/// Seeded random MDP for oracle-based property tests.
///
/// The last state is terminal; every other `(s, a)` row is a normalized
/// random distribution over all states with rewards uniform in [0, 1].
/// Episodes start at state 0.
pub fn random_mdp(n_states: usize, n_actions: usize, seed: u64) -> MdpModel {
    assert!(n_states >= 2, "need at least one non-terminal state");
    assert!(n_actions >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut terminal = vec![false; n_states];
    terminal[n_states - 1] = true;

    let mut dynamics = vec![Vec::new(); n_states * n_actions];
    for s in 0..n_states - 1 {
        for a in 0..n_actions {
            let weights: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            dynamics[s * n_actions + a] = (0..n_states)
                .map(|next| Outcome {
                    next: StateId(next),
                    reward: rng.gen::<f64>(),
                    prob: weights[next] / total,
                })
                .collect();
        }
    }

    let mut initial = vec![0.0; n_states];
    initial[0] = 1.0;

    MdpModel::new(
        n_states,
        n_actions,
        dynamics,
        terminal,
        initial,
        BTreeSet::from([n_states - 1]),
    )
    .expect("random model is normalized by construction")
}
