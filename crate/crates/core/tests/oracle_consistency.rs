//! Cross-checks between independent dynamic-programming routes: the dense
//! linear solve against plain iterative sweeps, policy iteration against
//! value iteration, and the greedy policy against random competitors.

use gpi_rl::dp::{
    self, absorption_probabilities, evaluate_policy_exact, goal_success_probability,
    greedy_improvement, q_from_v, value_iteration, GpiConfig, ValueVector,
};
use gpi_rl::mdp::{frozen_lake, random_mdp, ActionId, MdpModel, StateId, TabularPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Iterative policy evaluation: repeated Bellman backups until the sweep
/// residual drops below `delta`. Independent of the linear solve.
fn evaluate_by_sweeps(
    model: &MdpModel,
    policy: &TabularPolicy,
    gamma: f64,
    delta: f64,
) -> ValueVector {
    let n = model.n_states();
    let mut v = vec![0.0; n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        let mut residual = 0.0f64;
        for s in 0..n {
            if model.is_terminal(StateId(s)) {
                continue;
            }
            let mut acc = 0.0;
            for a in 0..model.n_actions() {
                let pi = policy.prob(StateId(s), ActionId(a));
                for o in model.outcomes(StateId(s), ActionId(a)) {
                    acc += pi * o.prob * (o.reward + gamma * v[o.next.0]);
                }
            }
            next[s] = acc;
            residual = residual.max((next[s] - v[s]).abs());
        }
        v = next;
        if residual <= delta {
            break;
        }
    }
    ValueVector::new(v)
}

#[test]
fn linear_solve_agrees_with_iterative_sweeps() {
    let model = frozen_lake(true);
    let policy = TabularPolicy::uniform(16, 4);
    let solved = evaluate_policy_exact(&model, &policy, 0.9).unwrap();
    let swept = evaluate_by_sweeps(&model, &policy, 0.9, 1e-12);
    assert!(
        solved.max_abs_diff(&swept) < 1e-9,
        "routes disagree by {}",
        solved.max_abs_diff(&swept)
    );
}

#[test]
fn linear_solve_agrees_with_sweeps_on_random_models() {
    for seed in 0..10 {
        let model = random_mdp(5 + (seed as usize % 4), 2, 42 + seed);
        let policy = TabularPolicy::uniform(model.n_states(), model.n_actions());
        let solved = evaluate_policy_exact(&model, &policy, 0.9).unwrap();
        let swept = evaluate_by_sweeps(&model, &policy, 0.9, 1e-13);
        assert!(solved.max_abs_diff(&swept) < 1e-9, "seed {seed}");
    }
}

#[test]
fn policy_iteration_improvements_are_monotone() {
    let cfg = GpiConfig {
        gamma: 0.9,
        delta: 1e-12,
        max_sweeps: 10_000,
    };
    for model in [frozen_lake(true), frozen_lake(false), random_mdp(8, 3, 7)] {
        let mut policy = TabularPolicy::uniform(model.n_states(), model.n_actions());
        let mut current = evaluate_policy_exact(&model, &policy, cfg.gamma).unwrap();
        for _ in 0..50 {
            let improved = greedy_improvement(&q_from_v(&model, &current, cfg.gamma));
            let next = evaluate_policy_exact(&model, &improved, cfg.gamma).unwrap();
            for s in 0..model.n_states() {
                assert!(
                    next.get(StateId(s)) >= current.get(StateId(s)) - 1e-12,
                    "improvement decreased V({s}): {} -> {}",
                    current.get(StateId(s)),
                    next.get(StateId(s))
                );
            }
            if improved == policy {
                break;
            }
            policy = improved;
            current = next;
        }
    }
}

#[test]
fn greedy_policy_beats_fifty_random_policies() {
    let model = frozen_lake(true);
    let cfg = GpiConfig {
        gamma: 0.99,
        delta: 1e-12,
        max_sweeps: 100_000,
    };
    let (_, greedy) = value_iteration(&model, &cfg).unwrap();
    let greedy_success = goal_success_probability(&model, &greedy);
    assert!(greedy_success > 0.5, "greedy success {greedy_success}");

    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for trial in 0..50 {
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() + 1e-9).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / total).collect()
            })
            .collect();
        let candidate = TabularPolicy::from_rows(rows).unwrap();
        let success = goal_success_probability(&model, &candidate);
        assert!(
            greedy_success >= success - 1e-12,
            "random policy {trial} beat the greedy one: {success} > {greedy_success}"
        );
    }
}

#[test]
fn absorption_matches_empirical_success() {
    let model = frozen_lake(true);
    let policy = TabularPolicy::uniform(16, 4);
    let exact = goal_success_probability(&model, &policy);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let episodes = 200_000;
    let mut successes = 0usize;
    for _ in 0..episodes {
        let traj = gpi_rl::mdp::rollout_policy(&model, &policy, 500, &mut rng);
        let last = traj.transitions.last().unwrap();
        if last.terminated && model.is_success(last.next_state) {
            successes += 1;
        }
    }
    let empirical = successes as f64 / episodes as f64;
    let std_err = (exact * (1.0 - exact) / episodes as f64).sqrt();
    assert!(
        (empirical - exact).abs() <= 4.0 * std_err + 1e-4,
        "empirical {empirical} vs exact {exact}"
    );
}

#[test]
fn absorption_probability_is_a_fixed_point() {
    let model = frozen_lake(true);
    let policy = TabularPolicy::uniform(16, 4);
    let h = absorption_probabilities(&model, &policy, &[StateId(15)]);
    // h(s) = sum_{a} pi(a|s) sum_{s'} p(s'|s,a) h(s') for non-terminals.
    for s in 0..16 {
        if model.is_terminal(StateId(s)) {
            continue;
        }
        let mut backup = 0.0;
        for a in 0..4 {
            let pi = policy.prob(StateId(s), ActionId(a));
            for o in model.outcomes(StateId(s), ActionId(a)) {
                backup += pi * o.prob * h[o.next.0];
            }
        }
        assert!((backup - h[s]).abs() < 1e-12, "state {s}");
    }
    assert_eq!(h[15], 1.0);
    for hole in [5, 7, 11, 12] {
        assert_eq!(h[hole], 0.0);
    }
}

#[test]
fn random_mdp_evaluation_against_solver() {
    // The seeded generator produces models whose uniform-policy value
    // satisfies the Bellman equation solved both ways.
    let model = random_mdp(5, 2, 42);
    let policy = TabularPolicy::uniform(5, 2);
    let v = evaluate_policy_exact(&model, &policy, 0.9).unwrap();
    assert!(dp::bellman_residual(&model, &policy, &v, 0.9) < 1e-9);
    let swept = evaluate_by_sweeps(&model, &policy, 0.9, 1e-13);
    assert!(v.max_abs_diff(&swept) < 1e-9);
}
