//! Statistical convergence of the sampling estimators toward the exact
//! dynamic-programming values, at the sample sizes where the tolerances
//! are comfortably met.

use gpi_rl::dp::{
    evaluate_policy_exact, goal_success_probability, q_from_v, v_from_q, value_iteration, GpiConfig,
};
use gpi_rl::mdp::{
    frozen_lake, random_mdp, rollout_policy, ActionId, StateId, TabularPolicy, RIGHT,
};
use gpi_rl::tabular::{
    mc_control_gpi, mc_evaluate_q, n_step_td_evaluate_v, td_evaluate_v, EvalConfig, StepSize,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn slippery_step_frequencies_match_the_model() {
    let model = frozen_lake(true);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 1_000_000;
    let mut counts = [0usize; 16];
    for _ in 0..draws {
        let tr = gpi_rl::mdp::step(&model, StateId(14), RIGHT, &mut rng).unwrap();
        counts[tr.next_state.0] += 1;
    }
    let freq_goal = counts[15] as f64 / draws as f64;
    assert!(
        (freq_goal - 0.8).abs() <= 0.003,
        "goal frequency {freq_goal}"
    );
    // Chi-squared against the model row: 2 dof, generous bound.
    let mut chi2 = 0.0;
    for o in model.outcomes(StateId(14), RIGHT) {
        let expected = o.prob * draws as f64;
        let observed = counts[o.next.0] as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    assert!(chi2 < 20.0, "chi-squared statistic {chi2}");
    assert_eq!(counts[15] + counts[13] + counts[10], draws);
}

#[test]
fn mc_q_converges_to_oracle() {
    let model = frozen_lake(true);
    let policy = TabularPolicy::uniform(16, 4);
    let oracle_v = evaluate_policy_exact(&model, &policy, 0.9).unwrap();
    let oracle_q = q_from_v(&model, &oracle_v, 0.9);

    let cfg = EvalConfig {
        gamma: 0.9,
        alpha: StepSize::Harmonic,
        episodes: 500_000,
        max_steps: 250,
        ..EvalConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let q = mc_evaluate_q(&model, &policy, &cfg, &mut rng);

    let mut worst = 0.0f64;
    for s in 0..16 {
        for a in 0..4 {
            let err =
                (q.get(StateId(s), ActionId(a)) - oracle_q.get(StateId(s), ActionId(a))).abs();
            worst = worst.max(err);
        }
    }
    assert!(worst <= 0.02, "max action-value error {worst}");

    // The estimated Q folds back into the estimated V.
    let v = v_from_q(&policy, &q.to_matrix());
    assert!(v.max_abs_diff(&oracle_v) <= 0.02);
}

#[test]
fn td_converges_with_constant_step() {
    let model = frozen_lake(true);
    let policy = TabularPolicy::uniform(16, 4);
    let oracle = evaluate_policy_exact(&model, &policy, 0.9).unwrap();

    let cfg = EvalConfig {
        gamma: 0.9,
        alpha: StepSize::Constant(0.01),
        episodes: 300_000,
        max_steps: 250,
        ..EvalConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let table = td_evaluate_v(&model, &policy, &cfg, &mut rng);
    let worst = table.max_abs_diff(oracle.as_slice());
    assert!(worst <= 0.05, "max state-value error {worst}");
}

#[test]
fn n_step_family_converges_on_random_mdp() {
    let model = random_mdp(5, 2, 42);
    let policy = TabularPolicy::uniform(5, 2);
    let oracle = evaluate_policy_exact(&model, &policy, 0.5).unwrap();

    for n in [1usize, 2, 4] {
        let cfg = EvalConfig {
            gamma: 0.5,
            alpha: StepSize::Harmonic,
            n,
            episodes: 200_000,
            max_steps: 100,
            ..EvalConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77 + n as u64);
        let table = n_step_td_evaluate_v(&model, &policy, &cfg, &mut rng);
        let worst = table.max_abs_diff(oracle.as_slice());
        assert!(worst <= 0.02, "n = {n}: max error {worst}");
    }
}

#[test]
fn mc_control_on_slippery_lake_nears_the_planner() {
    let model = frozen_lake(true);
    let vi_cfg = GpiConfig {
        gamma: 0.99,
        delta: 1e-12,
        max_sweeps: 100_000,
    };
    let (_, vi_policy) = value_iteration(&model, &vi_cfg).unwrap();
    let vi_success = goal_success_probability(&model, &vi_policy);

    let cfg = EvalConfig {
        gamma: 0.99,
        alpha: StepSize::Constant(0.02),
        episodes: 40_000,
        max_steps: 250,
        ..EvalConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (learned, _) = mc_control_gpi(&model, &cfg, 0.1, &mut rng);
    let learned_success = goal_success_probability(&model, &learned);
    assert!(
        learned_success >= 0.95 * vi_success,
        "learned {learned_success} vs planner {vi_success}"
    );
}

#[test]
fn uniform_policy_rollout_lengths_are_bounded() {
    // Sanity on the episode-length assumption behind the sample sizes.
    let model = frozen_lake(true);
    let policy = TabularPolicy::uniform(16, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total = 0usize;
    for _ in 0..10_000 {
        total += rollout_policy(&model, &policy, 250, &mut rng).len();
    }
    let mean_len = total as f64 / 10_000.0;
    assert!(mean_len < 60.0, "mean episode length {mean_len}");
}
