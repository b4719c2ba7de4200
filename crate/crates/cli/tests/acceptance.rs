//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured figure once its assertions hold.
//!
//! Run with `cargo test -p gpi-rl-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

use std::fs;

use gpi_rl::approx::MlpSpec;
use gpi_rl::dp::{
    evaluate_policy_exact, goal_success_probability, policy_iteration, value_iteration, GpiConfig,
};
use gpi_rl::mdp::{frozen_lake, random_mdp, TabularPolicy};
use gpi_rl::policy::{
    actor_critic_train, greedy_actor_policy, ppo_train, ActorCriticConfig, PpoConfig,
};
use gpi_rl::tabular::{mc_control_gpi, mc_evaluate_v, EvalConfig, StepSize};
use gpi_rl_cli::checks;
use gpi_rl_cli::config::{Algo, EnvSpec, NetConfig, RunConfig};
use gpi_rl_cli::runner::run;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

fn assert_all(results: Vec<checks::CheckResult>) {
    for r in &results {
        assert!(r.passed, "{}: {}", r.name, r.detail);
    }
}

#[test]
fn criterion_01_exact_dp_routes_agree() {
    let cfg = GpiConfig {
        gamma: 0.9,
        delta: 1e-13,
        max_sweeps: 1_000_000,
    };
    let mut worst = 0.0f64;
    for model in [frozen_lake(false), frozen_lake(true)] {
        let (vi_v, _) = value_iteration(&model, &cfg).unwrap();
        let (_, pi_v) = policy_iteration(&model, &cfg).unwrap();
        worst = worst.max(vi_v.max_abs_diff(&pi_v));
    }
    for seed in 0..20u64 {
        let n_states = 2 + (seed as usize % 9); // 2..=10
        let n_actions = 1 + (seed as usize % 4);
        let model = random_mdp(n_states, n_actions, 1000 + seed);
        let (vi_v, _) = value_iteration(&model, &cfg).unwrap();
        let (_, pi_v) = policy_iteration(&model, &cfg).unwrap();
        worst = worst.max(vi_v.max_abs_diff(&pi_v));
    }
    assert!(worst <= 1e-9, "max disagreement {worst}");
    println!("PASS criterion 1: policy and value iteration agree to {worst:.2e} (<= 1e-9)");
}

#[test]
fn criterion_02_monte_carlo_evaluation_converges() {
    let model = frozen_lake(true);
    let policy = TabularPolicy::uniform(16, 4);
    let oracle = evaluate_policy_exact(&model, &policy, 0.9).unwrap();
    let cfg = EvalConfig {
        gamma: 0.9,
        alpha: StepSize::Harmonic,
        episodes: 200_000,
        max_steps: 250,
        ..EvalConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let table = mc_evaluate_v(&model, &policy, &cfg, &mut rng);
    let worst = table.max_abs_diff(oracle.as_slice());
    assert!(worst <= 0.01, "max error {worst}");
    println!("PASS criterion 2: every-visit MC within {worst:.4} of the oracle (<= 0.01)");
}

#[test]
fn criterion_03_td_reductions_are_pathwise_exact() {
    assert_all(checks::reduction_checks());
    println!("PASS criterion 3: n-step and lambda reductions exact to 1e-12 on 1000 trajectories");
}

#[test]
fn criterion_04_gae_telescoping_identity() {
    assert_all(checks::telescoping_checks());
    println!("PASS criterion 4: telescoping and lambda-return identities exact to 1e-12");
}

#[test]
fn criterion_05_gradients_match_finite_differences() {
    assert_all(checks::gradient_checks());
    println!("PASS criterion 5: analytic gradients within 1e-4 of central differences on 3 sizes");
}

#[test]
fn criterion_06_clip_saturation_semantics() {
    assert_all(checks::clip_semantics_checks());
    println!("PASS criterion 6: clipped surrogate constant with zero gradient when saturated");
}

#[test]
fn criterion_07_importance_sampling_unbiased() {
    assert_all(checks::importance_sampling_checks());
    println!("PASS criterion 7: enumerated importance-sampling identity exact to 1e-10");
}

#[test]
fn criterion_08_control_solves_the_simple_lake() {
    let model = frozen_lake(false);

    // Monte-Carlo control.
    let cfg = EvalConfig {
        gamma: 0.99,
        alpha: StepSize::Constant(0.1),
        episodes: 5_000,
        max_steps: 100,
        ..EvalConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mc_policy, _) = mc_control_gpi(&model, &cfg, 0.2, &mut rng);
    let mc_success = goal_success_probability(&model, &mc_policy);
    assert!(
        (mc_success - 1.0).abs() < 1e-12,
        "mc-gpi success {mc_success}"
    );

    // Actor-critic.
    let ac_cfg = ActorCriticConfig {
        gamma: 0.99,
        actor_lr: 0.1,
        critic_lr: 0.5,
        critic_epochs: 4,
        batch_size: 512,
        max_episode_len: 100,
        grad_norm_cap: Some(5.0),
    };
    let actor_spec = MlpSpec::new(16, vec![32], 4);
    let critic_spec = MlpSpec::new(16, vec![32], 1);
    let (actor, _, _) =
        actor_critic_train(&model, &ac_cfg, &actor_spec, &critic_spec, 600, 5, 1).unwrap();
    let ac_success = goal_success_probability(&model, &greedy_actor_policy(&model, &actor, None));
    assert!(
        (ac_success - 1.0).abs() < 1e-12,
        "actor-critic success {ac_success}"
    );

    // PPO at the stated batch size.
    let ppo_cfg = PpoConfig {
        lr: 5e-3,
        batch_size: 1024,
        max_episode_len: 100,
        ..PpoConfig::default()
    };
    let result = ppo_train(&model, &ppo_cfg, &actor_spec, &critic_spec, 300, 11, 1).unwrap();
    let ppo_success =
        goal_success_probability(&model, &greedy_actor_policy(&model, &result.actor, None));
    assert!(
        (ppo_success - 1.0).abs() < 1e-12,
        "ppo success {ppo_success}"
    );

    println!(
        "PASS criterion 8: exact success 1.0 for mc-gpi ({mc_success}), actor-critic ({ac_success}), ppo ({ppo_success})"
    );
}

#[test]
fn criterion_09_ppo_on_slippery_lake_nears_the_planner() {
    let model = frozen_lake(true);
    let vi_cfg = GpiConfig {
        gamma: 0.99,
        delta: 1e-12,
        max_sweeps: 100_000,
    };
    let (_, vi_policy) = value_iteration(&model, &vi_cfg).unwrap();
    let vi_success = goal_success_probability(&model, &vi_policy);

    let cfg = PpoConfig {
        lr: 5e-3,
        batch_size: 2048,
        max_episode_len: 200,
        ..PpoConfig::default()
    };
    let actor_spec = MlpSpec::new(16, vec![32], 4);
    let critic_spec = MlpSpec::new(16, vec![32], 1);
    let mut successes = Vec::new();
    for seed in [1u64, 2, 3] {
        let result = ppo_train(&model, &cfg, &actor_spec, &critic_spec, 600, seed, 1).unwrap();
        let policy = greedy_actor_policy(&model, &result.actor, None);
        successes.push(goal_success_probability(&model, &policy));
    }
    let mean: f64 = successes.iter().sum::<f64>() / successes.len() as f64;
    assert!(
        mean >= 0.95 * vi_success,
        "mean success {mean} vs planner {vi_success} (threshold {})",
        0.95 * vi_success
    );
    println!(
        "PASS criterion 9: slippery PPO mean success {mean:.4} >= 0.95 x planner {vi_success:.4} (seeds: {successes:?})"
    );
}

#[test]
fn criterion_10_appendix_formula_conformance() {
    assert_all(checks::formula_checks());
    println!(
        "PASS criterion 10: gradient clip, normalization, value clip, and timeout formulas exact"
    );
}

#[test]
fn criterion_11_reruns_are_byte_identical() {
    let base = tempdir().unwrap();

    let configs: Vec<(&str, RunConfig)> = vec![
        (
            "mc-eval",
            RunConfig {
                algo: Algo::McEval,
                env: EnvSpec::FrozenLakeSlippery,
                seed: 1,
                eval: EvalConfig {
                    episodes: 2_000,
                    max_steps: 100,
                    ..Default::default()
                },
                ..RunConfig::default()
            },
        ),
        (
            "td-eval",
            RunConfig {
                algo: Algo::TdEval,
                env: EnvSpec::FrozenLakeSlippery,
                seed: 2,
                eval: EvalConfig {
                    episodes: 2_000,
                    max_steps: 100,
                    ..Default::default()
                },
                ..RunConfig::default()
            },
        ),
        (
            "td-lambda-eval",
            RunConfig {
                algo: Algo::TdLambdaEval,
                env: EnvSpec::FrozenLakeSlippery,
                seed: 3,
                eval: EvalConfig {
                    episodes: 2_000,
                    max_steps: 100,
                    lambda: 0.7,
                    ..Default::default()
                },
                ..RunConfig::default()
            },
        ),
        (
            "mc-gpi",
            RunConfig {
                algo: Algo::McGpi,
                env: EnvSpec::FrozenLake,
                seed: 4,
                eval: EvalConfig {
                    episodes: 1_000,
                    max_steps: 100,
                    alpha: StepSize::Constant(0.1),
                    ..Default::default()
                },
                epsilon: 0.2,
                ..RunConfig::default()
            },
        ),
        (
            "dp-solve",
            RunConfig {
                algo: Algo::DpSolve,
                env: EnvSpec::FrozenLakeSlippery,
                ..RunConfig::default()
            },
        ),
        (
            "reinforce",
            RunConfig {
                algo: Algo::Reinforce,
                env: EnvSpec::FrozenLake,
                seed: 5,
                iterations: 4,
                reinforce: gpi_rl::policy::ReinforceConfig {
                    batch_episodes: 16,
                    max_episode_len: 50,
                    ..Default::default()
                },
                net: NetConfig { hidden: vec![8] },
                ..RunConfig::default()
            },
        ),
        (
            "actor-critic",
            RunConfig {
                algo: Algo::ActorCritic,
                env: EnvSpec::FrozenLake,
                seed: 6,
                iterations: 4,
                actor_critic: ActorCriticConfig {
                    batch_size: 64,
                    max_episode_len: 50,
                    ..Default::default()
                },
                net: NetConfig { hidden: vec![8] },
                ..RunConfig::default()
            },
        ),
        (
            "ppo",
            RunConfig {
                algo: Algo::Ppo,
                env: EnvSpec::FrozenLake,
                seed: 7,
                iterations: 4,
                ppo: PpoConfig {
                    batch_size: 96,
                    minibatch_size: 32,
                    epochs_per_batch: 2,
                    max_episode_len: 50,
                    ..Default::default()
                },
                net: NetConfig { hidden: vec![8] },
                ..RunConfig::default()
            },
        ),
    ];

    for (name, cfg) in configs {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let out_dir = base.path().join(format!("{name}-{attempt}"));
            let cfg = RunConfig {
                out_dir: out_dir.clone(),
                ..cfg.clone()
            };
            run(&cfg).unwrap();
            let metrics = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
            let policy = fs::read_to_string(out_dir.join("final_policy.csv")).unwrap();
            outputs.push((metrics, policy));
        }
        assert_eq!(
            outputs[0].0, outputs[1].0,
            "{name}: metrics.csv differs between identical runs"
        );
        assert_eq!(
            outputs[0].1, outputs[1].1,
            "{name}: final_policy.csv differs between identical runs"
        );
    }
    println!(
        "PASS criterion 11: byte-identical metrics and policy files on rerun for all 8 algorithms"
    );
}
