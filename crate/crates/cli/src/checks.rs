//! Self-contained verification suites behind the `check` subcommand:
//! finite-difference gradient checks, pathwise estimator identities, clip
//! semantics, importance-sampling enumeration, and the normalization /
//! clipping formula cases. The acceptance tests assert on the same
//! results.

use gpi_rl::approx::{self, entropy_of, finite_diff_check, forward, softmax, GradVector, MlpSpec};
use gpi_rl::estimators::{
    discounted_returns, gae, lambda_return, n_step_advantage, normalize_advantages, td_errors,
    timeout_bootstrap, GaeConfig,
};
use gpi_rl::mdp::frozen_lake;
use gpi_rl::policy::{
    adaptive_lr, clip_gradient, clipped_surrogate, clipped_value_loss, collect_batch,
    surrogate_ratio_grad, total_ppo_loss, BatchGoal, CriticTarget, Network, PpoConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn random_trajectory(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<f64>, Vec<f64>, bool) {
    let len = rng.gen_range(1..=max_len);
    let rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let terminal = rng.gen_bool(0.5);
    let mut values: Vec<f64> = (0..=len).map(|_| rng.gen_range(-2.0..2.0)).collect();
    if terminal {
        values[len] = 0.0;
    }
    (rewards, values, terminal)
}

/// Pathwise estimator reductions on 1000 random trajectories, 1e-12:
/// n = 1 matches the TD(0) targets, n >= T matches the Monte-Carlo
/// returns, lambda = 0 matches TD(0), lambda = 1 matches Monte-Carlo.
pub fn reduction_checks() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE57);
    let gamma = 0.97;
    let mut worst_n1 = 0.0f64;
    let mut worst_mc = 0.0f64;
    let mut worst_l0 = 0.0f64;
    let mut worst_l1 = 0.0f64;

    for _ in 0..1000 {
        let (rewards, values, terminal) = random_trajectory(&mut rng, 10);
        let len = rewards.len();
        let deltas = td_errors(&rewards, &values, gamma, terminal).unwrap();

        // n = 1 target == TD(0) target.
        for t in 0..len {
            let n1 = n_step_advantage(&rewards, &values, gamma, 1, t) + values[t];
            let td0 = rewards[t]
                + gamma
                    * if t + 1 == len {
                        values[len]
                    } else {
                        values[t + 1]
                    };
            worst_n1 = worst_n1.max((n1 - td0).abs());
        }

        // n >= T on terminal episodes == Monte-Carlo return.
        if terminal {
            let returns = discounted_returns(&rewards, gamma);
            for t in 0..len {
                let long = n_step_advantage(&rewards, &values, gamma, len + 3, t) + values[t];
                worst_mc = worst_mc.max((long - returns[t]).abs());
            }
            // lambda = 1 == Monte-Carlo returns.
            let lam1 = lambda_return(&rewards, &values, &GaeConfig::new(gamma, 1.0), true).unwrap();
            for t in 0..len {
                worst_l1 = worst_l1.max((lam1[t] - returns[t]).abs());
            }
        }

        // lambda = 0 == TD(0) targets.
        let lam0 = lambda_return(&rewards, &values, &GaeConfig::new(gamma, 0.0), terminal).unwrap();
        for t in 0..len {
            worst_l0 = worst_l0.max((lam0[t] - (values[t] + deltas[t])).abs());
        }
    }

    vec![
        CheckResult::new(
            "n=1 target equals TD(0) target",
            worst_n1 <= 1e-12,
            format!("max dev {worst_n1:.2e}"),
        ),
        CheckResult::new(
            "n>=T target equals MC return",
            worst_mc <= 1e-12,
            format!("max dev {worst_mc:.2e}"),
        ),
        CheckResult::new(
            "lambda=0 return equals TD(0) target",
            worst_l0 <= 1e-12,
            format!("max dev {worst_l0:.2e}"),
        ),
        CheckResult::new(
            "lambda=1 return equals MC return",
            worst_l1 <= 1e-12,
            format!("max dev {worst_l1:.2e}"),
        ),
    ]
}

/// The telescoping identity (n-step advantage as a discounted TD-error
/// sum) on 1000 random triples, and the lambda-return as advantages plus
/// values against the direct weighted sum, both at 1e-12.
pub fn telescoping_checks() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AE);
    let gamma = 0.93;
    let mut worst_tel = 0.0f64;
    for _ in 0..1000 {
        let (rewards, values, terminal) = random_trajectory(&mut rng, 10);
        let len = rewards.len();
        let deltas = td_errors(&rewards, &values, gamma, terminal).unwrap();
        let t = rng.gen_range(0..len);
        let n = rng.gen_range(1..=len + 2);
        let horizon = n.min(len - t);
        let direct = n_step_advantage(&rewards, &values, gamma, n, t);
        let telescoped: f64 = (0..horizon)
            .map(|l| gamma.powi(l as i32) * deltas[t + l])
            .sum();
        worst_tel = worst_tel.max((direct - telescoped).abs());
    }

    // Lambda-return identity: GAE + value == direct weighted n-step sum.
    let mut worst_identity = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AF);
    for _ in 0..1000 {
        let (rewards, values, terminal) = random_trajectory(&mut rng, 8);
        let len = rewards.len();
        let lambda = rng.gen_range(0.0..=1.0);
        let cfg = GaeConfig::new(gamma, lambda);
        let advantages = gae(&rewards, &values, &cfg, terminal).unwrap();

        let n_step_return = |t: usize, n: usize| -> f64 {
            let horizon = n.min(len - t);
            let mut acc = 0.0;
            let mut scale = 1.0;
            for l in 0..horizon {
                acc += scale * rewards[t + l];
                scale *= gamma;
            }
            let boot = if terminal && t + horizon == len {
                0.0
            } else {
                values[t + horizon]
            };
            acc + scale * boot
        };
        for t in 0..len {
            let span = len - t;
            let mut direct = 0.0;
            for k in 1..span {
                direct += (1.0 - lambda) * lambda.powi(k as i32 - 1) * n_step_return(t, k);
            }
            direct += lambda.powi(span as i32 - 1) * n_step_return(t, span);
            worst_identity = worst_identity.max((advantages[t] + values[t] - direct).abs());
        }
    }

    vec![
        CheckResult::new(
            "n-step advantage telescopes to TD-error sum",
            worst_tel <= 1e-12,
            format!("max dev {worst_tel:.2e}"),
        ),
        CheckResult::new(
            "lambda return equals advantage plus value",
            worst_identity <= 1e-12,
            format!("max dev {worst_identity:.2e}"),
        ),
    ]
}

fn fd_on_size(seed: u64, spec: MlpSpec) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = spec.init_params(&mut rng);
    let input: Vec<f64> = (0..spec.input_dim)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let label = spec.descriptor();
    let mut out = Vec::new();

    // Log-probability head.
    let action = spec.output_dim / 2;
    let (_, analytic) = approx::logprob_and_grad(&spec, &params, &input, action);
    let err = finite_diff_check(
        &params,
        |p| {
            let logits = forward(&spec, p, &input);
            let probs = softmax(&logits);
            probs[action].ln()
        },
        &analytic,
    );
    out.push(CheckResult::new(
        &format!("log-prob gradient ({label})"),
        err <= 1e-4,
        format!("relative error {err:.2e}"),
    ));

    // Entropy head.
    let (_, analytic) = approx::entropy_and_grad(&spec, &params, &input);
    let err = finite_diff_check(
        &params,
        |p| entropy_of(&softmax(&forward(&spec, p, &input))),
        &analytic,
    );
    out.push(CheckResult::new(
        &format!("entropy gradient ({label})"),
        err <= 1e-4,
        format!("relative error {err:.2e}"),
    ));

    // Mean-squared-error value head on a one-output twin.
    let value_spec = MlpSpec::new(spec.input_dim, spec.hidden_dims.clone(), 1);
    let value_params = value_spec.init_params(&mut rng);
    let target = 0.7;
    let v = forward(&value_spec, &value_params, &input)[0];
    let analytic = approx::backward(&value_spec, &value_params, &input, &[2.0 * (v - target)]);
    let err = finite_diff_check(
        &value_params,
        |p| (forward(&value_spec, p, &input)[0] - target).powi(2),
        &analytic,
    );
    out.push(CheckResult::new(
        &format!("value MSE gradient ({})", value_spec.descriptor()),
        err <= 1e-4,
        format!("relative error {err:.2e}"),
    ));

    out
}

/// Finite-difference validation of every gradient path on three network
/// sizes, plus the full composite PPO loss.
pub fn gradient_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    out.extend(fd_on_size(11, MlpSpec::new(3, vec![8], 2)));
    out.extend(fd_on_size(12, MlpSpec::new(4, vec![16], 3)));
    out.extend(fd_on_size(13, MlpSpec::new(5, vec![12, 6], 4)));

    // Composite clipped loss on a real rollout, slightly off-policy so
    // the ratios are not exactly 1 but stay inside the clip band.
    let model = frozen_lake(false);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let actor = Network::init(MlpSpec::new(16, vec![8], 4), &mut rng);
    let critic = Network::init(MlpSpec::new(16, vec![8], 1), &mut rng);
    let mut batch = collect_batch(
        &model,
        &actor,
        Some(&critic),
        None,
        BatchGoal::Steps(48),
        40,
        15,
        0,
        1,
    );
    batch.compute_targets(0.99, 0.95, CriticTarget::LambdaReturn);
    for (i, lp) in batch.old_log_probs.iter_mut().enumerate() {
        *lp += 0.02 * ((i % 7) as f64 - 3.0) / 3.0;
    }
    let cfg = PpoConfig::default();
    let indices: Vec<usize> = (0..batch.len()).collect();
    let (_, actor_grad, critic_grad) =
        total_ppo_loss(&batch, &indices, &actor, &critic, &cfg).unwrap();

    let err_actor = finite_diff_check(
        &actor.params,
        |p| {
            let probe = Network::new(actor.spec.clone(), p.clone());
            total_ppo_loss(&batch, &indices, &probe, &critic, &cfg)
                .unwrap()
                .0
                .total
        },
        &actor_grad,
    );
    out.push(CheckResult::new(
        "composite loss actor gradient",
        err_actor <= 1e-4,
        format!("relative error {err_actor:.2e}"),
    ));
    let err_critic = finite_diff_check(
        &critic.params,
        |p| {
            let probe = Network::new(critic.spec.clone(), p.clone());
            total_ppo_loss(&batch, &indices, &actor, &probe, &cfg)
                .unwrap()
                .0
                .total
        },
        &critic_grad,
    );
    out.push(CheckResult::new(
        "composite loss critic gradient",
        err_critic <= 1e-4,
        format!("relative error {err_critic:.2e}"),
    ));
    out
}

/// Saturation semantics of the clipped surrogate: constant value and an
/// exactly zero ratio-derivative in the saturated regions.
pub fn clip_semantics_checks() -> Vec<CheckResult> {
    let eps = 0.2;
    let mut ok_flat = true;
    let mut ok_grad = true;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC11);
    for _ in 0..500 {
        let advantage = rng.gen_range(0.05..4.0);
        // Positive advantage saturated above 1 + eps.
        let r1 = 1.0 + eps + rng.gen_range(1e-9..3.0);
        let r2 = 1.0 + eps + rng.gen_range(1e-9..3.0);
        let (a, c1) = clipped_surrogate(r1, advantage, eps);
        let (b, _) = clipped_surrogate(r2, advantage, eps);
        ok_flat &= a == b && c1;
        ok_grad &= surrogate_ratio_grad(r1, advantage, eps) == 0.0;

        // Negative advantage saturated below 1 - eps.
        let r1 = (1.0 - eps) * rng.gen::<f64>();
        let (a, c1) = clipped_surrogate(r1, -advantage, eps);
        ok_flat &= a == (1.0 - eps) * -advantage && c1;
        ok_grad &= surrogate_ratio_grad(r1, -advantage, eps) == 0.0;

        // Interior is untouched.
        let r = rng.gen_range(1.0 - eps..=1.0 + eps);
        let (v, clipped) = clipped_surrogate(r, advantage, eps);
        ok_flat &= v == r * advantage && !clipped;
    }
    vec![
        CheckResult::new(
            "clipped surrogate constant when saturated",
            ok_flat,
            String::new(),
        ),
        CheckResult::new("zero ratio-gradient when saturated", ok_grad, String::new()),
    ]
}

/// Enumerated importance-sampling identity on 100 random one-step
/// problems, at 1e-10.
pub fn importance_sampling_checks() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x15A);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..8);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-6).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        };
        let p_old = draw(&mut rng);
        let p_new = draw(&mut rng);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let reweighted: f64 = (0..n)
            .map(|a| p_old[a] * (p_new[a] / p_old[a]) * f[a])
            .sum();
        let direct: f64 = (0..n).map(|a| p_new[a] * f[a]).sum();
        worst = worst.max((reweighted - direct).abs());
    }
    vec![CheckResult::new(
        "importance sampling is unbiased on enumerable problems",
        worst <= 1e-10,
        format!("max dev {worst:.2e}"),
    )]
}

/// The appendix formula cases: gradient-clip norm, advantage
/// normalization, clipped value loss, timeout bootstrap, adaptive
/// learning rate.
pub fn formula_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();

    // Gradient clip: output norm is min(norm, cap) to 1e-12.
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0);
    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let g = GradVector {
            data: (0..rng.gen_range(1..30))
                .map(|_| rng.gen_range(-4.0..4.0))
                .collect(),
        };
        let cap = rng.gen_range(0.1..6.0);
        let clipped = clip_gradient(&g, cap);
        let expected = g.norm().min(cap);
        let dev = (clipped.norm() - expected).abs();
        worst = worst.max(dev);
        ok &= dev <= 1e-12;
    }
    out.push(CheckResult::new(
        "gradient clip norm equals min(norm, cap)",
        ok,
        format!("max dev {worst:.2e}"),
    ));

    // Advantage normalization hand case.
    let normalized = normalize_advantages(&[1.0, 2.0, 3.0], 0.0);
    let dev = (normalized[0] + 1.224745)
        .abs()
        .max(normalized[1].abs())
        .max((normalized[2] - 1.224745).abs());
    out.push(CheckResult::new(
        "advantage normalization of (1,2,3)",
        dev <= 1e-6,
        format!("max dev {dev:.2e}"),
    ));

    // Clipped value loss hand case.
    let loss = clipped_value_loss(1.0, 0.0, 1.0, 0.2);
    out.push(CheckResult::new(
        "clipped value loss hand case 0.64",
        (loss - 0.64).abs() <= 1e-12,
        format!("got {loss}"),
    ));

    // Timeout bootstrap branches.
    let term = timeout_bootstrap(-1.0, 9.9, 0.9, false);
    let trunc = timeout_bootstrap(0.0, 2.0, 0.9, true);
    out.push(CheckResult::new(
        "timeout bootstrap branches",
        term == -1.0 && (trunc - 1.8).abs() <= 1e-15,
        format!("terminated {term}, truncated {trunc}"),
    ));

    // Adaptive learning rate bands and clamps.
    let ok = (adaptive_lr(3e-4, 0.03, 0.01) - 2e-4).abs() < 1e-12
        && adaptive_lr(3e-4, 0.01, 0.01) == 3e-4
        && adaptive_lr(1.1e-6, 1.0, 0.01) == 1e-6
        && adaptive_lr(9e-3, 0.0, 0.01) == 1e-2;
    out.push(CheckResult::new(
        "adaptive learning-rate bands",
        ok,
        String::new(),
    ));

    out
}

/// Every suite in order; the `check` subcommand prints these as a table.
pub fn run_all_checks() -> Vec<CheckResult> {
    let mut results = Vec::new();
    results.extend(gradient_checks());
    results.extend(reduction_checks());
    results.extend(telescoping_checks());
    results.extend(clip_semantics_checks());
    results.extend(importance_sampling_checks());
    results.extend(formula_checks());
    results
}
