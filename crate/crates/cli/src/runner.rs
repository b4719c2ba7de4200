//! Experiment execution: builds the environment, drives the selected
//! algorithm, and persists metrics, the final policy, value tables,
//! checkpoints, and a summary. Identical `(config, seed)` pairs produce
//! byte-identical metrics and policy files.

use std::fs;
use std::path::Path;
use std::time::Instant;

use gpi_rl::approx::{write_checkpoint, MlpSpec};
use gpi_rl::dp::{self, GpiConfig};
use gpi_rl::mdp::{rollout_policy, MdpModel, StateId, TabularPolicy};
use gpi_rl::policy::{actor_critic_train, ppo_train, reinforce_train, IterationMetrics, Network};
use gpi_rl::tabular::{
    mc_control_gpi, mc_evaluate_v, n_step_td_evaluate_v, td_evaluate_v, td_lambda_evaluate_v,
    VTable,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{Algo, EnvSpec, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            _ => 2,
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), RunError> {
    fs::write(path, content).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Worker-thread cap from `GPI_RL_THREADS`; collection output does not
/// depend on it.
pub fn thread_cap() -> usize {
    std::env::var("GPI_RL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// What a finished run reports in `summary.txt`.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub success_rate: f64,
    pub mean_return: f64,
    pub wall_seconds: f64,
}

fn goal_states(model: &MdpModel) -> Vec<StateId> {
    model.success_states().iter().map(|&s| StateId(s)).collect()
}

fn policy_csv(policy: &TabularPolicy) -> String {
    let mut header = String::from("state");
    for a in 0..policy.n_actions() {
        header.push_str(&format!(",p{a}"));
    }
    let mut out = header;
    out.push('\n');
    for s in 0..policy.n_states() {
        let mut row = s.to_string();
        for p in policy.row(StateId(s)) {
            row.push_str(&format!(",{p}"));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Parses the `final_policy.csv` format back into a policy.
pub fn parse_policy_csv(text: &str) -> Result<TabularPolicy, RunError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RunError::Usage("empty policy file".into()))?;
    let n_actions = header.split(',').count().saturating_sub(1);
    if !header.starts_with("state") || n_actions == 0 {
        return Err(RunError::Usage(format!("bad policy header `{header}`")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_actions + 1 {
            return Err(RunError::Usage(format!(
                "policy row {idx} has {} fields, expected {}",
                fields.len(),
                n_actions + 1
            )));
        }
        let row: Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
        rows.push(row.map_err(|_| RunError::Usage(format!("unparsable policy row {idx}")))?);
    }
    TabularPolicy::from_rows(rows)
        .map_err(|e| RunError::Usage(format!("policy rows are not distributions: {e}")))
}

fn metrics_csv(history: &[IterationMetrics]) -> String {
    let mut out = String::from(IterationMetrics::CSV_HEADER);
    out.push('\n');
    for row in history {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

fn single_metrics_row(episodes: usize, mean_return: f64, success: f64) -> Vec<IterationMetrics> {
    vec![IterationMetrics {
        iteration: 0,
        episodes,
        mean_return,
        success_rate: success,
        policy_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        approx_kl: 0.0,
        clip_fraction: 0.0,
        lr: 0.0,
        grad_norm: 0.0,
    }]
}

fn initial_value(model: &MdpModel, values: &[f64]) -> f64 {
    model
        .initial_dist()
        .iter()
        .zip(values)
        .map(|(p, v)| p * v)
        .sum()
}

/// Executes the configured run and writes all artifacts into `out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let start = Instant::now();
    let model = cfg.build_model();
    let targets = goal_states(&model);
    let threads = thread_cap();

    fs::create_dir_all(&cfg.out_dir).map_err(|source| RunError::Io {
        path: cfg.out_dir.display().to_string(),
        source,
    })?;
    let out = |name: &str| cfg.out_dir.join(name);

    let exact_success = |policy: &TabularPolicy| dp::success_probability(&model, policy, &targets);

    let (history, final_policy, summary_return): (Vec<IterationMetrics>, TabularPolicy, f64) =
        match cfg.algo {
            Algo::DpSolve => {
                let gpi = GpiConfig {
                    gamma: cfg.dp.gamma,
                    delta: cfg.dp.delta,
                    max_sweeps: cfg.dp.max_sweeps,
                };
                let (v, policy) = dp::value_iteration(&model, &gpi)
                    .map_err(|e| RunError::Runtime(e.to_string()))?;
                let q = dp::q_from_v(&model, &v, cfg.dp.gamma);
                write_file(&out("v.csv"), &v.to_csv())?;
                write_file(&out("q.csv"), &q.to_csv())?;
                let ret = initial_value(&model, v.as_slice());
                (
                    single_metrics_row(0, ret, exact_success(&policy)),
                    policy,
                    ret,
                )
            }
            Algo::McEval | Algo::TdEval | Algo::TdLambdaEval => {
                let policy = TabularPolicy::uniform(model.n_states(), model.n_actions());
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                // td-eval with [eval] n > 1 selects the n-step evaluator.
                let table: VTable = match cfg.algo {
                    Algo::McEval => mc_evaluate_v(&model, &policy, &cfg.eval, &mut rng),
                    Algo::TdEval if cfg.eval.n > 1 => {
                        n_step_td_evaluate_v(&model, &policy, &cfg.eval, &mut rng)
                    }
                    Algo::TdEval => td_evaluate_v(&model, &policy, &cfg.eval, &mut rng),
                    _ => td_lambda_evaluate_v(&model, &policy, &cfg.eval, &mut rng),
                };
                write_file(&out("v.csv"), &table.to_csv())?;
                let ret = initial_value(&model, &table.values);
                (
                    single_metrics_row(cfg.eval.episodes, ret, exact_success(&policy)),
                    policy,
                    ret,
                )
            }
            Algo::McGpi => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let (policy, q) = mc_control_gpi(&model, &cfg.eval, cfg.epsilon, &mut rng);
                write_file(&out("q.csv"), &q.to_csv())?;
                let v = dp::v_from_q(&policy, &q.to_matrix());
                let ret = initial_value(&model, v.as_slice());
                (
                    single_metrics_row(cfg.eval.episodes, ret, exact_success(&policy)),
                    policy,
                    ret,
                )
            }
            Algo::Reinforce => {
                let actor_spec =
                    MlpSpec::new(model.n_states(), cfg.net.hidden.clone(), model.n_actions());
                let (actor, critic, history) = reinforce_train(
                    &model,
                    &cfg.reinforce,
                    &actor_spec,
                    cfg.iterations,
                    cfg.seed,
                    threads,
                )
                .map_err(|e| RunError::Runtime(e.to_string()))?;
                write_file(
                    &out("actor.ckpt"),
                    &write_checkpoint(&actor.spec, &actor.params),
                )?;
                if let Some(c) = &critic {
                    write_file(&out("critic.ckpt"), &write_checkpoint(&c.spec, &c.params))?;
                }
                finish_policy_run(&model, actor, history)
            }
            Algo::ActorCritic => {
                let actor_spec =
                    MlpSpec::new(model.n_states(), cfg.net.hidden.clone(), model.n_actions());
                let critic_spec = MlpSpec::new(model.n_states(), cfg.net.hidden.clone(), 1);
                let (actor, critic, history) = actor_critic_train(
                    &model,
                    &cfg.actor_critic,
                    &actor_spec,
                    &critic_spec,
                    cfg.iterations,
                    cfg.seed,
                    threads,
                )
                .map_err(|e| RunError::Runtime(e.to_string()))?;
                write_file(
                    &out("actor.ckpt"),
                    &write_checkpoint(&actor.spec, &actor.params),
                )?;
                write_file(
                    &out("critic.ckpt"),
                    &write_checkpoint(&critic.spec, &critic.params),
                )?;
                finish_policy_run(&model, actor, history)
            }
            Algo::Ppo => {
                let actor_spec =
                    MlpSpec::new(model.n_states(), cfg.net.hidden.clone(), model.n_actions());
                let critic_spec = MlpSpec::new(model.n_states(), cfg.net.hidden.clone(), 1);
                let result = ppo_train(
                    &model,
                    &cfg.ppo,
                    &actor_spec,
                    &critic_spec,
                    cfg.iterations,
                    cfg.seed,
                    threads,
                )
                .map_err(|e| RunError::Runtime(e.to_string()))?;
                write_file(
                    &out("actor.ckpt"),
                    &write_checkpoint(&result.actor.spec, &result.actor.params),
                )?;
                write_file(
                    &out("critic.ckpt"),
                    &write_checkpoint(&result.critic.spec, &result.critic.params),
                )?;
                finish_policy_run(&model, result.actor, result.history)
            }
        };

    write_file(&out("metrics.csv"), &metrics_csv(&history))?;
    write_file(&out("final_policy.csv"), &policy_csv(&final_policy))?;

    let success = exact_success(&final_policy);
    let wall = start.elapsed().as_secs_f64();
    let summary = RunSummary {
        success_rate: success,
        mean_return: summary_return,
        wall_seconds: wall,
    };
    write_file(
        &out("summary.txt"),
        &format!(
            "success_rate {}\nmean_return {}\nwall_time_s {:.3}\n",
            summary.success_rate, summary.mean_return, summary.wall_seconds
        ),
    )?;
    Ok(summary)
}

/// Training runs report the batch returns of the last iteration and derive
/// their summary policy from the actor's full action distribution.
fn finish_policy_run(
    model: &MdpModel,
    actor: Network,
    history: Vec<IterationMetrics>,
) -> (Vec<IterationMetrics>, TabularPolicy, f64) {
    let policy = gpi_rl::policy::actor_policy(model, &actor, None);
    let mean_return = history.last().map_or(0.0, |h| h.mean_return);
    (history, policy, mean_return)
}

/// Side-by-side empirical and exact evaluation of a stored policy file.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub episodes: usize,
    pub empirical_success: f64,
    pub empirical_mean_return: f64,
    pub exact_success: f64,
}

pub fn eval_policy(
    policy_path: &Path,
    env: EnvSpec,
    random_mdp: crate::config::RandomMdpConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, RunError> {
    if episodes == 0 {
        return Err(RunError::Usage("eval requires at least one episode".into()));
    }
    let text = fs::read_to_string(policy_path).map_err(|source| RunError::Io {
        path: policy_path.display().to_string(),
        source,
    })?;
    let policy = parse_policy_csv(&text)?;

    let cfg = RunConfig {
        env,
        random_mdp,
        ..RunConfig::default()
    };
    let model = cfg.build_model();
    if policy.n_states() != model.n_states() || policy.n_actions() != model.n_actions() {
        return Err(RunError::Usage(format!(
            "policy shape {}x{} does not match environment {}x{}",
            policy.n_states(),
            policy.n_actions(),
            model.n_states(),
            model.n_actions()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0usize;
    let mut total_return = 0.0;
    for _ in 0..episodes {
        let traj = rollout_policy(&model, &policy, 1_000, &mut rng);
        total_return += traj.total_reward();
        let last = traj.transitions.last().unwrap();
        if last.terminated && model.is_success(last.next_state) {
            successes += 1;
        }
    }

    let targets = goal_states(&model);
    Ok(EvalReport {
        episodes,
        empirical_success: successes as f64 / episodes as f64,
        empirical_mean_return: total_return / episodes as f64,
        exact_success: dp::success_probability(&model, &policy, &targets),
    })
}
