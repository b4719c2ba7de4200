//! Run configuration: a small `[section]` / `key = value` text format with
//! strict unknown-key rejection, plus the canonical emitter whose output
//! reparses to an equal configuration.

use std::fmt;
use std::path::PathBuf;

use gpi_rl::mdp::{frozen_lake, random_mdp, MdpModel};
use gpi_rl::policy::{
    ActorCriticConfig, CriticTarget, PpoConfig, ReinforceConfig, ReinforceWeight,
};
use gpi_rl::tabular::{EvalConfig, StepSize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    McEval,
    TdEval,
    TdLambdaEval,
    McGpi,
    DpSolve,
    Reinforce,
    ActorCritic,
    Ppo,
}

impl Algo {
    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "mc-eval" => Algo::McEval,
            "td-eval" => Algo::TdEval,
            "td-lambda-eval" => Algo::TdLambdaEval,
            "mc-gpi" => Algo::McGpi,
            "dp-solve" => Algo::DpSolve,
            "reinforce" => Algo::Reinforce,
            "actor-critic" => Algo::ActorCritic,
            "ppo" => Algo::Ppo,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algo::McEval => "mc-eval",
            Algo::TdEval => "td-eval",
            Algo::TdLambdaEval => "td-lambda-eval",
            Algo::McGpi => "mc-gpi",
            Algo::DpSolve => "dp-solve",
            Algo::Reinforce => "reinforce",
            Algo::ActorCritic => "actor-critic",
            Algo::Ppo => "ppo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvSpec {
    FrozenLake,
    FrozenLakeSlippery,
    RandomMdp,
}

impl EnvSpec {
    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "frozenlake" => EnvSpec::FrozenLake,
            "frozenlake-slippery" => EnvSpec::FrozenLakeSlippery,
            "random-mdp" => EnvSpec::RandomMdp,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::FrozenLake => "frozenlake",
            EnvSpec::FrozenLakeSlippery => "frozenlake-slippery",
            EnvSpec::RandomMdp => "random-mdp",
        }
    }
}

/// Parameters of the `random-mdp` environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomMdpConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub seed: u64,
}

impl Default for RandomMdpConfig {
    fn default() -> Self {
        Self {
            n_states: 8,
            n_actions: 2,
            seed: 0,
        }
    }
}

/// Exact-solver settings for `dp-solve` and summary recounts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpConfig {
    pub gamma: f64,
    pub delta: f64,
    pub max_sweeps: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            delta: 1e-10,
            max_sweeps: 100_000,
        }
    }
}

/// Network architecture shared by the actor and critic heads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
        }
    }
}

/// Exploration knob for `mc-gpi`, stored next to the shared evaluator
/// settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algo: Algo,
    pub env: EnvSpec,
    pub seed: u64,
    pub iterations: usize,
    pub out_dir: PathBuf,
    pub random_mdp: RandomMdpConfig,
    pub dp: DpConfig,
    pub eval: EvalConfig,
    pub epsilon: f64,
    pub net: NetConfig,
    pub reinforce: ReinforceConfig,
    pub actor_critic: ActorCriticConfig,
    pub ppo: PpoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Ppo,
            env: EnvSpec::FrozenLake,
            seed: 0,
            iterations: 100,
            out_dir: PathBuf::from("runs/out"),
            random_mdp: RandomMdpConfig::default(),
            dp: DpConfig::default(),
            eval: EvalConfig::default(),
            epsilon: 0.1,
            net: NetConfig::default(),
            reinforce: ReinforceConfig::default(),
            actor_critic: ActorCriticConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn build_model(&self) -> MdpModel {
        match self.env {
            EnvSpec::FrozenLake => frozen_lake(false),
            EnvSpec::FrozenLakeSlippery => frozen_lake(true),
            EnvSpec::RandomMdp => random_mdp(
                self.random_mdp.n_states,
                self.random_mdp.n_actions,
                self.random_mdp.seed,
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("invalid configuration: {key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn parse_value<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
    what: &str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        reason: format!("expected {what}, got `{value}`"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason: format!("expected true or false, got `{value}`"),
        }),
    }
}

fn parse_hidden(line: usize, key: &str, value: &str) -> Result<Vec<usize>, ConfigError> {
    if value.trim().is_empty() || value.trim() == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|p| parse_value(line, key, p.trim(), "a layer width"))
        .collect()
}

/// Parses the documented `key = value` / `[section]` text into a fully
/// validated configuration. Unknown sections and keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section = String::from("run");

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            match name {
                "run" | "random-mdp" | "dp" | "eval" | "net" | "reinforce" | "actor-critic"
                | "ppo" => section = name.to_string(),
                _ => {
                    return Err(ConfigError::UnknownSection {
                        line,
                        name: name.to_string(),
                    })
                }
            }
            continue;
        }

        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::Malformed {
                line,
                text: trimmed.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let unknown = || ConfigError::UnknownKey {
            line,
            section: section.clone(),
            key: key.to_string(),
        };

        match section.as_str() {
            "run" => match key {
                "algo" => {
                    cfg.algo = Algo::parse(value).ok_or_else(|| ConfigError::BadValue {
                        line,
                        key: key.into(),
                        reason: format!("unknown algorithm `{value}`"),
                    })?
                }
                "env" => {
                    cfg.env = EnvSpec::parse(value).ok_or_else(|| ConfigError::BadValue {
                        line,
                        key: key.into(),
                        reason: format!("unknown environment `{value}`"),
                    })?
                }
                "seed" => cfg.seed = parse_value(line, key, value, "an integer")?,
                "iterations" => cfg.iterations = parse_value(line, key, value, "a count")?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                _ => return Err(unknown()),
            },
            "random-mdp" => match key {
                "n_states" => cfg.random_mdp.n_states = parse_value(line, key, value, "a count")?,
                "n_actions" => cfg.random_mdp.n_actions = parse_value(line, key, value, "a count")?,
                "seed" => cfg.random_mdp.seed = parse_value(line, key, value, "an integer")?,
                _ => return Err(unknown()),
            },
            "dp" => match key {
                "gamma" => cfg.dp.gamma = parse_value(line, key, value, "a real")?,
                "delta" => cfg.dp.delta = parse_value(line, key, value, "a real")?,
                "max_sweeps" => cfg.dp.max_sweeps = parse_value(line, key, value, "a count")?,
                _ => return Err(unknown()),
            },
            "eval" => match key {
                "gamma" => cfg.eval.gamma = parse_value(line, key, value, "a real")?,
                "alpha" => {
                    cfg.eval.alpha = if value == "harmonic" {
                        StepSize::Harmonic
                    } else {
                        StepSize::Constant(parse_value(line, key, value, "harmonic or a real")?)
                    }
                }
                "n" => cfg.eval.n = parse_value(line, key, value, "a count")?,
                "lambda" => cfg.eval.lambda = parse_value(line, key, value, "a real")?,
                "episodes" => cfg.eval.episodes = parse_value(line, key, value, "a count")?,
                "max_steps" => cfg.eval.max_steps = parse_value(line, key, value, "a count")?,
                "delta" => cfg.eval.delta = parse_value(line, key, value, "a real")?,
                "epsilon" => cfg.epsilon = parse_value(line, key, value, "a real")?,
                _ => return Err(unknown()),
            },
            "net" => match key {
                "hidden" => cfg.net.hidden = parse_hidden(line, key, value)?,
                _ => return Err(unknown()),
            },
            "reinforce" => match key {
                "gamma" => cfg.reinforce.gamma = parse_value(line, key, value, "a real")?,
                "lr" => cfg.reinforce.lr = parse_value(line, key, value, "a real")?,
                "variant" => {
                    cfg.reinforce.variant = match value {
                        "total-return" => ReinforceWeight::TotalReturn,
                        "reward-to-go" => ReinforceWeight::RewardToGo,
                        "baseline" => ReinforceWeight::Baseline,
                        _ => {
                            return Err(ConfigError::BadValue {
                                line,
                                key: key.into(),
                                reason: format!("unknown variant `{value}`"),
                            })
                        }
                    }
                }
                "batch_episodes" => {
                    cfg.reinforce.batch_episodes = parse_value(line, key, value, "a count")?
                }
                "max_episode_len" => {
                    cfg.reinforce.max_episode_len = parse_value(line, key, value, "a count")?
                }
                "critic_lr" => cfg.reinforce.critic_lr = parse_value(line, key, value, "a real")?,
                _ => return Err(unknown()),
            },
            "actor-critic" => match key {
                "gamma" => cfg.actor_critic.gamma = parse_value(line, key, value, "a real")?,
                "actor_lr" => cfg.actor_critic.actor_lr = parse_value(line, key, value, "a real")?,
                "critic_lr" => {
                    cfg.actor_critic.critic_lr = parse_value(line, key, value, "a real")?
                }
                "critic_epochs" => {
                    cfg.actor_critic.critic_epochs = parse_value(line, key, value, "a count")?
                }
                "batch_size" => {
                    cfg.actor_critic.batch_size = parse_value(line, key, value, "a count")?
                }
                "max_episode_len" => {
                    cfg.actor_critic.max_episode_len = parse_value(line, key, value, "a count")?
                }
                "grad_norm_cap" => {
                    cfg.actor_critic.grad_norm_cap = if value == "off" {
                        None
                    } else {
                        Some(parse_value(line, key, value, "off or a real")?)
                    }
                }
                _ => return Err(unknown()),
            },
            "ppo" => match key {
                "gamma" => cfg.ppo.gamma = parse_value(line, key, value, "a real")?,
                "lambda" => cfg.ppo.lambda = parse_value(line, key, value, "a real")?,
                "clip_eps" => cfg.ppo.clip_eps = parse_value(line, key, value, "a real")?,
                "vf_coef" => cfg.ppo.vf_coef = parse_value(line, key, value, "a real")?,
                "ent_coef" => cfg.ppo.ent_coef = parse_value(line, key, value, "a real")?,
                "epochs_per_batch" => {
                    cfg.ppo.epochs_per_batch = parse_value(line, key, value, "a count")?
                }
                "minibatch_size" => {
                    cfg.ppo.minibatch_size = parse_value(line, key, value, "a count")?
                }
                "lr" => cfg.ppo.lr = parse_value(line, key, value, "a real")?,
                "target_kl" => cfg.ppo.target_kl = parse_value(line, key, value, "a real")?,
                "grad_norm_cap" => cfg.ppo.grad_norm_cap = parse_value(line, key, value, "a real")?,
                "value_clip" => cfg.ppo.value_clip = parse_bool(line, key, value)?,
                "adv_norm" => cfg.ppo.adv_norm = parse_bool(line, key, value)?,
                "obs_norm" => cfg.ppo.obs_norm = parse_bool(line, key, value)?,
                "batch_size" => cfg.ppo.batch_size = parse_value(line, key, value, "a count")?,
                "max_episode_len" => {
                    cfg.ppo.max_episode_len = parse_value(line, key, value, "a count")?
                }
                "critic_target" => {
                    cfg.ppo.critic_target = match value {
                        "lambda-return" => CriticTarget::LambdaReturn,
                        "td" => CriticTarget::TdTarget,
                        _ => {
                            return Err(ConfigError::BadValue {
                                line,
                                key: key.into(),
                                reason: format!("expected lambda-return or td, got `{value}`"),
                            })
                        }
                    }
                }
                "adam" => cfg.ppo.adam = parse_bool(line, key, value)?,
                _ => return Err(unknown()),
            },
            _ => unreachable!("section names are validated on entry"),
        }
    }

    validate(&cfg)?;
    Ok(cfg)
}

/// Range validation, reported against the offending key.
pub fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let check = |ok: bool, key: &str, reason: &str| -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid {
                key: key.to_string(),
                reason: reason.to_string(),
            })
        }
    };

    check(
        cfg.iterations >= 1,
        "[run] iterations",
        "must be at least 1",
    )?;
    check(
        cfg.random_mdp.n_states >= 2,
        "[random-mdp] n_states",
        "must be at least 2",
    )?;
    check(
        cfg.random_mdp.n_actions >= 1,
        "[random-mdp] n_actions",
        "must be at least 1",
    )?;
    check(
        (0.0..=1.0).contains(&cfg.dp.gamma),
        "[dp] gamma",
        "must be in [0, 1]",
    )?;
    check(cfg.dp.delta > 0.0, "[dp] delta", "must be positive")?;
    check(
        (0.0..=1.0).contains(&cfg.eval.gamma),
        "[eval] gamma",
        "must be in [0, 1]",
    )?;
    if let StepSize::Constant(a) = cfg.eval.alpha {
        check(a > 0.0 && a <= 1.0, "[eval] alpha", "must be in (0, 1]")?;
    }
    check(cfg.eval.n >= 1, "[eval] n", "must be at least 1")?;
    check(
        (0.0..=1.0).contains(&cfg.eval.lambda),
        "[eval] lambda",
        "must be in [0, 1]",
    )?;
    check(
        cfg.eval.episodes >= 1,
        "[eval] episodes",
        "must be at least 1",
    )?;
    check(
        cfg.eval.max_steps >= 1,
        "[eval] max_steps",
        "must be at least 1",
    )?;
    check(cfg.eval.delta > 0.0, "[eval] delta", "must be positive")?;
    check(
        cfg.epsilon > 0.0 && cfg.epsilon <= 1.0,
        "[eval] epsilon",
        "must be in (0, 1]",
    )?;
    check(
        (0.0..=1.0).contains(&cfg.reinforce.gamma),
        "[reinforce] gamma",
        "must be in [0, 1]",
    )?;
    check(cfg.reinforce.lr > 0.0, "[reinforce] lr", "must be positive")?;
    check(
        cfg.reinforce.batch_episodes >= 1,
        "[reinforce] batch_episodes",
        "must be at least 1",
    )?;
    check(
        cfg.reinforce.max_episode_len >= 1,
        "[reinforce] max_episode_len",
        "must be at least 1",
    )?;
    check(
        (0.0..=1.0).contains(&cfg.actor_critic.gamma),
        "[actor-critic] gamma",
        "must be in [0, 1]",
    )?;
    check(
        cfg.actor_critic.actor_lr > 0.0,
        "[actor-critic] actor_lr",
        "must be positive",
    )?;
    check(
        cfg.actor_critic.critic_lr > 0.0,
        "[actor-critic] critic_lr",
        "must be positive",
    )?;
    check(
        cfg.actor_critic.batch_size >= 1,
        "[actor-critic] batch_size",
        "must be at least 1",
    )?;
    if let Some(cap) = cfg.actor_critic.grad_norm_cap {
        check(
            cap > 0.0,
            "[actor-critic] grad_norm_cap",
            "must be positive",
        )?;
    }
    check(
        (0.0..=1.0).contains(&cfg.ppo.gamma),
        "[ppo] gamma",
        "must be in [0, 1]",
    )?;
    check(
        (0.0..=1.0).contains(&cfg.ppo.lambda),
        "[ppo] lambda",
        "must be in [0, 1]",
    )?;
    check(
        cfg.ppo.clip_eps > 0.0 && cfg.ppo.clip_eps < 1.0,
        "[ppo] clip_eps",
        "must be in (0, 1)",
    )?;
    check(
        cfg.ppo.vf_coef >= 0.0,
        "[ppo] vf_coef",
        "must be non-negative",
    )?;
    check(
        cfg.ppo.ent_coef >= 0.0,
        "[ppo] ent_coef",
        "must be non-negative",
    )?;
    check(
        cfg.ppo.epochs_per_batch >= 1,
        "[ppo] epochs_per_batch",
        "must be at least 1",
    )?;
    check(
        cfg.ppo.minibatch_size >= 1,
        "[ppo] minibatch_size",
        "must be at least 1",
    )?;
    check(cfg.ppo.lr > 0.0, "[ppo] lr", "must be positive")?;
    check(
        cfg.ppo.target_kl > 0.0,
        "[ppo] target_kl",
        "must be positive",
    )?;
    check(
        cfg.ppo.grad_norm_cap > 0.0,
        "[ppo] grad_norm_cap",
        "must be positive",
    )?;
    check(
        cfg.ppo.batch_size >= 1,
        "[ppo] batch_size",
        "must be at least 1",
    )?;
    check(
        cfg.ppo.max_episode_len >= 1,
        "[ppo] max_episode_len",
        "must be at least 1",
    )?;
    Ok(())
}

fn hidden_to_string(hidden: &[usize]) -> String {
    if hidden.is_empty() {
        "none".to_string()
    } else {
        hidden
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Canonical text form; `parse_config(emit_config(c)) == c`.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };

    line("[run]".into());
    line(format!("algo = {}", cfg.algo.name()));
    line(format!("env = {}", cfg.env.name()));
    line(format!("seed = {}", cfg.seed));
    line(format!("iterations = {}", cfg.iterations));
    line(format!("out_dir = {}", cfg.out_dir.display()));
    line(String::new());

    line("[random-mdp]".into());
    line(format!("n_states = {}", cfg.random_mdp.n_states));
    line(format!("n_actions = {}", cfg.random_mdp.n_actions));
    line(format!("seed = {}", cfg.random_mdp.seed));
    line(String::new());

    line("[dp]".into());
    line(format!("gamma = {}", cfg.dp.gamma));
    line(format!("delta = {}", cfg.dp.delta));
    line(format!("max_sweeps = {}", cfg.dp.max_sweeps));
    line(String::new());

    line("[eval]".into());
    line(format!("gamma = {}", cfg.eval.gamma));
    match cfg.eval.alpha {
        StepSize::Harmonic => line("alpha = harmonic".into()),
        StepSize::Constant(a) => line(format!("alpha = {a}")),
    }
    line(format!("n = {}", cfg.eval.n));
    line(format!("lambda = {}", cfg.eval.lambda));
    line(format!("episodes = {}", cfg.eval.episodes));
    line(format!("max_steps = {}", cfg.eval.max_steps));
    line(format!("delta = {}", cfg.eval.delta));
    line(format!("epsilon = {}", cfg.epsilon));
    line(String::new());

    line("[net]".into());
    line(format!("hidden = {}", hidden_to_string(&cfg.net.hidden)));
    line(String::new());

    line("[reinforce]".into());
    line(format!("gamma = {}", cfg.reinforce.gamma));
    line(format!("lr = {}", cfg.reinforce.lr));
    let variant = match cfg.reinforce.variant {
        ReinforceWeight::TotalReturn => "total-return",
        ReinforceWeight::RewardToGo => "reward-to-go",
        ReinforceWeight::Baseline => "baseline",
    };
    line(format!("variant = {variant}"));
    line(format!("batch_episodes = {}", cfg.reinforce.batch_episodes));
    line(format!(
        "max_episode_len = {}",
        cfg.reinforce.max_episode_len
    ));
    line(format!("critic_lr = {}", cfg.reinforce.critic_lr));
    line(String::new());

    line("[actor-critic]".into());
    line(format!("gamma = {}", cfg.actor_critic.gamma));
    line(format!("actor_lr = {}", cfg.actor_critic.actor_lr));
    line(format!("critic_lr = {}", cfg.actor_critic.critic_lr));
    line(format!(
        "critic_epochs = {}",
        cfg.actor_critic.critic_epochs
    ));
    line(format!("batch_size = {}", cfg.actor_critic.batch_size));
    line(format!(
        "max_episode_len = {}",
        cfg.actor_critic.max_episode_len
    ));
    match cfg.actor_critic.grad_norm_cap {
        Some(cap) => line(format!("grad_norm_cap = {cap}")),
        None => line("grad_norm_cap = off".into()),
    }
    line(String::new());

    line("[ppo]".into());
    line(format!("gamma = {}", cfg.ppo.gamma));
    line(format!("lambda = {}", cfg.ppo.lambda));
    line(format!("clip_eps = {}", cfg.ppo.clip_eps));
    line(format!("vf_coef = {}", cfg.ppo.vf_coef));
    line(format!("ent_coef = {}", cfg.ppo.ent_coef));
    line(format!("epochs_per_batch = {}", cfg.ppo.epochs_per_batch));
    line(format!("minibatch_size = {}", cfg.ppo.minibatch_size));
    line(format!("lr = {}", cfg.ppo.lr));
    line(format!("target_kl = {}", cfg.ppo.target_kl));
    line(format!("grad_norm_cap = {}", cfg.ppo.grad_norm_cap));
    line(format!("value_clip = {}", cfg.ppo.value_clip));
    line(format!("adv_norm = {}", cfg.ppo.adv_norm));
    line(format!("obs_norm = {}", cfg.ppo.obs_norm));
    line(format!("batch_size = {}", cfg.ppo.batch_size));
    line(format!("max_episode_len = {}", cfg.ppo.max_episode_len));
    let target = match cfg.ppo.critic_target {
        CriticTarget::LambdaReturn => "lambda-return",
        CriticTarget::TdTarget => "td",
    };
    line(format!("critic_target = {target}"));
    line(format!("adam = {}", cfg.ppo.adam));

    out
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_config(self))
    }
}
