//! Command-line entry point. Exit codes: 0 success, 1 usage error,
//! 2 runtime failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpi_rl_cli::checks::run_all_checks;
use gpi_rl_cli::config::{parse_config, Algo, EnvSpec, RunConfig};
use gpi_rl_cli::runner::{eval_policy, run, RunError};

#[derive(Parser)]
#[command(
    name = "gpi-rl",
    version,
    about = "Train and evaluate tabular and policy-gradient agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training or evaluation algorithm and write its artifacts.
    Train(TrainArgs),
    /// Solve the environment exactly with value iteration.
    Solve(SolveArgs),
    /// Evaluate a stored policy file empirically and exactly.
    Eval(EvalArgs),
    /// Run the gradient and identity verification suites.
    Check,
}

#[derive(Args)]
struct TrainArgs {
    /// Algorithm: mc-eval | td-eval | td-lambda-eval | mc-gpi | dp-solve |
    /// reinforce | actor-critic | ppo
    #[arg(long)]
    algo: Option<String>,
    /// Environment: frozenlake | frozenlake-slippery | random-mdp
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Configuration file (key = value sections); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics.csv, final_policy.csv, summary.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Discount for the exact solve (overrides [dp] gamma).
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy file in the final_policy.csv format.
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    env: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, RunError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| RunError::Io {
                path: p.display().to_string(),
                source,
            })?;
            parse_config(&text).map_err(|e| RunError::Usage(e.to_string()))
        }
    }
}

fn parse_algo(text: &str) -> Result<Algo, RunError> {
    Algo::parse(text).ok_or_else(|| RunError::Usage(format!("unknown algorithm `{text}`")))
}

fn parse_env(text: &str) -> Result<EnvSpec, RunError> {
    EnvSpec::parse(text).ok_or_else(|| RunError::Usage(format!("unknown environment `{text}`")))
}

fn train(args: &TrainArgs) -> Result<(), RunError> {
    let mut cfg = load_config(args.config.as_ref())?;
    if let Some(algo) = &args.algo {
        cfg.algo = parse_algo(algo)?;
    }
    if let Some(env) = &args.env {
        cfg.env = parse_env(env)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(iterations) = args.iterations {
        cfg.iterations = iterations;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    gpi_rl_cli::config::validate(&cfg).map_err(|e| RunError::Usage(e.to_string()))?;

    let summary = run(&cfg)?;
    println!(
        "{} on {}: success_rate {} mean_return {} ({:.3}s)",
        cfg.algo.name(),
        cfg.env.name(),
        summary.success_rate,
        summary.mean_return,
        summary.wall_seconds
    );
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<(), RunError> {
    let mut cfg = load_config(args.config.as_ref())?;
    cfg.algo = Algo::DpSolve;
    if let Some(env) = &args.env {
        cfg.env = parse_env(env)?;
    }
    if let Some(gamma) = args.gamma {
        cfg.dp.gamma = gamma;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    gpi_rl_cli::config::validate(&cfg).map_err(|e| RunError::Usage(e.to_string()))?;

    let summary = run(&cfg)?;
    println!(
        "solved {}: success_rate {} value(start) {}",
        cfg.env.name(),
        summary.success_rate,
        summary.mean_return
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<(), RunError> {
    let env = match &args.env {
        Some(text) => parse_env(text)?,
        None => EnvSpec::FrozenLake,
    };
    let report = eval_policy(
        &args.policy,
        env,
        gpi_rl_cli::config::RandomMdpConfig::default(),
        args.episodes,
        args.seed,
    )?;
    println!(
        "episodes {}: empirical success {} mean_return {} | exact success {}",
        report.episodes,
        report.empirical_success,
        report.empirical_mean_return,
        report.exact_success
    );
    Ok(())
}

fn check() -> Result<(), RunError> {
    let results = run_all_checks();
    let mut failures = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        if r.detail.is_empty() {
            println!("{status}  {}", r.name);
        } else {
            println!("{status}  {} ({})", r.name, r.detail);
        }
        failures += usize::from(!r.passed);
    }
    println!("{} checks, {} failed", results.len(), failures);
    if failures > 0 {
        return Err(RunError::Runtime(format!("{failures} checks failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    // Map argument-parsing problems to the usage exit code.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints its own help/version output with success status.
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };

    let result = match &cli.command {
        Command::Train(args) => train(args),
        Command::Solve(args) => solve(args),
        Command::Eval(args) => eval(args),
        Command::Check => check(),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
