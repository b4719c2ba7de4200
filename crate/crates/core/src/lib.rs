//! Reinforcement learning from first principles on explicit tabular MDPs:
//! exact dynamic-programming oracles, Monte-Carlo and temporal-difference
//! evaluation, a minimal reverse-mode function approximator, generalized
//! advantage estimation, and the REINFORCE / actor-critic / PPO family.
//!
//! Everything is seeded and deterministic; the exact solvers in [`dp`]
//! double as test oracles for every sampling estimator.

pub mod approx;
pub mod dp;
pub mod estimators;
pub mod mdp;
pub mod policy;
pub mod tabular;
