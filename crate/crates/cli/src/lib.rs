//! Library surface of the training CLI: configuration parsing, run
//! orchestration, policy evaluation, and the verification suites.

pub mod checks;
pub mod config;
pub mod runner;
