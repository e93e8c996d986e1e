//! Experiment harness: configuration, the closed adaptive loop, seeded
//! Monte Carlo studies and figure-data outputs.

pub mod cli;
pub mod config;
pub mod montecarlo;
pub mod output;
pub mod runner;
