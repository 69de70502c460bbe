//! Reproducible workflows around the `mhmm` library: simulate, fit, decode,
//! posterior predictive checks, Monte Carlo studies and reports.

pub mod commands;
pub mod config;
pub mod montecarlo;
pub mod svg;

pub use config::RunConfig;
