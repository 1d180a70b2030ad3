//! Experiment driver for the `mrbv` library: TOML configs, epsilon sweeps,
//! CSV artifacts and plot data.

pub mod commands;
pub mod config;
