//! Experiment runner behind the `lexrl` binary: config files, the run,
//! verify and oracle commands, and policy renders.

pub mod commands;
pub mod config;
pub mod render;
