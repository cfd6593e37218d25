//! Experiment runner behind the `mdplab` binary: typed configs, reproducible
//! artifact directories and the report that checks them.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod env;
pub mod report;
