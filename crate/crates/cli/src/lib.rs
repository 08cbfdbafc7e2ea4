//! Command-line driver for prune-lab: TOML experiment files, SVG plots and
//! CSV/JSON tables.

pub mod app;
pub mod config;
pub mod report;
