//! Configuration, presets and artifact output for the `sim` tool.

pub mod config;
pub mod output;
pub mod suite;
