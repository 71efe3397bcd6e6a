//! Configuration and drivers behind the `normgp` binary.

pub mod config;
pub mod run;
