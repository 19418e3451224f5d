//! Experiment harness for the `kfrelax` estimators: run configuration,
//! training loops with CSV emission, and self-contained SVG charts.
//!
//! The binary (`kfrelax`) wires these into the `toy`, `rl`, `lax`, `lemmas`
//! and `plot` subcommands.

pub mod config;
pub mod csvout;
pub mod runs;
pub mod svg;
