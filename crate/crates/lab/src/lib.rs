//! Experiment harness around `qubus-core`: gate demos, growth Monte Carlo,
//! scaling tables and the acceptance suite, with CSV, JSONL and SVG output.

pub mod commands;
pub mod config;
pub mod driver;
pub mod expr;
pub mod graph_io;
pub mod oracle;
pub mod output;
pub mod plot;
pub mod verify;
