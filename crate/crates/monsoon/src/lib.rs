//! File formats, run configuration and the `monsoon` command-line front end
//! for [`monsoon_core`].

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{cmd_analyze, cmd_evaluate, cmd_fit, cmd_simulate, cmd_synth, Summary};
pub use config::RunConfig;
