//! File formats, the episode directory layout and the command implementations
//! behind the `push2seg` binary.

pub mod commands;
pub mod episode_dir;
pub mod error;
pub mod flo;
pub mod fsio;
pub mod pgm;

pub use error::{CliError, Result};
