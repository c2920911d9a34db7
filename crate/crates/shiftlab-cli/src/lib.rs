//! File formats and configuration for the shiftlab command-line driver.
//! The binary lives in `main.rs`; these modules are exposed so integration
//! tests (and other tools) can read what the commands write.

pub mod annotations;
pub mod config;
pub mod error;
pub mod gridio;
pub mod util;
