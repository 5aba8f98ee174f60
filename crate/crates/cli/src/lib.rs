//! Command-line front end for the reconciliation simulator.
//!
//! Commands write tidy CSV plus a `manifest.json` into the output directory.

pub mod commands;
pub mod config;
pub mod validate;

use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const RUNTIME: i32 = 3;
    pub const VALIDATION: i32 = 4;
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
    /// `validate` ran and this many checks failed.
    Validation(usize),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => exit::CONFIG,
            Failure::Runtime(_) => exit::RUNTIME,
            Failure::Validation(_) => exit::VALIDATION,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Runtime(e) => write!(f, "error: {e:#}"),
            Failure::Validation(n) => write!(f, "validation failed: {n} check(s) did not pass"),
        }
    }
}
