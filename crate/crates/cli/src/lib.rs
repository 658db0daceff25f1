//! Library surface of the command-line pipeline, kept separate from the
//! binary so integration tests can drive commands directly.

pub mod commands;
pub mod config;
