//! Pipeline orchestration, input acquisition and report emission for the
//! `vmspos` command.

pub mod acquire;
pub mod config;
pub mod emit;
pub mod pipeline;
pub mod report;
pub mod schema;
