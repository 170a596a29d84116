//! File formats, run configuration and the `hyperorbit` command line.

pub mod cli;
pub mod config;
pub mod report;
pub mod schema;
pub mod suites;
pub mod svg;
