//! IO companion to `threefold-core`: the flat key-value file formats, JSON
//! reports, the content-addressed result cache, and the verification suite
//! behind the `threefold` binary.

pub mod cache;
pub mod config;
pub mod report;
pub mod specfile;
pub mod suite;

pub use config::{OutputFormat, RunConfig};
pub use specfile::ParseError;
