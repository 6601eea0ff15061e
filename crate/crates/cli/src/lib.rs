//! Command-line front end and HTTP service for line-up fitting and selection.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod run;
pub mod server;
