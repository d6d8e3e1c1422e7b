//! Network face of the street layer engine: HTTP API, change feed and CLI.

pub mod api;
pub mod cli;
