//! HTTP/JSON analysis service and command-line front end for `gridpulse`.
//!
//! The [`engine::Engine`] owns a loaded [`dataset::Dataset`], resolves request
//! defaults, runs the analysis and caches serialized responses. The same
//! engine backs the HTTP router in [`http`] and the `gridpulse` binary.

pub mod api;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod http;
pub mod ingest;
pub mod schema;

pub use engine::Engine;
