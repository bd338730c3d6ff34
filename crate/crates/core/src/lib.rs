//! Localization and tracing of oscillation events across a network of
//! synchronized grid sensors (PMUs).
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: grid topology, sample blocks, attribute codes, event records
//! - [`synthgen`]: seeded synthetic grids and 30 Hz data with ground truth
//! - [`store`]: day-partitioned columnar files with 15-minute row groups
//! - [`spectral`]: sliding-window spectra, dominant-frequency timeline, flagging
//! - [`localize`]: epicenter ranking and the network density field
//! - [`epicluster`]: hop-layered cluster dendrograms around an epicenter
//! - [`embed`]: spectral distance matrices and t-SNE similarity layout
//! - [`reports`]: linking operator report text to PMUs
//!
//! Runnable walkthroughs for each capability live under `examples/`.

pub mod embed;
pub mod epicluster;
pub mod error;
pub mod localize;
pub mod model;
pub mod reports;
pub mod spectral;
pub mod store;
pub mod synthgen;

pub use error::{Error, Result};
