//! File formats, scene bundles, run manifests and the command-line driver
//! built on `ts2c-core`.
//!
//! - [`mapfile`]: `.tscf` float maps, PGM greymaps, label masks.
//! - [`csvio`]: box, ground-truth and scored-pool CSV.
//! - [`bundle`]: per-image bundle directories and corpora of them.
//! - [`manifest`]: reproducibility records with output checksums.
//! - [`pipeline`]: corpus-level generate, score and sweep steps.
//! - [`cli`]: the `ts2c` command line.

pub mod bundle;
pub mod cli;
pub mod csvio;
pub mod error;
pub mod manifest;
pub mod mapfile;
pub mod pipeline;

pub use error::{FormatError, RowError};
