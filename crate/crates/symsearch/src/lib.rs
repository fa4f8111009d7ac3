//! Discovery of interpretable logical rules that recognize events from
//! object-detection records.
//!
//! The pipeline ingests labeled per-image detection records, turns them into
//! named numeric features, and runs an evolutionary search over typed
//! expression trees for a boolean rule that separates event images from
//! non-event images. An optional suggestion provider (an LLM endpoint or a
//! deterministic mock) can steer the search.

pub mod detections;
pub mod error;
pub mod expr;
pub mod features;
pub mod fitness;
pub mod guidance;
pub mod harness;
pub mod search;

pub use error::{Error, Result};
