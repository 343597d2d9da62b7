//! Popularity-bias audit toolkit for collaborative-filtering recommenders.
//!
//! The pipeline runs ingest → popularity → grouping → cross-validated
//! evaluation → bias analysis; [`runner`] wires the stages together and
//! writes a report bundle of CSV and JSON files.

pub mod bias_analysis;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod popularity;
pub mod recommenders;
pub mod runner;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
