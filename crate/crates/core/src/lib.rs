//! Speech side-channel analysis over smartphone accelerometer traces.
//!
//! The crate covers the whole offline chain: CSV ingestion and resampling
//! ([`ingest`]), filtering, spectrograms and the under-sampling alias model
//! ([`dsp`]), word-region detection ([`segment`]), time/frequency statistics
//! ([`features`]), classical tree-ensemble classifiers with their evaluation
//! protocol ([`ml`]), and a synthetic vibration channel that produces
//! ground-truth labelled traces ([`simulate`]).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod features;
pub mod ingest;
pub mod ml;
pub mod seed;
pub mod segment;
pub mod simulate;

pub use ingest::{Axis, ColumnMapping, SampleStream};
