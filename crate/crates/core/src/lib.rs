// SPDX-License-Identifier: MIT OR Apache-2.0

//! Component-level time-series representation learning.
//!
//! A series is split at salient peaks of a multi-scale change curve, the
//! components are padded into a token sequence, and a bidirectional recurrent
//! encoder learns from masked-token reconstruction plus classification.

pub mod bench;
pub mod change_space;
pub mod config;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod pipeline;
pub mod series;
pub mod synthetic;
pub mod tokenizer;

pub use error::{Error, Result};
pub use series::{ComponentSequence, SegmentBoundaries, TimeSeries};
