// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("series too short: {len} samples, need at least 2")]
    TooShort { len: usize },

    #[error("t={t} outside support [{lo}, {hi}] for scale {delta}")]
    OutOfSupport {
        t: usize,
        delta: usize,
        lo: usize,
        hi: usize,
    },

    #[error("no scale satisfies 2*delta <= {len} (smallest configured scale is {min_scale})")]
    NoValidScale { len: usize, min_scale: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("series {index} has no class label")]
    MissingLabel { index: usize },

    #[error("segment count {k} exceeds series length {len}")]
    KTooLarge { k: usize, len: usize },

    #[error("segment of length {len} exceeds padded length {padded}")]
    SegmentTooLong { len: usize, padded: usize },

    #[error("index {index} out of range for {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite gradient at epoch {epoch}, batch {batch}")]
    NonFiniteGradient { epoch: usize, batch: usize },

    #[error("boundaries do not tile [0, {len}): {reason}")]
    PartitionMismatch { len: usize, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("file contains no series")]
    EmptyFile,

    #[error("need at least 2 series to split, got {0}")]
    TooFewSeries(usize),

    #[error("config error for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
