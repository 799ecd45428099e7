// SPDX-License-Identifier: MIT OR Apache-2.0

//! Configuration for every stage plus the flat `key = value` experiment file.
//!
//! One `key = value` per line, `#` starts a comment, blank lines are ignored.
//! Every key is optional; missing keys keep their default. Unknown or
//! duplicated keys are errors.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Change-space parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSpaceConfig {
    /// Explicit scale set. `None` means the arithmetic grid
    /// `scale_min, scale_min + scale_step, ..., <= scale_max`.
    pub scales: Option<Vec<usize>>,
    pub scale_min: usize,
    pub scale_max: usize,
    pub scale_step: usize,
    pub penalty_weight: f64,
    pub variance_floor: f64,
    pub smoothing_window: usize,
    /// Half-width of the neighbourhood a peak must dominate.
    pub saliency_window: usize,
    pub saliency_sigma: f64,
}

impl Default for ChangeSpaceConfig {
    fn default() -> Self {
        Self {
            scales: None,
            scale_min: 10,
            scale_max: 500,
            scale_step: 10,
            penalty_weight: 0.0,
            variance_floor: 1e-8,
            smoothing_window: 5,
            saliency_window: 25,
            saliency_sigma: 2.0,
        }
    }
}

impl ChangeSpaceConfig {
    /// Config with an explicit scale set; bounds are taken from the set.
    pub fn with_scales(scales: Vec<usize>) -> Self {
        let min = scales.iter().copied().min().unwrap_or(2);
        let max = scales.iter().copied().max().unwrap_or(2);
        Self {
            scales: Some(scales),
            scale_min: min,
            scale_max: max,
            ..Self::default()
        }
    }

    /// The ordered scale set.
    pub fn scales(&self) -> Vec<usize> {
        match &self.scales {
            Some(s) => s.clone(),
            None => (self.scale_min..=self.scale_max)
                .step_by(self.scale_step.max(1))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_min < 2 {
            return Err(Error::config("scale_min", "must be >= 2"));
        }
        if self.scale_max < self.scale_min {
            return Err(Error::config("scale_max", "must be >= scale_min"));
        }
        if self.scale_step == 0 {
            return Err(Error::config("scale_step", "must be >= 1"));
        }
        if let Some(scales) = &self.scales {
            if scales.is_empty() {
                return Err(Error::config("scales", "empty scale set"));
            }
            if scales.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("scales", "must be strictly increasing"));
            }
            if scales
                .iter()
                .any(|&d| d < self.scale_min || d > self.scale_max)
            {
                return Err(Error::config(
                    "scales",
                    "every scale must lie in [scale_min, scale_max]",
                ));
            }
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::config("variance_floor", "must be finite and > 0"));
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::config("smoothing_window", "must be odd and >= 1"));
        }
        if !self.penalty_weight.is_finite() {
            return Err(Error::config("penalty_weight", "must be finite"));
        }
        if !(self.saliency_sigma.is_finite() && self.saliency_sigma >= 0.0) {
            return Err(Error::config("saliency_sigma", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Encoder dimensions other than the data-dependent input length and class count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    /// Hidden units per direction.
    pub hidden_size: usize,
    pub dense_size: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden_size: 160,
            dense_size: 320,
        }
    }
}

/// Phased loss weights: `early` up to and including `phase_boundary`, `late` after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSchedule {
    pub phase_boundary: usize,
    pub early: (f64, f64),
    pub late: (f64, f64),
}

impl Default for LossSchedule {
    fn default() -> Self {
        Self {
            phase_boundary: 100,
            early: (1.0, 0.0),
            late: (2.0, 1.0),
        }
    }
}

impl LossSchedule {
    /// Constant weights for the whole run.
    pub fn constant(lambda1: f64, lambda2: f64) -> Self {
        Self {
            phase_boundary: 0,
            early: (lambda1, lambda2),
            late: (lambda1, lambda2),
        }
    }

    /// `(lambda1, lambda2)` active at the 1-based `epoch`.
    pub fn lambdas(&self, epoch: usize) -> (f64, f64) {
        if epoch <= self.phase_boundary {
            self.early
        } else {
            self.late
        }
    }

    /// Index of the phase containing `epoch` (0 early, 1 late).
    pub fn phase(&self, epoch: usize) -> usize {
        usize::from(epoch > self.phase_boundary)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("lambda1_early", self.early.0),
            ("lambda2_early", self.early.1),
            ("lambda1_late", self.late.0),
            ("lambda2_late", self.late.1),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub grad_clip: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 250,
            patience: 20,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: 5.0,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs", "must be >= 1"));
        }
        if self.patience == 0 || self.patience >= self.max_epochs {
            return Err(Error::config("patience", "must be in [1, max_epochs)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        for (key, v) in [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("grad_clip", self.grad_clip),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        for (key, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(key, "must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    ZScore,
    None,
}

impl Normalize {
    fn as_str(self) -> &'static str {
        match self {
            Normalize::ZScore => "zscore",
            Normalize::None => "none",
        }
    }
}

impl std::str::FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zscore" => Ok(Normalize::ZScore),
            "none" => Ok(Normalize::None),
            other => Err(Error::config(
                "normalize",
                format!("expected `zscore` or `none`, got `{other}`"),
            )),
        }
    }
}

/// Everything one experiment needs, addressable from a single file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub change_space: ChangeSpaceConfig,
    pub mask_ratio: f64,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub schedule: LossSchedule,
    pub normalize: Normalize,
    pub val_fraction: f64,
    /// Fixed segment count; `None` selects it from the training set.
    pub segment_count: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            change_space: ChangeSpaceConfig::default(),
            mask_ratio: 0.15,
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            schedule: LossSchedule::default(),
            normalize: Normalize::ZScore,
            val_fraction: 0.05,
            segment_count: None,
        }
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::config(key, format!("expected a non-negative integer, got `{v}`")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::config(key, format!("expected a real number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.change_space.validate()?;
        self.train.validate()?;
        self.schedule.validate()?;
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::config("mask_ratio", "must lie in (0, 1)"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config("val_fraction", "must lie in (0, 1)"));
        }
        if self.encoder.hidden_size == 0 || self.encoder.dense_size == 0 {
            return Err(Error::config("hidden_size", "encoder sizes must be >= 1"));
        }
        if let Some(k) = self.segment_count {
            if !(2..=crate::change_space::MAX_SEGMENTS).contains(&k) {
                return Err(Error::config("segment_count", "must lie in [2, 50]"));
            }
        }
        Ok(())
    }

    /// Applies a single `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let cs = &mut self.change_space;
        match key {
            "scales" => {
                cs.scales = if value == "grid" {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|p| parse_usize(key, p.trim()))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
            }
            "scale_min" => cs.scale_min = parse_usize(key, value)?,
            "scale_max" => cs.scale_max = parse_usize(key, value)?,
            "scale_step" => cs.scale_step = parse_usize(key, value)?,
            "penalty_weight" => cs.penalty_weight = parse_f64(key, value)?,
            "variance_floor" => cs.variance_floor = parse_f64(key, value)?,
            "smoothing_window" => cs.smoothing_window = parse_usize(key, value)?,
            "saliency_window" => cs.saliency_window = parse_usize(key, value)?,
            "saliency_sigma" => cs.saliency_sigma = parse_f64(key, value)?,
            "mask_ratio" => self.mask_ratio = parse_f64(key, value)?,
            "hidden_size" => self.encoder.hidden_size = parse_usize(key, value)?,
            "dense_size" => self.encoder.dense_size = parse_usize(key, value)?,
            "max_epochs" => self.train.max_epochs = parse_usize(key, value)?,
            "patience" => self.train.patience = parse_usize(key, value)?,
            "learning_rate" => self.train.learning_rate = parse_f64(key, value)?,
            "beta1" => self.train.beta1 = parse_f64(key, value)?,
            "beta2" => self.train.beta2 = parse_f64(key, value)?,
            "epsilon" => self.train.epsilon = parse_f64(key, value)?,
            "grad_clip" => self.train.grad_clip = parse_f64(key, value)?,
            "batch_size" => self.train.batch_size = parse_usize(key, value)?,
            "seed" => {
                self.train.seed = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected u64, got `{value}`")))?
            }
            "phase_boundary" => self.schedule.phase_boundary = parse_usize(key, value)?,
            "lambda1_early" => self.schedule.early.0 = parse_f64(key, value)?,
            "lambda2_early" => self.schedule.early.1 = parse_f64(key, value)?,
            "lambda1_late" => self.schedule.late.0 = parse_f64(key, value)?,
            "lambda2_late" => self.schedule.late.1 = parse_f64(key, value)?,
            "normalize" => self.normalize = value.parse()?,
            "val_fraction" => self.val_fraction = parse_f64(key, value)?,
            "segment_count" => {
                self.segment_count = if value == "auto" {
                    None
                } else {
                    Some(parse_usize(key, value)?)
                }
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), "expected `key = value`")
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "duplicate key"));
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// All keys in a fixed order; `parse(to_config_string())` reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Resolved `(key, value)` pairs in serialization order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let cs = &self.change_space;
        let scales = match &cs.scales {
            None => "grid".to_string(),
            Some(s) => s
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        };
        vec![
            ("scales", scales),
            ("scale_min", cs.scale_min.to_string()),
            ("scale_max", cs.scale_max.to_string()),
            ("scale_step", cs.scale_step.to_string()),
            ("penalty_weight", cs.penalty_weight.to_string()),
            ("variance_floor", cs.variance_floor.to_string()),
            ("smoothing_window", cs.smoothing_window.to_string()),
            ("saliency_window", cs.saliency_window.to_string()),
            ("saliency_sigma", cs.saliency_sigma.to_string()),
            ("mask_ratio", self.mask_ratio.to_string()),
            ("hidden_size", self.encoder.hidden_size.to_string()),
            ("dense_size", self.encoder.dense_size.to_string()),
            ("max_epochs", self.train.max_epochs.to_string()),
            ("patience", self.train.patience.to_string()),
            ("learning_rate", self.train.learning_rate.to_string()),
            ("beta1", self.train.beta1.to_string()),
            ("beta2", self.train.beta2.to_string()),
            ("epsilon", self.train.epsilon.to_string()),
            ("grad_clip", self.train.grad_clip.to_string()),
            ("batch_size", self.train.batch_size.to_string()),
            ("seed", self.train.seed.to_string()),
            ("phase_boundary", self.schedule.phase_boundary.to_string()),
            ("lambda1_early", self.schedule.early.0.to_string()),
            ("lambda2_early", self.schedule.early.1.to_string()),
            ("lambda1_late", self.schedule.late.0.to_string()),
            ("lambda2_late", self.schedule.late.1.to_string()),
            ("normalize", self.normalize.as_str().to_string()),
            ("val_fraction", self.val_fraction.to_string()),
            (
                "segment_count",
                self.segment_count
                    .map_or_else(|| "auto".to_string(), |k| k.to_string()),
            ),
        ]
    }
}
