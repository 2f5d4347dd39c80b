//! Flat `key = value` configuration files.
//!
//! Keys are the field names of the loss, metric and deformation configs.
//! `epsilon` sets the guard of both losses and metrics. Lines starting with
//! `#` and blank lines are ignored.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use skil_core::deform::DeformConfig;
use skil_core::losses::LossConfig;
use skil_core::metrics::MetricConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Settings {
    pub loss: LossConfig,
    pub metric: MetricConfig,
    pub deform: DeformConfig,
}

/// A malformed configuration or flag value.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| UsageError(format!("invalid value {value:?} for {key}: {e}")).into())
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let l = &mut self.loss;
        let m = &mut self.metric;
        let d = &mut self.deform;
        match key {
            "s_border" => l.s_border = parse(key, value)?,
            "n_iter_max" => l.n_iter_max = parse(key, value)?,
            "f" => l.f = parse(key, value)?,
            "sharpness" => l.sharpness = parse(key, value)?,
            "skeleton_iterations" => l.skeleton_iterations = parse(key, value)?,
            "mix_dice_weight" => l.mix_dice_weight = parse(key, value)?,
            "mix_studied_weight" => l.mix_studied_weight = parse(key, value)?,
            "epsilon" => {
                l.epsilon = parse(key, value)?;
                m.epsilon = l.epsilon;
            }
            "sigma" => m.sigma = parse(key, value)?,
            "normalize_combined" => m.normalize_combined = parse(key, value)?,
            "weight_pos" => m.combined_weights.pos = parse(key, value)?,
            "weight_width" => m.combined_weights.width = parse(key, value)?,
            "weight_length" => m.combined_weights.length = parse(key, value)?,
            "weight_dice" => m.combined_weights.dice = parse(key, value)?,
            "weight_iou" => m.combined_weights.iou = parse(key, value)?,
            "kind" => d.kind = parse(key, value)?,
            "shift_max" => d.shift_max = parse(key, value)?,
            "alpha" => d.alpha = parse(key, value)?,
            "p" => d.p = parse(key, value)?,
            "apply_probability" => d.apply_probability = parse(key, value)?,
            "seed" => d.seed = parse(key, value)?,
            "amplitude_low" => d.perlin.amplitude_range[0] = parse(key, value)?,
            "amplitude_high" => d.perlin.amplitude_range[1] = parse(key, value)?,
            "resolution" => d.perlin.resolution = parse(key, value)?,
            "octaves" => d.perlin.octaves = parse(key, value)?,
            "persistence" => d.perlin.persistence = parse(key, value)?,
            "lacunarity" => d.perlin.lacunarity = parse(key, value)?,
            _ => bail!(UsageError(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(UsageError(format!("line {}: expected key = value", n + 1)));
            };
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut settings = Self::default();
        settings
            .apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.metric.validate()?;
        self.deform.validate()?;
        Ok(())
    }
}
