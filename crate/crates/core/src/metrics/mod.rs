//! Overlap metrics and the skeleton-based LineAcc family.
//!
//! All metrics compare a hardened prediction with a binary label and return
//! values in `[0, 1]`. Skeletons come from
//! [`hard_skeleton`](crate::morphology::hard_skeleton); distances from
//! [`distance_transform_l1`].
//!
//! Empty masks: both empty scores 1 everywhere; exactly one empty scores 0
//! for Dice, IoU and position, while the length and width ratios are
//! evaluated with their ε guards as usual.

mod report;

pub use report::{
    aggregate, evaluate_dirs, evaluate_pair, write_csv, Aggregate, ImageRow, MetricReport,
    PairFailure,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{distance_transform_l1, ensure_same_shape, BinaryMask};
use crate::morphology::hard_skeleton;
use crate::EPSILON;

/// Weights of the combined score, in the order
/// `(pos, width, length, dice, iou)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedWeights {
    pub pos: f64,
    pub width: f64,
    pub length: f64,
    pub dice: f64,
    pub iou: f64,
}

impl Default for CombinedWeights {
    fn default() -> Self {
        Self {
            pos: 2.0,
            width: 0.5,
            length: 0.5,
            dice: 0.5,
            iou: 0.5,
        }
    }
}

impl CombinedWeights {
    pub fn total(&self) -> f64 {
        self.pos + self.width + self.length + self.dice + self.iou
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Gaussian scale of the position score, in pixels.
    pub sigma: f64,
    pub epsilon: f64,
    pub combined_weights: CombinedWeights,
    /// Divide the combined score by the weight total.
    pub normalize_combined: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            epsilon: EPSILON,
            combined_weights: CombinedWeights::default(),
            normalize_combined: true,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        let w = self.combined_weights;
        if [w.pos, w.width, w.length, w.dice, w.iou]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
            || w.total() <= 0.0
        {
            return Err(Error::param(
                "combined_weights",
                "must be non-negative with a positive total",
            ));
        }
        Ok(())
    }
}

/// Every metric for one prediction/label pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub iou: f64,
    pub dice: f64,
    pub lineacc_pos: f64,
    pub lineacc_width: f64,
    pub lineacc_length: f64,
    pub lineacc_combined: f64,
}

impl MetricScores {
    pub const FIELDS: [&'static str; 6] = [
        "iou",
        "dice",
        "lineacc_pos",
        "lineacc_width",
        "lineacc_length",
        "lineacc_combined",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.iou,
            self.dice,
            self.lineacc_pos,
            self.lineacc_width,
            self.lineacc_length,
            self.lineacc_combined,
        ]
    }

    pub fn from_values(v: [f64; 6]) -> Self {
        Self {
            iou: v[0],
            dice: v[1],
            lineacc_pos: v[2],
            lineacc_width: v[3],
            lineacc_length: v[4],
            lineacc_combined: v[5],
        }
    }

    /// Computes every score, skeletonizing each mask once.
    pub fn compute(pred: &BinaryMask, label: &BinaryMask, cfg: &MetricConfig) -> Result<Self> {
        ensure_same_shape(pred.shape(), label.shape())?;
        cfg.validate()?;
        let sk = Skeletons::new(pred, label);
        let dice = dice(pred, label)?;
        let iou = iou(pred, label)?;
        let pos = sk.position(cfg.sigma);
        let width = sk.width(cfg.epsilon);
        let length = sk.length(cfg.epsilon);
        Ok(Self {
            iou,
            dice,
            lineacc_pos: pos,
            lineacc_width: width,
            lineacc_length: length,
            lineacc_combined: combine(pos, width, length, dice, iou, cfg),
        })
    }
}

fn overlap_counts(pred: &BinaryMask, label: &BinaryMask) -> Result<(usize, usize, usize)> {
    ensure_same_shape(pred.shape(), label.shape())?;
    let inter = pred
        .as_slice()
        .iter()
        .zip(label.as_slice())
        .filter(|(&p, &l)| p && l)
        .count();
    Ok((inter, pred.count(), label.count()))
}

/// `2|P∩L| / (|P| + |L|)`; 1 when both are empty.
pub fn dice(pred: &BinaryMask, label: &BinaryMask) -> Result<f64> {
    let (inter, p, l) = overlap_counts(pred, label)?;
    if p + l == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + l) as f64)
}

/// `|P∩L| / |P∪L|`; 1 when both are empty.
pub fn iou(pred: &BinaryMask, label: &BinaryMask) -> Result<f64> {
    let (inter, p, l) = overlap_counts(pred, label)?;
    let union = p + l - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

struct Skeletons<'a> {
    pred: &'a BinaryMask,
    label: &'a BinaryMask,
    skel_pred: BinaryMask,
    skel_label: BinaryMask,
}

impl<'a> Skeletons<'a> {
    fn new(pred: &'a BinaryMask, label: &'a BinaryMask) -> Self {
        Self {
            pred,
            label,
            skel_pred: hard_skeleton(pred),
            skel_label: hard_skeleton(label),
        }
    }

    fn position(&self, sigma: f64) -> f64 {
        lineacc_pos_from_skeletons(&self.skel_pred, &self.skel_label, sigma)
    }

    fn length(&self, epsilon: f64) -> f64 {
        length_score(self.skel_pred.count(), self.skel_label.count(), epsilon)
    }

    fn width(&self, epsilon: f64) -> f64 {
        width_score(
            self.pred.count(),
            self.label.count(),
            self.skel_pred.count(),
            self.skel_label.count(),
            epsilon,
        )
    }
}

/// Length ratio score from skeleton pixel counts.
pub fn length_score(skel_pred: usize, skel_label: usize, epsilon: f64) -> f64 {
    let (sp, sl) = (skel_pred as f64, skel_label as f64);
    (-((sp + epsilon) / (sl + epsilon) - 1.0).abs()).exp()
}

/// Width ratio score from mask and skeleton pixel counts.
pub fn width_score(
    pred_area: usize,
    label_area: usize,
    skel_pred: usize,
    skel_label: usize,
    epsilon: f64,
) -> f64 {
    let (p, l) = (pred_area as f64, label_area as f64);
    let (sp, sl) = (skel_pred as f64, skel_label as f64);
    (-((l * sp + epsilon) / (p * sl + epsilon) - 1.0).abs()).exp()
}

/// Mean Gaussian closeness of each skeleton to the other, multiplied:
///
/// `[Σ S_P · exp(-d(S_L)²/2σ²) / Σ S_P] · [Σ S_L · exp(-d(S_P)²/2σ²) / Σ S_L]`
///
/// where `d` is the L1 distance map. Takes skeletons directly.
pub fn lineacc_pos_from_skeletons(skel_pred: &BinaryMask, skel_label: &BinaryMask, sigma: f64) -> f64 {
    match (skel_pred.any(), skel_label.any()) {
        (false, false) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let closeness = |from: &BinaryMask, to: &BinaryMask| {
        let d = distance_transform_l1(to);
        let total: f64 = from
            .ones()
            .map(|(r, c)| {
                let v = d.get(r, c);
                (-v * v / (2.0 * sigma * sigma)).exp()
            })
            .sum();
        total / from.count() as f64
    };
    closeness(skel_pred, skel_label) * closeness(skel_label, skel_pred)
}

pub fn lineacc_pos(pred: &BinaryMask, label: &BinaryMask, cfg: &MetricConfig) -> Result<f64> {
    ensure_same_shape(pred.shape(), label.shape())?;
    cfg.validate()?;
    Ok(Skeletons::new(pred, label).position(cfg.sigma))
}

/// `exp(-|(Σ S_P + ε) / (Σ S_L + ε) - 1|)`.
pub fn lineacc_length(pred: &BinaryMask, label: &BinaryMask, cfg: &MetricConfig) -> Result<f64> {
    ensure_same_shape(pred.shape(), label.shape())?;
    cfg.validate()?;
    Ok(Skeletons::new(pred, label).length(cfg.epsilon))
}

/// `exp(-|(Σ L · Σ S_P + ε) / (Σ P · Σ S_L + ε) - 1|)`: area ratio balanced by
/// the inverse skeleton-length ratio.
pub fn lineacc_width(pred: &BinaryMask, label: &BinaryMask, cfg: &MetricConfig) -> Result<f64> {
    ensure_same_shape(pred.shape(), label.shape())?;
    cfg.validate()?;
    Ok(Skeletons::new(pred, label).width(cfg.epsilon))
}

pub fn lineacc_combined(pred: &BinaryMask, label: &BinaryMask, cfg: &MetricConfig) -> Result<f64> {
    Ok(MetricScores::compute(pred, label, cfg)?.lineacc_combined)
}

/// Weighted sum of the constituents, divided by the weight total when
/// `normalize_combined` is set.
pub fn combine(pos: f64, width: f64, length: f64, dice: f64, iou: f64, cfg: &MetricConfig) -> f64 {
    let w = cfg.combined_weights;
    let raw = w.pos * pos + w.width * width + w.length * length + w.dice * dice + w.iou * iou;
    if cfg.normalize_combined {
        raw / w.total()
    } else {
        raw
    }
}

#[cfg(test)]
mod tests;
