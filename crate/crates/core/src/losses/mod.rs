//! Differentiable segmentation losses.
//!
//! Every loss takes the prediction as a [`Var`] on a tape (values in
//! `[0, 1]`) and the label as a constant [`BinaryMask`], and returns a 1x1
//! node that is minimised at a perfect prediction.

mod fit;

pub use fit::{fit_logits, logits_of, FitOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, BinaryMask};
use crate::morphology::{smooth_diffuse, soft_skeleton, DiffusionConfig, SkeletonConfig};
use crate::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub s_border: usize,
    pub n_iter_max: usize,
    pub f: f64,
    /// Sharpness of the smooth threshold applied to predictions.
    pub sharpness: f64,
    pub epsilon: f64,
    pub skeleton_iterations: usize,
    pub mix_dice_weight: f64,
    pub mix_studied_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        let diffusion = DiffusionConfig::default();
        Self {
            s_border: diffusion.s_border,
            n_iter_max: diffusion.n_iter_max,
            f: diffusion.f,
            sharpness: 10.0,
            epsilon: EPSILON,
            skeleton_iterations: SkeletonConfig::default().iterations,
            mix_dice_weight: 3.0,
            mix_studied_weight: 1.0,
        }
    }
}

impl LossConfig {
    pub fn diffusion(&self) -> DiffusionConfig {
        DiffusionConfig {
            s_border: self.s_border,
            n_iter_max: self.n_iter_max,
            f: self.f,
        }
    }

    pub fn skeleton(&self) -> SkeletonConfig {
        SkeletonConfig {
            iterations: self.skeleton_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.diffusion().validate()?;
        self.skeleton().validate()?;
        if !(self.sharpness.is_finite() && self.sharpness > 0.0) {
            return Err(Error::param("sharpness", "must be positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(self.mix_dice_weight.is_finite() && self.mix_studied_weight.is_finite()) {
            return Err(Error::param("mix weights", "must be finite"));
        }
        Ok(())
    }
}

/// Which loss a training or evaluation run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Dice,
    ClDice,
    SkilDice,
    SkilProduct,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Dice,
        LossKind::ClDice,
        LossKind::SkilDice,
        LossKind::SkilProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Dice => "dice",
            LossKind::ClDice => "cl-dice",
            LossKind::SkilDice => "skil-dice",
            LossKind::SkilProduct => "skil-product",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "selector",
                    format!("unknown loss `{s}` (expected dice, cl-dice, skil-dice or skil-product)"),
                )
            })
    }
}

fn check_pair(pred: &Var<'_>, label: &BinaryMask) -> Result<()> {
    ensure_same_shape(pred.shape(), label.shape())
}

/// `sigmoid(s * (p - 0.5))`, elementwise.
pub fn smooth_threshold(pred: Var<'_>, s: f64) -> Result<Var<'_>> {
    pred.affine(s, -0.5 * s)?.sigmoid()
}

/// `1 - (2 Σ P·L + ε) / (Σ P + Σ L + ε)`.
pub fn soft_dice_loss<'t>(pred: Var<'t>, label: &BinaryMask, epsilon: f64) -> Result<Var<'t>> {
    check_pair(&pred, label)?;
    let l = pred.tape().constant(label.to_field());
    let inter = pred.mul(l)?.sum()?.affine(2.0, epsilon)?;
    let total = pred.sum()?.add_scalar(label.count() as f64 + epsilon)?;
    inter.div(total)?.one_minus()
}

/// `(Σ a·b + ε) / (Σ a + ε)`: the share of `a`'s mass covered by `b`.
fn coverage<'t>(a: Var<'t>, b: Var<'t>, epsilon: f64) -> Result<Var<'t>> {
    a.mul(b)?
        .sum()?
        .add_scalar(epsilon)?
        .div(a.sum()?.add_scalar(epsilon)?)
}

/// CL-Dice: harmonic mean of topology precision (prediction skeleton inside
/// the label) and sensitivity (label skeleton inside the prediction).
pub fn cl_dice_loss<'t>(pred: Var<'t>, label: &BinaryMask, cfg: &LossConfig) -> Result<Var<'t>> {
    check_pair(&pred, label)?;
    let tape = pred.tape();
    let sharp = smooth_threshold(pred, cfg.sharpness)?;
    let l = tape.constant(label.to_field());
    let skel_p = soft_skeleton(sharp, &cfg.skeleton())?;
    let skel_l = soft_skeleton(l, &cfg.skeleton())?;
    let tprec = coverage(skel_p, l, cfg.epsilon)?;
    let tsens = coverage(skel_l, sharp, cfg.epsilon)?;
    tprec
        .mul(tsens)?
        .scale(2.0)?
        .div(tprec.add(tsens)?)?
        .one_minus()
}

/// Diffused soft skeletons of the thresholded prediction and of the label.
fn diffused_skeletons<'t>(
    pred: Var<'t>,
    label: &BinaryMask,
    cfg: &LossConfig,
) -> Result<SkeletonPair<'t>> {
    cfg.validate()?;
    let tape = pred.tape();
    let sharp = smooth_threshold(pred, cfg.sharpness)?;
    let skel_p = soft_skeleton(sharp, &cfg.skeleton())?;
    let skel_l = soft_skeleton(tape.constant(label.to_field()), &cfg.skeleton())?;
    Ok(SkeletonPair {
        skel_p,
        skel_l,
        dif_p: smooth_diffuse(skel_p, &cfg.diffusion())?,
        dif_l: smooth_diffuse(skel_l, &cfg.diffusion())?,
    })
}

struct SkeletonPair<'t> {
    skel_p: Var<'t>,
    skel_l: Var<'t>,
    dif_p: Var<'t>,
    dif_l: Var<'t>,
}

/// SKIL-Dice, returned as `1 - Dice(Dif(S_P̃), Dif(S_L))`.
///
/// The Dice between the two diffused skeletons uses squared magnitudes in
/// the denominator, `(2 Σ a·b + ε) / (Σ a² + Σ b² + ε)`, so that identical
/// fractional halos score exactly 1.
pub fn skil_dice_loss<'t>(pred: Var<'t>, label: &BinaryMask, cfg: &LossConfig) -> Result<Var<'t>> {
    check_pair(&pred, label)?;
    let SkeletonPair { dif_p, dif_l, .. } = diffused_skeletons(pred, label, cfg)?;
    let inter = dif_p.mul(dif_l)?.sum()?.affine(2.0, cfg.epsilon)?;
    let norm = dif_p
        .mul(dif_p)?
        .sum()?
        .add(dif_l.mul(dif_l)?.sum()?)?
        .add_scalar(cfg.epsilon)?;
    inter.div(norm)?.one_minus()
}

/// SKIL-Product: `1 - sqrt(g(P̃, L) · g(L, P̃))` with
/// `g(A, B) = (Σ S_A · Dif(S_B) + ε) / (Σ S_A + ε)`.
pub fn skil_product_loss<'t>(
    pred: Var<'t>,
    label: &BinaryMask,
    cfg: &LossConfig,
) -> Result<Var<'t>> {
    check_pair(&pred, label)?;
    let SkeletonPair {
        skel_p,
        skel_l,
        dif_p,
        dif_l,
    } = diffused_skeletons(pred, label, cfg)?;
    let g_pl = coverage(skel_p, dif_l, cfg.epsilon)?;
    let g_lp = coverage(skel_l, dif_p, cfg.epsilon)?;
    g_pl.mul(g_lp)?.sqrt()?.one_minus()
}

/// A single loss, unweighted.
pub fn loss<'t>(
    kind: LossKind,
    pred: Var<'t>,
    label: &BinaryMask,
    cfg: &LossConfig,
) -> Result<Var<'t>> {
    match kind {
        LossKind::Dice => soft_dice_loss(pred, label, cfg.epsilon),
        LossKind::ClDice => cl_dice_loss(pred, label, cfg),
        LossKind::SkilDice => skil_dice_loss(pred, label, cfg),
        LossKind::SkilProduct => skil_product_loss(pred, label, cfg),
    }
}

/// Training mixture: `w_dice · Dice + w_studied · studied`. With `studied`
/// set to Dice the two weights collapse onto the Dice term.
pub fn mixed_loss<'t>(
    pred: Var<'t>,
    label: &BinaryMask,
    studied: LossKind,
    cfg: &LossConfig,
) -> Result<Var<'t>> {
    let dice = soft_dice_loss(pred, label, cfg.epsilon)?;
    if studied == LossKind::Dice {
        return dice.scale(cfg.mix_dice_weight + cfg.mix_studied_weight);
    }
    let other = loss(studied, pred, label, cfg)?;
    dice.scale(cfg.mix_dice_weight)?
        .add(other.scale(cfg.mix_studied_weight)?)
}
