//! Label degradations used to simulate annotation noise: shift, random width
//! change and branch cutting, plus their seeded combination.
//!
//! Width and branch deformations modulate the inner distance of the label's
//! skeleton with Perlin noise and rebuild a mask with
//! [`decrease_dilate`]. Their noise seed is the deformation seed; the
//! `seed` field of the nested [`PerlinConfig`] is ignored there.

mod perlin;

pub use perlin::{perlin_field, PerlinConfig};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, inner_distance, BinaryMask, ScalarField};
use crate::morphology::{decrease_dilate, hard_skeleton};
use crate::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeformKind {
    Shift,
    Width,
    Branch,
    Combined,
}

impl DeformKind {
    pub const ALL: [DeformKind; 4] = [
        DeformKind::Shift,
        DeformKind::Width,
        DeformKind::Branch,
        DeformKind::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeformKind::Shift => "shift",
            DeformKind::Width => "width",
            DeformKind::Branch => "branch",
            DeformKind::Combined => "combined",
        }
    }
}

impl fmt::Display for DeformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::param(
                    "kind",
                    format!("unknown deformation {s:?}, expected shift, width, branch or combined"),
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformConfig {
    pub kind: DeformKind,
    /// Largest shift along each axis, in pixels.
    pub shift_max: usize,
    /// Selectiveness of the branch cutter.
    pub alpha: f64,
    /// Cut probability: skeleton pixels with `P > 1 - p` are removed.
    pub p: f64,
    /// Chance that each stage of the combined deformation fires.
    pub apply_probability: f64,
    pub perlin: PerlinConfig,
    pub seed: u64,
}

impl Default for DeformConfig {
    fn default() -> Self {
        Self {
            kind: DeformKind::Combined,
            shift_max: 10,
            alpha: 0.2,
            p: 0.35,
            apply_probability: 0.75,
            perlin: PerlinConfig::default(),
            seed: 0,
        }
    }
}

impl DeformConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::param("alpha", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::param("p", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(Error::param("apply_probability", "must lie in [0, 1]"));
        }
        self.perlin.validate()
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    fn noise(&self, height: usize, width: usize) -> Result<ScalarField> {
        let cfg = PerlinConfig {
            seed: self.seed,
            ..self.perlin
        };
        perlin_field(height, width, &cfg)
    }
}

/// Translates by `dx` columns and `dy` rows; pixels leaving the grid are
/// dropped.
pub fn shift_mask(mask: &BinaryMask, dx: isize, dy: isize) -> BinaryMask {
    let (h, w) = mask.shape();
    BinaryMask::from_fn(h, w, |r, c| {
        let sr = r as isize - dy;
        let sc = c as isize - dx;
        sr >= 0 && sc >= 0 && (sr as usize) < h && (sc as usize) < w && mask.get(sr as usize, sc as usize)
    })
}

/// The `(dx, dy)` offset drawn by [`deform_shift`].
pub fn draw_shift(shift_max: usize, seed: u64) -> (isize, isize) {
    let m = shift_max as isize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = rng.gen_range(-m..=m);
    let dy = rng.gen_range(-m..=m);
    (dx, dy)
}

pub fn deform_shift(label: &BinaryMask, cfg: &DeformConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let (dx, dy) = draw_shift(cfg.shift_max, cfg.seed);
    Ok(shift_mask(label, dx, dy))
}

/// Skeleton and inner distance of a label.
struct Medial {
    skeleton: BinaryMask,
    depth: ScalarField,
}

impl Medial {
    fn new(label: &BinaryMask) -> Self {
        Self {
            skeleton: hard_skeleton(label),
            depth: inner_distance(label),
        }
    }

    fn skeleton_depth(&self) -> ScalarField {
        let (h, w) = self.depth.shape();
        ScalarField::from_fn(h, w, |r, c| {
            if self.skeleton.get(r, c) {
                self.depth.get(r, c)
            } else {
                0.0
            }
        })
    }
}

/// `decrease_dilate(D⁰ · S · noise) > 0` for an explicit noise field.
pub fn width_with_noise(label: &BinaryMask, noise: &ScalarField) -> Result<BinaryMask> {
    ensure_same_shape(label.shape(), noise.shape())?;
    if !label.any() {
        return Ok(label.clone());
    }
    if noise.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidField(
            "noise must be finite and non-negative".into(),
        ));
    }
    let seeds = Medial::new(label)
        .skeleton_depth()
        .zip_map(noise, |d, n| d * n)?;
    Ok(decrease_dilate(&seeds)?.greater_than(0.0))
}

pub fn deform_width(label: &BinaryMask, cfg: &DeformConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    if !label.any() {
        return Ok(label.clone());
    }
    let noise = cfg.noise(label.height(), label.width())?;
    width_with_noise(label, &noise)
}

/// Skeleton pixels removed by the branch cutter:
/// `noise · (mean skeleton depth / (ε + D⁰))^α > 1 - p`.
pub fn branch_cuts(label: &BinaryMask, noise: &ScalarField, alpha: f64, p: f64) -> Result<BinaryMask> {
    ensure_same_shape(label.shape(), noise.shape())?;
    let medial = Medial::new(label);
    let (h, w) = label.shape();
    let n = medial.skeleton.count();
    if n == 0 {
        return Ok(BinaryMask::zeros(h, w));
    }
    let mean_depth = medial.skeleton_depth().sum() / n as f64;
    Ok(BinaryMask::from_fn(h, w, |r, c| {
        medial.skeleton.get(r, c) && {
            let ratio = mean_depth / (EPSILON + medial.depth.get(r, c));
            noise.get(r, c) * ratio.powf(alpha) > 1.0 - p
        }
    }))
}

/// Rebuilds the label from its skeleton depth after zeroing the cut pixels.
pub fn branch_cut_with_noise(
    label: &BinaryMask,
    noise: &ScalarField,
    alpha: f64,
    p: f64,
) -> Result<BinaryMask> {
    let cuts = branch_cuts(label, noise, alpha, p)?;
    let mut seeds = Medial::new(label).skeleton_depth();
    for (r, c) in cuts.ones() {
        seeds.set(r, c, 0.0);
    }
    Ok(decrease_dilate(&seeds)?.greater_than(0.0))
}

pub fn deform_branch_cut(label: &BinaryMask, cfg: &DeformConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    if !label.any() {
        return Ok(label.clone());
    }
    let noise = cfg.noise(label.height(), label.width())?;
    branch_cut_with_noise(label, &noise, cfg.alpha, cfg.p)
}

/// Which stages of a combined deformation fired, and their seeds, in the
/// order shift, width, branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinedTrace {
    pub sub_seeds: [u64; 3],
    pub fired: [bool; 3],
}

impl CombinedTrace {
    pub fn draw(seed: u64, apply_probability: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sub_seeds = [rng.next_u64(), rng.next_u64(), rng.next_u64()];
        let fired = [(); 3].map(|_| rng.gen::<f64>() < apply_probability);
        Self { sub_seeds, fired }
    }
}

/// Shift, then width change, then branch cutting, each applied with
/// `apply_probability` and its own sub-seed.
pub fn deform_combined_traced(
    label: &BinaryMask,
    cfg: &DeformConfig,
) -> Result<(BinaryMask, CombinedTrace)> {
    cfg.validate()?;
    let trace = CombinedTrace::draw(cfg.seed, cfg.apply_probability);
    let stages: [fn(&BinaryMask, &DeformConfig) -> Result<BinaryMask>; 3] =
        [deform_shift, deform_width, deform_branch_cut];
    let mut out = label.clone();
    for ((stage, seed), fired) in stages.iter().zip(trace.sub_seeds).zip(trace.fired) {
        if fired {
            out = stage(&out, &cfg.with_seed(seed))?;
        }
    }
    Ok((out, trace))
}

pub fn deform_combined(label: &BinaryMask, cfg: &DeformConfig) -> Result<BinaryMask> {
    Ok(deform_combined_traced(label, cfg)?.0)
}

/// Applies the deformation selected by `cfg.kind`.
pub fn deform(label: &BinaryMask, cfg: &DeformConfig) -> Result<BinaryMask> {
    match cfg.kind {
        DeformKind::Shift => deform_shift(label, cfg),
        DeformKind::Width => deform_width(label, cfg),
        DeformKind::Branch => deform_branch_cut(label, cfg),
        DeformKind::Combined => deform_combined(label, cfg),
    }
}
