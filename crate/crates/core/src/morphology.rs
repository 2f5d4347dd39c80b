//! Soft (differentiable) morphology and its hard counterparts.
//!
//! Dilation and erosion use the L1-ball [`Kernel::Diamond`], i.e. the
//! `(1+2d)x(1+2d)` square with the corners cut away. The opening inside the
//! soft skeleton follows the CL-Dice construction: plus-shaped erosion
//! followed by a full 3x3 max pool.

use crate::autodiff::{pool, Kernel, PoolMode, Var};
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, ScalarField};

/// Parameters of the smooth diffusion halo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    /// Target halo size in pixels.
    pub s_border: usize,
    /// Upper bound on the number of blend iterations.
    pub n_iter_max: usize,
    /// Blend factor kept from the previous iterate, in `(0, 1)`.
    pub f: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            s_border: 20,
            n_iter_max: 50,
            f: 0.82,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s_border < 1 {
            return Err(Error::param("s_border", "must be >= 1"));
        }
        if self.n_iter_max < 1 {
            return Err(Error::param("n_iter_max", "must be >= 1"));
        }
        if !(self.f > 0.0 && self.f < 1.0) {
            return Err(Error::param("f", format!("must lie in (0, 1), got {}", self.f)));
        }
        Ok(())
    }

    /// Dilation radius applied at every iteration.
    pub fn dilate_radius(&self) -> usize {
        (self.s_border / self.n_iter_max).max(1)
    }

    /// Number of blend iterations: enough steps of [`Self::dilate_radius`] to
    /// cover `s_border`, capped at `n_iter_max`.
    pub fn iterations(&self) -> usize {
        self.s_border
            .div_ceil(self.dilate_radius())
            .min(self.n_iter_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkeletonConfig {
    /// Thinning rounds; must exceed half the thickest structure of interest.
    pub iterations: usize,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        Self { iterations: 10 }
    }
}

impl SkeletonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::param("skeleton_iterations", "must be >= 1"));
        }
        Ok(())
    }
}

fn check_radius(d: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::param("d", "dilation/erosion radius must be >= 1"));
    }
    Ok(())
}

/// Max over the L1 ball of radius `d`.
pub fn soft_dilate(field: Var<'_>, d: usize) -> Result<Var<'_>> {
    check_radius(d)?;
    field.max_pool(Kernel::Diamond(d))
}

/// Min over the L1 ball of radius `d`.
pub fn soft_erode(field: Var<'_>, d: usize) -> Result<Var<'_>> {
    check_radius(d)?;
    field.min_pool(Kernel::Diamond(d))
}

fn soft_open(field: Var<'_>) -> Result<Var<'_>> {
    soft_erode(field, 1)?.max_pool(Kernel::Square(1))
}

/// Iterative soft thinning.
///
/// Each round keeps the residue of an opening, `relu(x - open(x))`, merges
/// it into the running skeleton as `skel + relu(delta - skel * delta)` and
/// erodes `x`. Values stay in `[0, 1]` for inputs in `[0, 1]`.
pub fn soft_skeleton<'t>(field: Var<'t>, cfg: &SkeletonConfig) -> Result<Var<'t>> {
    cfg.validate()?;
    let mut img = field;
    let mut skel = img.sub(soft_open(img)?)?.relu()?;
    for _ in 0..cfg.iterations {
        img = soft_erode(img, 1)?;
        let delta = img.sub(soft_open(img)?)?.relu()?;
        let fresh = delta.sub(skel.mul(delta)?)?.relu()?;
        skel = skel.add(fresh)?;
    }
    Ok(skel)
}

/// Smooth halo around a mask: repeatedly blends the field with its dilation,
/// `x <- f * x + (1 - f) * dilate(x)`.
///
/// Pixels at 1 stay at 1; zero pixels pick up values that decay with their
/// L1 distance to the support.
pub fn smooth_diffuse<'t>(field: Var<'t>, cfg: &DiffusionConfig) -> Result<Var<'t>> {
    cfg.validate()?;
    let radius = cfg.dilate_radius();
    let mut current = field;
    for _ in 0..cfg.iterations() {
        let grown = soft_dilate(current, radius)?;
        current = current.scale(cfg.f)?.add(grown.scale(1.0 - cfg.f)?)?;
    }
    Ok(current)
}

fn pooled(field: &ScalarField, kernel: Kernel, mode: PoolMode) -> ScalarField {
    pool(field, kernel, mode).0
}

/// Binary skeleton: the soft skeleton construction specialised to {0,1}
/// inputs, run until the eroded mask vanishes or stops changing.
pub fn hard_skeleton(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = mask.shape();
    let mut img = mask.to_field();
    let mut skel = vec![false; h * w];
    loop {
        let opened = pooled(
            &pooled(&img, Kernel::Diamond(1), PoolMode::Min),
            Kernel::Square(1),
            PoolMode::Max,
        );
        for (s, (&v, &o)) in skel.iter_mut().zip(img.as_slice().iter().zip(opened.as_slice())) {
            *s |= v > o;
        }
        let eroded = pooled(&img, Kernel::Diamond(1), PoolMode::Min);
        if eroded == img || eroded.max() == 0.0 {
            break;
        }
        img = eroded;
    }
    BinaryMask::new(h, w, skel).expect("shape preserved")
}

/// Binary dilation by the L1 ball of radius `d`.
pub fn dilate_mask(mask: &BinaryMask, d: usize) -> BinaryMask {
    if d == 0 {
        return mask.clone();
    }
    pooled(&mask.to_field(), Kernel::Diamond(d), PoolMode::Max).greater_than(0.0)
}

/// Decreasing dilation: grows every positive pixel into an L1 diamond whose
/// values drop by 1 per ring.
///
/// Each step max-pools with the 3x3 plus; pixels that were 0 before the step
/// take `max(pooled - 1, 0)`, positive pixels keep their value. Runs to a
/// fixpoint. A lone pixel of value `x` reaches L1 radius `ceil(x) - 1`.
pub fn decrease_dilate(field: &ScalarField) -> Result<ScalarField> {
    decrease_dilate_counted(field).map(|(out, _)| out)
}

/// [`decrease_dilate`] plus the number of steps that changed the field.
pub fn decrease_dilate_counted(field: &ScalarField) -> Result<(ScalarField, usize)> {
    if let Some((index, &value)) = field
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
    {
        return Err(Error::param(
            "field",
            format!("decrease_dilate needs finite non-negative values, got {value} at {index}"),
        ));
    }
    let mut current = field.clone();
    let mut steps = 0;
    loop {
        let grown = pooled(&current, Kernel::Diamond(1), PoolMode::Max);
        let mut changed = false;
        let next: Vec<f64> = current
            .as_slice()
            .iter()
            .zip(grown.as_slice())
            .map(|(&old, &g)| {
                if old == 0.0 {
                    let v = (g - 1.0).max(0.0);
                    changed |= v != 0.0;
                    v
                } else {
                    old
                }
            })
            .collect();
        if !changed {
            return Ok((current, steps));
        }
        steps += 1;
        current = ScalarField::new(field.height(), field.width(), next)?;
    }
}
