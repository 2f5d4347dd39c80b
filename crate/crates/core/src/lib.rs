//! Skeleton-based losses and metrics for thin-structure segmentation.
//!
//! - [`grid`]: field types, mask I/O and exact L1 distance maps.
//! - [`autodiff`]: a small reverse-mode tape over scalar fields.
//! - [`morphology`]: soft dilation/erosion, soft skeletons, smooth diffusion.
//! - [`metrics`]: Dice, IoU and the LineAcc family, plus batch reports.
//! - [`losses`]: Dice, CL-Dice, SKIL-Dice and SKIL-Product with gradients.
//! - [`deform`]: label degradations (shift, width change, branch cutting).

pub mod autodiff;
pub mod deform;
pub mod error;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod morphology;

pub use error::{Error, Result};
pub use grid::{BinaryMask, FieldPair, ScalarField};

/// Ratio guard shared by the metrics, losses and deformations.
pub const EPSILON: f64 = 1e-3;
