use crate::autodiff::{sigmoid, Tape};
use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, BinaryMask, ScalarField};

use super::{mixed_loss, LossConfig, LossKind};

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// `sigmoid(logits)` after the last step.
    pub prediction: ScalarField,
    pub logits: ScalarField,
    /// Loss evaluated before each update.
    pub losses: Vec<f64>,
}

/// Logits `±magnitude` reproducing `mask` after a sigmoid.
pub fn logits_of(mask: &BinaryMask, magnitude: f64) -> ScalarField {
    mask.to_field().map(|v| if v > 0.5 { magnitude } else { -magnitude })
}

/// Plain gradient descent on a per-pixel logit field under
/// [`mixed_loss`] with `studied` as the second term.
pub fn fit_logits(
    label: &BinaryMask,
    init: &ScalarField,
    studied: LossKind,
    cfg: &LossConfig,
    steps: usize,
    lr: f64,
) -> Result<FitOutcome> {
    ensure_same_shape(label.shape(), init.shape())?;
    cfg.validate()?;
    if steps < 1 {
        return Err(Error::param("steps", "must be >= 1"));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::param("lr", "must be positive"));
    }

    let diverged = |step: usize| move |e: Error| match e {
        Error::NonFinite { .. } => Error::Diverged { step },
        other => other,
    };

    let mut logits = init.clone();
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let tape = Tape::new();
        let z = tape.leaf(logits.clone());
        let root = mixed_loss(z.sigmoid().map_err(diverged(step))?, label, studied, cfg)
            .map_err(diverged(step))?;
        losses.push(root.scalar().expect("scalar loss"));
        let grads = tape.backward(root).map_err(diverged(step))?;
        let g = grads.get(z).expect("logits are a leaf");
        for (l, d) in logits.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *l -= lr * d;
        }
        if logits.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }

    Ok(FitOutcome {
        prediction: logits.map(sigmoid),
        logits,
        losses,
    })
}
