//! Central finite differences, used to validate analytic gradients.

use crate::error::Result;
use crate::grid::ScalarField;

/// Magnitude below which errors are measured absolutely rather than
/// relatively; together with a 1e-3 relative tolerance this gives a 1e-6
/// absolute floor.
const REL_ERROR_FLOOR: f64 = 1e-3;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every element `i`.
pub fn central_differences(
    f: impl Fn(&ScalarField) -> Result<f64>,
    at: &ScalarField,
    h: f64,
) -> Result<ScalarField> {
    let mut probe = at.clone();
    let mut out = ScalarField::zeros(at.height(), at.width());
    for i in 0..at.len() {
        let x = at.as_slice()[i];
        probe.as_mut_slice()[i] = x + h;
        let plus = f(&probe)?;
        probe.as_mut_slice()[i] = x - h;
        let minus = f(&probe)?;
        probe.as_mut_slice()[i] = x;
        out.as_mut_slice()[i] = (plus - minus) / (2.0 * h);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientComparison {
    pub max_abs_error: f64,
    /// `max |a - n| / max(|a|, |n|, 1e-3)` over all elements.
    pub max_rel_error: f64,
    pub worst_index: usize,
}

pub fn compare_gradients(analytic: &ScalarField, numeric: &ScalarField) -> GradientComparison {
    let mut cmp = GradientComparison {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for (i, (&a, &n)) in analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .enumerate()
    {
        let abs = (a - n).abs();
        let rel = abs / a.abs().max(n.abs()).max(REL_ERROR_FLOOR);
        cmp.max_abs_error = cmp.max_abs_error.max(abs);
        if rel > cmp.max_rel_error {
            cmp.max_rel_error = rel;
            cmp.worst_index = i;
        }
    }
    cmp
}
