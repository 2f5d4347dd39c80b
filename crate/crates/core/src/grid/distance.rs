//! Exact L1 (Manhattan) distance maps via a two-pass chamfer scan.
//!
//! With the 4-neighbour mask the forward/backward sweep is exact for L1:
//! every shortest Manhattan path can be reordered into a monotone staircase
//! that one of the two sweeps follows.

use super::{BinaryMask, ScalarField};

/// Value reported for pixels with no target in the image (`height + width`),
/// strictly larger than any in-grid L1 distance.
pub fn dist_inf(height: usize, width: usize) -> f64 {
    (height + width) as f64
}

/// L1 distance from every pixel to the nearest 1-pixel of `mask`.
///
/// An all-zero mask yields a field filled with [`dist_inf`].
pub fn distance_transform_l1(mask: &BinaryMask) -> ScalarField {
    chamfer(mask, true)
}

/// L1 distance from every pixel to the nearest 0-pixel of `mask`.
///
/// Equals `distance_transform_l1(&mask.complement())`; an all-ones mask yields
/// the [`dist_inf`] sentinel everywhere.
pub fn inner_distance(mask: &BinaryMask) -> ScalarField {
    chamfer(mask, false)
}

fn chamfer(mask: &BinaryMask, target: bool) -> ScalarField {
    let (h, w) = mask.shape();
    let inf = (h + w) as u32;
    let src = mask.as_slice();
    let mut d: Vec<u32> = src
        .iter()
        .map(|&b| if b == target { 0 } else { inf })
        .collect();

    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut v = d[i];
            if r > 0 {
                v = v.min(d[i - w] + 1);
            }
            if c > 0 {
                v = v.min(d[i - 1] + 1);
            }
            d[i] = v;
        }
    }
    for r in (0..h).rev() {
        for c in (0..w).rev() {
            let i = r * w + c;
            let mut v = d[i];
            if r + 1 < h {
                v = v.min(d[i + w] + 1);
            }
            if c + 1 < w {
                v = v.min(d[i + 1] + 1);
            }
            d[i] = v;
        }
    }

    // Distances through the sentinel saturate back to it.
    let data = d.into_iter().map(|v| v.min(inf) as f64).collect();
    ScalarField::new(h, w, data).expect("shape preserved")
}
