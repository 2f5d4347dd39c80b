//! Sliding-window max/min pooling over clipped windows.
//!
//! Windows never read outside the grid: border pixels pool over the
//! in-image part of their neighbourhood only.

use crate::grid::ScalarField;

/// Pooling footprint centred on each pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Cells with `|dr| + |dc| <= radius`: the `(1+2r)x(1+2r)` square with the
    /// corners cut down to the L1 ball. Radius 1 is the 5-cell plus.
    Diamond(usize),
    /// The full `(1+2r)x(1+2r)` square.
    Square(usize),
}

impl Kernel {
    pub fn radius(self) -> usize {
        match self {
            Kernel::Diamond(r) | Kernel::Square(r) => r,
        }
    }

    /// Window offsets in row-major scan order.
    pub fn offsets(self) -> Vec<(isize, isize)> {
        let r = self.radius() as isize;
        let mut out = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                let keep = match self {
                    Kernel::Diamond(_) => dr.abs() + dc.abs() <= r,
                    Kernel::Square(_) => true,
                };
                if keep {
                    out.push((dr, dc));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Max,
    Min,
}

/// Pools `field` and returns the output together with the flat index of the
/// element each output was taken from. Ties go to the first element in
/// row-major scan order of the window.
pub fn pool(field: &ScalarField, kernel: Kernel, mode: PoolMode) -> (ScalarField, Vec<u32>) {
    let (h, w) = field.shape();
    let src = field.as_slice();
    let offsets = kernel.offsets();
    let mut out = Vec::with_capacity(src.len());
    let mut selected = Vec::with_capacity(src.len());

    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut best_idx = usize::MAX;
            let mut best = 0.0;
            for &(dr, dc) in &offsets {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                    continue;
                }
                let idx = rr as usize * w + cc as usize;
                let v = src[idx];
                let better = best_idx == usize::MAX
                    || match mode {
                        PoolMode::Max => v > best,
                        PoolMode::Min => v < best,
                    };
                if better {
                    best = v;
                    best_idx = idx;
                }
            }
            out.push(best);
            selected.push(best_idx as u32);
        }
    }

    (
        ScalarField::new(h, w, out).expect("shape preserved"),
        selected,
    )
}
