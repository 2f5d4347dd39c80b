use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerlinConfig {
    /// Output values span exactly `[low, high]`.
    pub amplitude_range: [f64; 2],
    /// Lattice cells per image axis in the first octave.
    pub resolution: usize,
    pub octaves: usize,
    pub persistence: f64,
    pub lacunarity: f64,
    pub seed: u64,
}

impl Default for PerlinConfig {
    fn default() -> Self {
        Self {
            amplitude_range: [0.1, 2.0],
            resolution: 3,
            octaves: 4,
            persistence: 0.5,
            lacunarity: 3.0,
            seed: 0,
        }
    }
}

impl PerlinConfig {
    pub fn validate(&self) -> Result<()> {
        let [low, high] = self.amplitude_range;
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::param(
                "amplitude_range",
                format!("low must be below high, got [{low}, {high}]"),
            ));
        }
        if self.resolution == 0 {
            return Err(Error::param("resolution", "must be at least 1"));
        }
        if self.octaves == 0 {
            return Err(Error::param("octaves", "must be at least 1"));
        }
        if !(self.persistence.is_finite() && self.persistence > 0.0) {
            return Err(Error::param("persistence", "must be positive"));
        }
        if !(self.lacunarity.is_finite() && self.lacunarity >= 1.0) {
            return Err(Error::param("lacunarity", "must be at least 1"));
        }
        Ok(())
    }
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

struct Lattice {
    cells: usize,
    grads: Vec<(f64, f64)>,
}

impl Lattice {
    fn random(cells: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = (cells + 1) * (cells + 1);
        let grads = (0..n)
            .map(|_| {
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                (theta.cos(), theta.sin())
            })
            .collect();
        Self { cells, grads }
    }

    fn grad(&self, i: usize, j: usize) -> (f64, f64) {
        self.grads[i * (self.cells + 1) + j]
    }

    /// Noise at lattice coordinates `(y, x) ∈ [0, cells]²`.
    fn sample(&self, y: f64, x: f64) -> f64 {
        let i = (y.floor() as usize).min(self.cells - 1);
        let j = (x.floor() as usize).min(self.cells - 1);
        let (ty, tx) = (y - i as f64, x - j as f64);
        let dot = |di: usize, dj: usize| {
            let (gy, gx) = self.grad(i + di, j + dj);
            gy * (ty - di as f64) + gx * (tx - dj as f64)
        };
        let (u, v) = (fade(tx), fade(ty));
        let top = lerp(dot(0, 0), dot(0, 1), u);
        let bottom = lerp(dot(1, 0), dot(1, 1), u);
        lerp(top, bottom, v)
    }
}

/// Multi-octave gradient noise, min-max rescaled to the amplitude range.
///
/// Octave `k` uses `round(resolution · lacunarity^k)` cells per axis and
/// weight `persistence^k`. A constant raw field maps to the range midpoint.
pub fn perlin_field(height: usize, width: usize, cfg: &PerlinConfig) -> Result<ScalarField> {
    cfg.validate()?;
    if height == 0 || width == 0 {
        return Err(Error::param("shape", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut raw = vec![0.0; height * width];
    let mut weight = 1.0;
    let mut freq = cfg.resolution as f64;
    for _ in 0..cfg.octaves {
        let cells = (freq.round() as usize).max(1);
        let lattice = Lattice::random(cells, &mut rng);
        let sy = cells as f64 / height as f64;
        let sx = cells as f64 / width as f64;
        for r in 0..height {
            let y = (r as f64 + 0.5) * sy;
            for c in 0..width {
                raw[r * width + c] += weight * lattice.sample(y, (c as f64 + 0.5) * sx);
            }
        }
        weight *= cfg.persistence;
        freq *= cfg.lacunarity;
    }

    let [low, high] = cfg.amplitude_range;
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let data = if span > 0.0 {
        raw.iter()
            .map(|v| (low + (v - min) / span * (high - low)).clamp(low, high))
            .collect()
    } else {
        vec![0.5 * (low + high); raw.len()]
    };
    ScalarField::new(height, width, data)
}
