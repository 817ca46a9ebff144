#![allow(dead_code)]

use translab::grid::{Field, Grid2D, Kind};
use translab::Complex64;

/// SplitMix64 stream for reproducible test data.
pub struct Mix(u64);

impl Mix {
    pub fn new(seed: u64) -> Self {
        Mix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[-1, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

pub fn random_field(grid: Grid2D, kind: Kind, seed: u64) -> Field {
    let mut rng = Mix::new(seed);
    let values = (0..grid.len())
        .map(|_| {
            let re = rng.uniform();
            let im = if kind == Kind::Complex { rng.uniform() } else { 0.0 };
            Complex64::new(re, im)
        })
        .collect();
    Field::new(grid, kind, values).unwrap()
}

/// Smooth localized real field with a few transverse modes.
pub fn smooth_field(grid: Grid2D) -> Field {
    let l = grid.l;
    Field::from_real_fn(grid, |x, y| {
        (-(x - 1.0).powi(2) / 4.0).exp() * (1.0 + 0.3 * (y / l).cos())
            + 0.2 * (-(x + 2.0).powi(2)).exp() * (2.0 * y / l).sin()
    })
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}
