//! Seeded sampling of the evaluation box.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::calculus::EPoint;

pub const DEFAULT_SEED: u64 = 0xA1B2;
pub const DEFAULT_SAMPLES: usize = 64;

/// Closed coordinate ranges for x^1..x^m and y.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x: Vec<(f64, f64)>,
    pub y: (f64, f64),
}

impl SampleBox {
    /// x in [-1, 1]^m, y in [0.1, 2].
    pub fn default_for(m: usize) -> Self {
        SampleBox { x: vec![(-1.0, 1.0); m], y: (0.1, 2.0) }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn contains(&self, p: &EPoint) -> bool {
        p.x.len() == self.x.len()
            && p.x.iter().zip(&self.x).all(|(v, (lo, hi))| lo <= v && v <= hi)
            && self.y.0 <= p.y
            && p.y <= self.y.1
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<EPoint> {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut draw = |(lo, hi): (f64, f64)| if lo < hi { rng.gen_range(lo..hi) } else { lo };
        (0..n)
            .map(|_| {
                let x = self.x.iter().map(|&r| draw(r)).collect();
                let y = draw(self.y);
                EPoint { x, y }
            })
            .collect()
    }
}
