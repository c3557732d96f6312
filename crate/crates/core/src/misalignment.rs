//! Simulated sensor misalignment: rigid integer translations of masks.
//!
//! Shifts are drawn with magnitude `u * width`, `u` uniform in
//! `[min_frac, max_frac]`, and a uniform direction. Every draw uses its own
//! ChaCha stream seeded from a stable hash of `(master_seed, key)`, so a
//! shift depends only on its inputs and never on processing order.
//! Components are rounded to integers while keeping the length within half
//! a pixel of the drawn magnitude.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Translation in cells: positive `dx` moves content right, positive `dy` down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub dx: i64,
    pub dy: i64,
}

impl ShiftSpec {
    pub const ZERO: ShiftSpec = ShiftSpec { dx: 0, dy: 0 };

    pub fn new(dx: i64, dy: i64) -> Self {
        Self { dx, dy }
    }

    pub fn inverse(self) -> Self {
        Self::new(-self.dx, -self.dy)
    }

    pub fn magnitude(self) -> f64 {
        ((self.dx * self.dx + self.dy * self.dy) as f64).sqrt()
    }

    pub fn check_bounds(self, width: usize, height: usize) -> Result<()> {
        if self.dx.unsigned_abs() as usize > width || self.dy.unsigned_abs() as usize > height {
            return Err(Error::Parameter(format!(
                "shift ({}, {}) exceeds a {width}x{height} raster",
                self.dx, self.dy
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftPolicy {
    #[serde(default = "ShiftPolicy::default_min")]
    pub min_frac: f64,
    #[serde(default = "ShiftPolicy::default_max")]
    pub max_frac: f64,
    #[serde(default)]
    pub master_seed: u64,
}

impl Default for ShiftPolicy {
    fn default() -> Self {
        Self {
            min_frac: Self::default_min(),
            max_frac: Self::default_max(),
            master_seed: 0,
        }
    }
}

impl ShiftPolicy {
    fn default_min() -> f64 {
        0.05
    }

    fn default_max() -> f64 {
        0.10
    }

    pub fn new(min_frac: f64, max_frac: f64, master_seed: u64) -> Result<Self> {
        let p = Self {
            min_frac,
            max_frac,
            master_seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.min_frac.is_finite()
            && self.max_frac.is_finite()
            && 0.0 <= self.min_frac
            && self.min_frac <= self.max_frac
            && self.max_frac <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "shift fractions must satisfy 0 <= min <= max <= 1, got [{}, {}]",
                self.min_frac, self.max_frac
            )))
        }
    }
}

/// Translates `mask` by `spec`, filling vacated cells with background.
pub fn apply_shift(mask: &BinaryMask, spec: ShiftSpec) -> Result<BinaryMask> {
    let (w, h) = (mask.width(), mask.height());
    spec.check_bounds(w, h)?;
    let mut out = BinaryMask::new(w, h, mask.class_name())?;
    for (x, y) in mask.set_cells() {
        let nx = x as i64 + spec.dx;
        let ny = y as i64 + spec.dy;
        if (0..w as i64).contains(&nx) && (0..h as i64).contains(&ny) {
            out.set(nx as usize, ny as usize, true);
        }
    }
    Ok(out)
}

/// 64-bit FNV-1a over the seed bytes and key, finished with a SplitMix64
/// mix. Stable across platforms and releases.
pub fn derive_seed(master_seed: u64, key: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in master_seed.to_le_bytes().iter().chain(key.as_bytes()) {
        h ^= *b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Draws the shift for `image_id` (or any other stable key) on a raster of
/// the given size. The vertical component is clamped to `height` so the
/// spec always passes [`ShiftSpec::check_bounds`].
pub fn sample_shift(
    policy: &ShiftPolicy,
    image_id: &str,
    width: usize,
    height: usize,
) -> Result<ShiftSpec> {
    policy.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::Parameter(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(policy.master_seed, image_id));
    let u = if policy.min_frac == policy.max_frac {
        policy.min_frac
    } else {
        rng.gen_range(policy.min_frac..=policy.max_frac)
    };
    let theta = rng.gen_range(0.0..TAU);
    let r = u * width as f64;
    let (dx, dy) = round_to_lattice(r * theta.cos(), r * theta.sin(), r);
    let (w, h) = (width as i64, height as i64);
    Ok(ShiftSpec::new(dx.clamp(-w, w), dy.clamp(-h, h)))
}

/// Rounds `(x, y)` to the nearest integer point whose length is within 0.5
/// of `r`. Plain rounding is used whenever it qualifies; otherwise one of
/// the other three corners of the enclosing unit cell is taken. One of them
/// always qualifies: walking from the corner nearest the origin to the
/// farthest one changes the length by at most 1 per step.
fn round_to_lattice(x: f64, y: f64, r: f64) -> (i64, i64) {
    let plain = (x.round(), y.round());
    let ok = |(a, b): (f64, f64)| ((a * a + b * b).sqrt() - r).abs() <= 0.5;
    if ok(plain) {
        return (plain.0 as i64, plain.1 as i64);
    }
    let mut best: Option<((f64, f64), f64)> = None;
    for cx in [x.floor(), x.ceil()] {
        for cy in [y.floor(), y.ceil()] {
            let d = (cx - x).powi(2) + (cy - y).powi(2);
            if ok((cx, cy)) && best.is_none_or(|(_, bd)| d < bd) {
                best = Some(((cx, cy), d));
            }
        }
    }
    let (c, _) = best.unwrap_or((plain, 0.0));
    (c.0 as i64, c.1 as i64)
}
