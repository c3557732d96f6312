//! Probability maps derived from binary context masks.
//!
//! Two constructions are provided:
//!
//! * [`prob_map_eq1`]: `P(p) = 1 - d(p) / max_q d(q)`, with `d` the exact
//!   Euclidean distance to the nearest mask cell. Mask cells get 1, the
//!   cells farthest from the mask get 0.
//! * [`prob_map_eq2`]: with `M` the mask cells and `R(p)` the mask cells
//!   within Chebyshev distance `radius` of `p`,
//!
//!   ```text
//!   P(p) = sum_{r in R(p)} exp(-alpha |r - p|) / sum_{m in M} exp(-alpha |m - p|)
//!   ```
//!
//!   where `|.|` is the Euclidean norm between cell centers. A cell next to
//!   several mask cells scores higher than one next to a single cell, and
//!   `P(p) = 0` when no mask cell lies within the radius.
//!
//! The numerator and the near part of the denominator are summed directly
//! over a small window. The rest of the denominator is a correlation of the
//! mask with a truncated exponential kernel, evaluated by FFT.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use image::{DynamicImage, GrayImage};
use serde::{Deserialize, Serialize};

use crate::edt::{edt, DistanceField};
use crate::error::{Error, Result};
use crate::fft::correlate_symmetric;
use crate::mask::{save_png, BinaryMask};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eq2Params {
    /// Decay rate of the exponential weights.
    pub alpha: f64,
    /// Chebyshev radius of the neighborhood, in cells.
    pub radius: usize,
}

impl Default for Eq2Params {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            radius: 1,
        }
    }
}

impl Eq2Params {
    pub fn new(alpha: f64, radius: usize) -> Result<Self> {
        let p = Self { alpha, radius };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Parameter(format!(
                "alpha must be a positive finite number, got {}",
                self.alpha
            )));
        }
        if self.radius < 1 {
            return Err(Error::Parameter("radius must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a probability map was generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MapMethod {
    /// Normalized Euclidean distance.
    Eq1,
    /// Neighborhood-weighted exponential ratio.
    Eq2(Eq2Params),
}

impl MapMethod {
    pub fn validate(&self) -> Result<()> {
        match self {
            MapMethod::Eq1 => Ok(()),
            MapMethod::Eq2(p) => p.validate(),
        }
    }

    /// Fails with [`Error::EmptyMask`] when the mask has no set cell.
    pub fn generate<T: Scalar>(&self, mask: &BinaryMask) -> Result<ProbabilityMap<T>> {
        match self {
            MapMethod::Eq1 => prob_map_eq1(mask),
            MapMethod::Eq2(p) => prob_map_eq2(mask, *p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
    method: MapMethod,
}

impl<T: Scalar> ProbabilityMap<T> {
    /// Validates that `values` has the right length and lies in `[0, 1]`.
    pub fn from_values(
        width: usize,
        height: usize,
        values: Vec<T>,
        method: MapMethod,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::Input(format!("probability {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
            method,
        })
    }

    /// The "no evidence" map used when an image has no cell of a class.
    pub fn zeros(width: usize, height: usize, method: MapMethod) -> Self {
        Self {
            width,
            height,
            values: vec![T::zero(); width * height],
            method,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn method(&self) -> MapMethod {
        self.method
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn cast<U: Scalar>(&self) -> ProbabilityMap<U> {
        ProbabilityMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            method: self.method,
        }
    }

    /// Quantizes to 8 bits (`round(255 * P)`) and writes a grayscale PNG.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self
            .values
            .iter()
            .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let img = GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches map dimensions");
        save_png(&DynamicImage::ImageLuma8(img), path.as_ref())
    }
}

/// Normalized-distance map. An all-ones mask yields `P = 1` everywhere.
pub fn prob_map_eq1<T: Scalar>(mask: &BinaryMask) -> Result<ProbabilityMap<T>> {
    Ok(eq1_from_field(&edt(mask)?))
}

/// Normalized-distance map from a precomputed distance field.
pub fn eq1_from_field<T: Scalar>(field: &DistanceField) -> ProbabilityMap<T> {
    let max_sq = field.max_squared();
    let values = if max_sq == 0 {
        vec![T::one(); field.squared().len()]
    } else {
        let max_d = T::of(max_sq as f64).sqrt();
        field
            .squared()
            .iter()
            .map(|&s| {
                let p = T::one() - T::of(s as f64).sqrt() / max_d;
                p.max(T::zero()).min(T::one())
            })
            .collect()
    };
    ProbabilityMap {
        width: field.width(),
        height: field.height(),
        values,
        method: MapMethod::Eq1,
    }
}

/// Neighborhood-weighted map.
pub fn prob_map_eq2<T: Scalar>(mask: &BinaryMask, params: Eq2Params) -> Result<ProbabilityMap<T>> {
    params.validate()?;
    if mask.is_blank() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let alpha = params.alpha;
    let radius = params.radius;
    // Window summed directly. Beyond it every weight is below the smallest
    // weight a neighborhood term can have, which bounds the relative error
    // of the FFT part.
    let near = (radius as f64 * SQRT_2).ceil() as usize + 1;

    let signal: Vec<f64> = mask.cells().iter().map(|&c| c as u8 as f64).collect();
    let weight = |dx: i64, dy: i64| (-alpha * ((dx * dx + dy * dy) as f64).sqrt()).exp();
    let cheb = |dx: i64, dy: i64| dx.unsigned_abs().max(dy.unsigned_abs()) as usize;

    let mut inner = vec![0.0; w * h];
    let mut ring = vec![0.0; w * h];
    let n = near as i64;
    for dy in -n..=n {
        for dx in -n..=n {
            let acc = if cheb(dx, dy) <= radius {
                &mut inner
            } else {
                &mut ring
            };
            add_shifted(acc, &signal, w, h, dx, dy, weight(dx, dy));
        }
    }

    let counts = SummedArea::new(mask);
    let total = mask.count() as u64;
    let need_far = (0..h).any(|y| (0..w).any(|x| counts.window(x, y, near) < total));

    let far = if need_far {
        let diagonal = (((w - 1).pow(2) + (h - 1).pow(2)) as f64).sqrt().ceil() as usize;
        let reach = truncation_radius(alpha, radius, near, diagonal);
        let reach_x = reach.min(w - 1);
        let reach_y = reach.min(h - 1);
        let reach_sq = (reach * reach) as i64;
        correlate_symmetric(&signal, w, h, reach_x, reach_y, |dx, dy| {
            if cheb(dx, dy) <= near || dx * dx + dy * dy > reach_sq {
                0.0
            } else {
                weight(dx, dy)
            }
        })
    } else {
        Vec::new()
    };

    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let in_radius = counts.window(x, y, radius);
            let p = if in_radius == total {
                1.0
            } else if in_radius == 0 || inner[i] <= 0.0 {
                0.0
            } else {
                let mut den = inner[i] + ring[i];
                if counts.window(x, y, near) < total {
                    den += far[i].max(0.0);
                }
                (inner[i] / den).min(1.0)
            };
            values.push(T::of(p));
        }
    }
    Ok(ProbabilityMap {
        width: w,
        height: h,
        values,
        method: MapMethod::Eq2(params),
    })
}

/// Euclidean radius beyond which the summed kernel tail is negligible next
/// to the smallest possible numerator term `exp(-alpha * radius * sqrt 2)`.
/// Never exceeds `max_reach`, the longest offset inside the raster.
fn truncation_radius(alpha: f64, radius: usize, near: usize, max_reach: usize) -> usize {
    let target = 1e-17 * (-alpha * radius as f64 * SQRT_2).exp();
    // Sum of exp(-alpha * |o|) over grid offsets with |o| > l, bounded by
    // the integral of 2 pi (rho + 1) exp(-alpha rho) from l - 1.
    let tail = |l: f64| 2.0 * PI * (-alpha * (l - 1.0)).exp() * (l / alpha + 1.0 / (alpha * alpha));
    let mut l = near + 1;
    while l < max_reach && tail(l as f64) > target {
        l += 1;
    }
    l.min(max_reach.max(near + 1))
}

/// `acc(x, y) += k * signal(x + dx, y + dy)` wherever the source is in frame.
fn add_shifted(acc: &mut [f64], signal: &[f64], w: usize, h: usize, dx: i64, dy: i64, k: f64) {
    let (wi, hi) = (w as i64, h as i64);
    let y0 = (-dy).max(0);
    let y1 = (hi - dy).min(hi);
    let x0 = (-dx).max(0);
    let x1 = (wi - dx).min(wi);
    if y0 >= y1 || x0 >= x1 {
        return;
    }
    let len = (x1 - x0) as usize;
    for y in y0..y1 {
        let dst = (y * wi + x0) as usize;
        let src = ((y + dy) * wi + x0 + dx) as usize;
        for (a, s) in acc[dst..dst + len].iter_mut().zip(&signal[src..src + len]) {
            *a += k * s;
        }
    }
}

/// Integral image of set-cell counts.
struct SummedArea {
    w: usize,
    h: usize,
    table: Vec<u64>,
}

impl SummedArea {
    fn new(mask: &BinaryMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let stride = w + 1;
        let mut table = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += mask.get(x, y) as u64;
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { w, h, table }
    }

    /// Set cells within Chebyshev distance `r` of `(x, y)`.
    fn window(&self, x: usize, y: usize, r: usize) -> u64 {
        let x0 = x.saturating_sub(r);
        let y0 = y.saturating_sub(r);
        let x1 = (x + r + 1).min(self.w);
        let y1 = (y + r + 1).min(self.h);
        let s = self.w + 1;
        self.table[y1 * s + x1] + self.table[y0 * s + x0]
            - self.table[y0 * s + x1]
            - self.table[y1 * s + x0]
    }
}

/// Literal double loop over all cells and all mask cells. Quadratic; the
/// reference for [`prob_map_eq2`].
pub fn prob_map_eq2_bruteforce<T: Scalar>(
    mask: &BinaryMask,
    params: Eq2Params,
) -> Result<ProbabilityMap<T>> {
    params.validate()?;
    if mask.is_blank() {
        return Err(Error::EmptyMask);
    }
    let sites: Vec<(i64, i64)> = mask
        .set_cells()
        .map(|(x, y)| (x as i64, y as i64))
        .collect();
    let r = params.radius as i64;
    let (w, h) = (mask.width(), mask.height());
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for &(sx, sy) in &sites {
                let (dx, dy) = (sx - x, sy - y);
                let wgt = (-params.alpha * ((dx * dx + dy * dy) as f64).sqrt()).exp();
                den += wgt;
                if dx.abs() <= r && dy.abs() <= r {
                    num += wgt;
                }
            }
            values.push(T::of(if num == 0.0 { 0.0 } else { num / den }));
        }
    }
    Ok(ProbabilityMap {
        width: w,
        height: h,
        values,
        method: MapMethod::Eq2(params),
    })
}
