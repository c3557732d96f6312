//! Exact Euclidean distance transform.
//!
//! Squared distances are computed in integer arithmetic with the separable
//! lower-envelope algorithm of Meijster, Roerdink and Hesselink: a column
//! pass computes vertical distances to the nearest set cell, then a row pass
//! takes the lower envelope of the parabolas `(x - i)^2 + g(i)^2`. Both
//! passes are linear in the number of cells. The square root is applied
//! only when distances are read out.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::scalar::Scalar;

/// Distances from every cell to the nearest set cell of a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    squared: Vec<u64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major squared distances, exact.
    pub fn squared(&self) -> &[u64] {
        &self.squared
    }

    pub fn squared_at(&self, x: usize, y: usize) -> u64 {
        self.squared[y * self.width + x]
    }

    pub fn distance<T: Scalar>(&self, x: usize, y: usize) -> T {
        T::of(self.squared_at(x, y) as f64).sqrt()
    }

    /// Row-major Euclidean distances.
    pub fn distances<T: Scalar>(&self) -> Vec<T> {
        self.squared
            .iter()
            .map(|&s| T::of(s as f64).sqrt())
            .collect()
    }

    pub fn max_squared(&self) -> u64 {
        self.squared.iter().copied().max().unwrap_or(0)
    }
}

/// Linear-time exact EDT. Fails with [`Error::EmptyMask`] when no cell is set.
pub fn edt(mask: &BinaryMask) -> Result<DistanceField> {
    if mask.is_blank() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let cells = mask.cells();

    // Column pass, processed a row at a time to stay cache-friendly.
    // `inf` exceeds any real vertical distance.
    let inf = (w + h) as i64;
    let mut g = vec![0i64; w * h];
    for x in 0..w {
        g[x] = if cells[x] { 0 } else { inf };
    }
    for y in 1..h {
        let (prev, cur) = g.split_at_mut(y * w);
        let prev = &prev[(y - 1) * w..];
        let cur = &mut cur[..w];
        let row = &cells[y * w..(y + 1) * w];
        for x in 0..w {
            cur[x] = if row[x] { 0 } else { (prev[x] + 1).min(inf) };
        }
    }
    for y in (0..h.saturating_sub(1)).rev() {
        let (cur, next) = g.split_at_mut((y + 1) * w);
        let cur = &mut cur[y * w..];
        let next = &next[..w];
        for x in 0..w {
            if next[x] < cur[x] {
                cur[x] = next[x] + 1;
            }
        }
    }

    // Row pass.
    let mut squared = vec![0u64; w * h];
    let mut s = vec![0usize; w];
    let mut t = vec![0i64; w];
    for y in 0..h {
        let gr = &g[y * w..(y + 1) * w];
        let out = &mut squared[y * w..(y + 1) * w];
        lower_envelope(gr, out, &mut s, &mut t);
    }

    Ok(DistanceField {
        width: w,
        height: h,
        squared,
    })
}

fn lower_envelope(g: &[i64], out: &mut [u64], s: &mut [usize], t: &mut [i64]) {
    let w = g.len();
    let f = |x: i64, i: usize| {
        let d = x - i as i64;
        d * d + g[i] * g[i]
    };
    // Abscissa from which parabola `u` lies below parabola `i` (i < u).
    let sep = |i: usize, u: usize| {
        let (ii, uu) = (i as i64, u as i64);
        (uu * uu - ii * ii + g[u] * g[u] - g[i] * g[i]).div_euclid(2 * (uu - ii))
    };

    let mut q: isize = 0;
    s[0] = 0;
    t[0] = 0;
    for u in 1..w {
        while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
            q -= 1;
        }
        if q < 0 {
            q = 0;
            s[0] = u;
        } else {
            let start = 1 + sep(s[q as usize], u);
            if start < w as i64 {
                q += 1;
                s[q as usize] = u;
                t[q as usize] = start;
            }
        }
    }
    for u in (0..w).rev() {
        out[u] = f(u as i64, s[q as usize]) as u64;
        if u as i64 == t[q as usize] {
            q -= 1;
        }
    }
}

/// Direct evaluation of the minimum over all set cells. Quadratic; meant for
/// small rasters and as a reference for [`edt`].
pub fn edt_bruteforce(mask: &BinaryMask) -> Result<DistanceField> {
    if mask.is_blank() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (mask.width(), mask.height());
    let sites: Vec<(i64, i64)> = mask
        .set_cells()
        .map(|(x, y)| (x as i64, y as i64))
        .collect();
    let mut squared = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let best = sites
                .iter()
                .map(|&(sx, sy)| ((sx - x).pow(2) + (sy - y).pow(2)) as u64)
                .min()
                .expect("non-empty mask");
            squared.push(best);
        }
    }
    Ok(DistanceField {
        width: w,
        height: h,
        squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, set: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, "m", |x, y| set.contains(&(x, y))).unwrap()
    }

    #[test]
    fn center_pixel_three_by_three() {
        let f = edt(&mask(3, 3, &[(1, 1)])).unwrap();
        assert_eq!(f.squared(), &[2, 1, 2, 1, 0, 1, 2, 1, 2]);
        let d: f64 = f.distance(0, 0);
        assert_eq!(d, 2f64.sqrt());
        assert_eq!(f.distance::<f64>(1, 0), 1.0);
        assert_eq!(f.distance::<f64>(1, 1), 0.0);
    }

    #[test]
    fn full_mask_is_all_zero() {
        let m = BinaryMask::from_fn(5, 4, "m", |_, _| true).unwrap();
        assert!(edt(&m).unwrap().squared().iter().all(|&s| s == 0));
    }

    #[test]
    fn corner_pixel_two_by_two() {
        let f = edt_bruteforce(&mask(2, 2, &[(0, 0)])).unwrap();
        assert_eq!(f.distances::<f64>(), vec![0.0, 1.0, 1.0, 2f64.sqrt()]);
        assert_eq!(edt(&mask(2, 2, &[(0, 0)])).unwrap(), f);
    }

    #[test]
    fn nearer_of_two_sites_wins() {
        let m = mask(7, 1, &[(0, 0), (6, 0)]);
        let f = edt(&m).unwrap();
        assert_eq!(f.squared(), &[0, 1, 4, 9, 4, 1, 0]);
        assert_eq!(f, edt_bruteforce(&m).unwrap());
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = BinaryMask::new(4, 4, "m").unwrap();
        assert!(matches!(edt(&m), Err(Error::EmptyMask)));
        assert!(matches!(edt_bruteforce(&m), Err(Error::EmptyMask)));
    }

    #[test]
    fn single_row_and_column() {
        let row = mask(9, 1, &[(4, 0)]);
        assert_eq!(edt(&row).unwrap(), edt_bruteforce(&row).unwrap());
        let col = mask(1, 9, &[(0, 2)]);
        assert_eq!(edt(&col).unwrap(), edt_bruteforce(&col).unwrap());
    }
}
