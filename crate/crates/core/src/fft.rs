//! Zero-padded 2-D correlation of a raster with a symmetric kernel via FFT.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

/// Smallest `n >= target` whose only prime factors are 2, 3 and 5.
pub(crate) fn smooth_size(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Computes `out(x, y) = sum_{dx, dy} kernel(dx, dy) * signal(x + dx, y + dy)`
/// over offsets with `|dx| <= reach_x`, `|dy| <= reach_y`, treating cells
/// outside the raster as zero. `kernel` must satisfy
/// `kernel(dx, dy) == kernel(-dx, -dy)`.
pub(crate) fn correlate_symmetric(
    signal: &[f64],
    width: usize,
    height: usize,
    reach_x: usize,
    reach_y: usize,
    kernel: impl Fn(i64, i64) -> f64,
) -> Vec<f64> {
    let nx = smooth_size(width + reach_x);
    let ny = smooth_size(height + reach_y);

    // Pack signal and kernel into one complex buffer, transform once, and
    // split the two spectra by Hermitian symmetry.
    let mut buf = vec![Complex64::new(0.0, 0.0); nx * ny];
    for y in 0..height {
        for x in 0..width {
            buf[y * nx + x].re = signal[y * width + x];
        }
    }
    let (rx, ry) = (reach_x as i64, reach_y as i64);
    for dy in -ry..=ry {
        let row = dy.rem_euclid(ny as i64) as usize;
        for dx in -rx..=rx {
            let k = kernel(dx, dy);
            if k != 0.0 {
                let col = dx.rem_euclid(nx as i64) as usize;
                buf[row * nx + col].im = k;
            }
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    let row_fwd = planner.plan_fft(nx, FftDirection::Forward);
    let col_fwd = planner.plan_fft(ny, FftDirection::Forward);
    let row_inv = planner.plan_fft(nx, FftDirection::Inverse);
    let col_inv = planner.plan_fft(ny, FftDirection::Inverse);

    // Forward: rows, then columns in transposed layout (ny contiguous).
    process(&row_fwd, &mut buf);
    let mut tr = transpose(&buf, nx, ny);
    process(&col_fwd, &mut tr);

    // tr[kx * ny + ky] holds Z(kx, ky).
    let mut prod = vec![Complex64::new(0.0, 0.0); nx * ny];
    for kx in 0..nx {
        let mx = (nx - kx) % nx;
        for ky in 0..ny {
            let my = (ny - ky) % ny;
            let z = tr[kx * ny + ky];
            let zc = tr[mx * ny + my].conj();
            let s = (z + zc) * 0.5;
            let k = (z - zc) * Complex64::new(0.0, -0.5);
            prod[kx * ny + ky] = s * k;
        }
    }

    process(&col_inv, &mut prod);
    let mut back = transpose(&prod, ny, nx);
    process(&row_inv, &mut back);

    let scale = 1.0 / (nx * ny) as f64;
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = back[y * nx + x].re * scale;
        }
    }
    out
}

fn process(fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
}

/// Transposes a row-major `rows x cols` buffer whose rows have length `cols`.
fn transpose(src: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    const BLOCK: usize = 32;
    let mut dst = vec![Complex64::new(0.0, 0.0); src.len()];
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    dst
}
