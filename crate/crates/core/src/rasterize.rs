//! Polygon rasterization onto the cell grid.
//!
//! Cell `(x, y)` has its center at the integer point `(x, y)`. A cell is set
//! when its center is inside a polygon under the even-odd rule, or lies on
//! the polygon boundary.

use crate::annotation::AnnotationRecord;
use crate::error::Result;
use crate::mask::BinaryMask;

/// Rasterizes every polygon of `class_name` into a `width` x `height` mask.
pub fn rasterize(
    records: &[AnnotationRecord],
    class_name: &str,
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    let mut mask = BinaryMask::new(width, height, class_name)?;
    for rec in records.iter().filter(|r| r.class_name == class_name) {
        fill_polygon(&mut mask, &rec.polygon);
    }
    Ok(mask)
}

/// Sets every cell covered by `polygon` (any vertex count >= 3).
pub fn fill_polygon(mask: &mut BinaryMask, polygon: &[(f64, f64)]) {
    if polygon.len() < 3 {
        return;
    }
    let (w, h) = (mask.width(), mask.height());
    let y_lo = polygon.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_hi = polygon
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let Some((row_start, row_end)) = clamp_span(y_lo, y_hi, h) else {
        return;
    };

    let edges: Vec<((f64, f64), (f64, f64))> = polygon
        .iter()
        .zip(polygon.iter().cycle().skip(1))
        .map(|(&a, &b)| (a, b))
        .collect();

    let mut xs = Vec::with_capacity(edges.len());
    for row in row_start..=row_end {
        let y = row as f64;

        // Interior spans: crossings of the scanline, half-open in y.
        xs.clear();
        for &((x0, y0), (x1, y1)) in &edges {
            if (y0 > y) != (y1 > y) {
                xs.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for pair in xs.chunks_exact(2) {
            fill_span(mask, row, pair[0], pair[1], w);
        }

        // Boundary: centers lying exactly on an edge.
        for &((x0, y0), (x1, y1)) in &edges {
            if y0 == y1 {
                if y0 == y {
                    fill_span(mask, row, x0.min(x1), x0.max(x1), w);
                }
            } else if y0.min(y1) <= y && y <= y0.max(y1) {
                let x = x0 + (y - y0) * (x1 - x0) / (y1 - y0);
                if x.fract() == 0.0 && x >= 0.0 && x < w as f64 {
                    mask.set(x as usize, row, true);
                }
            }
        }
    }
}

/// Inclusive range of cell indices whose centers fall in `[lo, hi]`.
fn clamp_span(lo: f64, hi: f64, len: usize) -> Option<(usize, usize)> {
    let start = lo.ceil().max(0.0);
    let end = hi.floor().min(len as f64 - 1.0);
    (start <= end).then_some((start as usize, end as usize))
}

fn fill_span(mask: &mut BinaryMask, row: usize, lo: f64, hi: f64, width: usize) {
    if let Some((a, b)) = clamp_span(lo, hi, width) {
        for x in a..=b {
            mask.set(x, row, true);
        }
    }
}
