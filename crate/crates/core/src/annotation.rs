//! DOTA ground-truth annotation files.
//!
//! Each data line is `x1 y1 x2 y2 x3 y3 x4 y4 class_name difficult`.
//! Files may start with `imagesource:...` and `gsd:...` header lines.

use crate::error::{Error, Result};

/// The fifteen DOTA v1.0 categories, in the column order of the usual
/// per-class result tables.
pub const DOTA_CLASSES: [&str; 15] = [
    "plane",
    "ship",
    "storage-tank",
    "baseball-diamond",
    "tennis-court",
    "basketball-court",
    "ground-track-field",
    "harbor",
    "bridge",
    "large-vehicle",
    "small-vehicle",
    "helicopter",
    "roundabout",
    "soccer-ball-field",
    "swimming-pool",
];

pub fn default_classes() -> Vec<String> {
    DOTA_CLASSES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub class_name: String,
    /// Corner points `(x, y)` in pixel coordinates, in file order.
    pub polygon: [(f64, f64); 4],
    pub difficulty: i32,
}

impl AnnotationRecord {
    /// Axis-aligned envelope `(x_min, y_min, x_max, y_max)` of the polygon.
    pub fn envelope(&self) -> (f64, f64, f64, f64) {
        self.polygon.iter().fold(
            (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            ),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }

    pub fn is_difficult(&self) -> bool {
        self.difficulty != 0
    }
}

fn is_header(line: &str) -> bool {
    line.starts_with("imagesource") || line.starts_with("gsd")
}

/// Parses the contents of a DOTA annotation file. Blank lines and header
/// lines are skipped; every other line must be a well-formed record.
pub fn parse_annotations(contents: &str) -> Result<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    for (idx, raw) in contents.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || is_header(line) {
            continue;
        }
        records.push(parse_line(line).map_err(|message| Error::Parse {
            line: idx + 1,
            message,
        })?);
    }
    Ok(records)
}

fn parse_line(line: &str) -> std::result::Result<AnnotationRecord, String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 10 {
        return Err(format!("expected 10 fields, found {}", tokens.len()));
    }
    let mut coords = [0.0f64; 8];
    for (slot, tok) in coords.iter_mut().zip(&tokens[..8]) {
        let v: f64 = tok
            .parse()
            .map_err(|_| format!("coordinate {tok:?} is not a number"))?;
        if !v.is_finite() || v < 0.0 {
            return Err(format!(
                "coordinate {tok:?} must be finite and non-negative"
            ));
        }
        *slot = v;
    }
    let difficulty = tokens[9]
        .parse()
        .map_err(|_| format!("difficulty flag {:?} is not an integer", tokens[9]))?;
    Ok(AnnotationRecord {
        class_name: tokens[8].to_string(),
        polygon: [
            (coords[0], coords[1]),
            (coords[2], coords[3]),
            (coords[4], coords[5]),
            (coords[6], coords[7]),
        ],
        difficulty,
    })
}

/// Class names used by `records` that are not in `classes`, deduplicated in
/// first-seen order.
pub fn unknown_classes<'a>(records: &'a [AnnotationRecord], classes: &[String]) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for r in records {
        if !classes.iter().any(|c| c == &r.class_name) && !out.contains(&r.class_name.as_str()) {
            out.push(&r.class_name);
        }
    }
    out
}
