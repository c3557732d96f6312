//! Detection scoring: IoU matching, per-class average precision and mAP.
//!
//! A detection is a true positive when its IoU with an unmatched ground
//! truth of the same image and class is strictly greater than the
//! threshold (optionally `>=`). Within each `(image, class)` group,
//! detections are matched in descending confidence, ties kept in input
//! order, each one against the unmatched ground truth it overlaps most.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::annotation::{default_classes, AnnotationRecord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::Input(format!(
                "invalid box ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn area(&self) -> T {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }
}

pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let inter = a.intersection_area(b);
    if inter == T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub image_id: String,
    pub class_name: String,
    pub bbox: BBox<T>,
    pub confidence: T,
}

impl<T: Scalar> Detection<T> {
    pub fn new(image_id: &str, class_name: &str, bbox: BBox<T>, confidence: T) -> Result<Self> {
        if !(confidence >= T::zero() && confidence <= T::one()) {
            return Err(Error::Input(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            image_id: image_id.to_string(),
            class_name: class_name.to_string(),
            bbox,
            confidence,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    pub image_id: String,
    pub class_name: String,
    pub bbox: BBox<T>,
    pub difficult: bool,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn new(image_id: &str, class_name: &str, bbox: BBox<T>, difficult: bool) -> Self {
        Self {
            image_id: image_id.to_string(),
            class_name: class_name.to_string(),
            bbox,
            difficult,
        }
    }

    /// Axis-aligned envelope of an annotation polygon.
    pub fn from_annotation(image_id: &str, record: &AnnotationRecord) -> Result<Self> {
        let (x0, y0, x1, y1) = record.envelope();
        let bbox = BBox::new(T::of(x0), T::of(y0), T::of(x1), T::of(y1))?;
        Ok(Self::new(
            image_id,
            &record.class_name,
            bbox,
            record.is_difficult(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Area under the monotone precision envelope (VOC 2010 and later).
    AllPoint,
    /// Mean of the envelope at recall 0, 0.1, ..., 1 (VOC 2007).
    ElevenPoint,
}

#[derive(Debug, Clone)]
pub struct EvalOptions<T> {
    pub iou_threshold: T,
    /// Accept `IoU >= threshold` instead of `IoU > threshold`.
    pub inclusive: bool,
    pub interpolation: Interpolation,
    /// Drop difficult ground truths from the counts; detections matching
    /// them are neither TP nor FP.
    pub exclude_difficult: bool,
    /// Report classes, in report order.
    pub classes: Vec<String>,
}

impl<T: Scalar> Default for EvalOptions<T> {
    fn default() -> Self {
        Self {
            iou_threshold: T::of(0.5),
            inclusive: false,
            interpolation: Interpolation::AllPoint,
            exclude_difficult: false,
            classes: default_classes(),
        }
    }
}

impl<T: Scalar> EvalOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > T::zero() && self.iou_threshold < T::one()) {
            return Err(Error::Parameter(format!(
                "IoU threshold must lie in (0, 1), got {}",
                self.iou_threshold
            )));
        }
        Ok(())
    }

    fn passes(&self, overlap: T) -> bool {
        if self.inclusive {
            overlap >= self.iou_threshold
        } else {
            overlap > self.iou_threshold
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLabel {
    TruePositive,
    FalsePositive,
    /// Matched a difficult ground truth while difficult ones are excluded.
    Ignored,
    /// Class not in the configured class list.
    UnknownClass,
}

#[derive(Debug, Clone)]
pub struct Matching {
    /// One label per input detection, in input order.
    pub labels: Vec<MatchLabel>,
    pub unknown_detections: usize,
    pub unknown_ground_truths: usize,
}

pub fn match_detections<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruth<T>],
    opts: &EvalOptions<T>,
) -> Result<Matching> {
    opts.validate()?;
    let known = |c: &str| opts.classes.iter().any(|k| k == c);

    let mut gt_groups: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    let mut unknown_ground_truths = 0;
    for (i, g) in gts.iter().enumerate() {
        if known(&g.class_name) {
            gt_groups
                .entry((g.image_id.as_str(), g.class_name.as_str()))
                .or_default()
                .push(i);
        } else {
            unknown_ground_truths += 1;
        }
    }

    let mut labels = vec![MatchLabel::FalsePositive; dets.len()];
    let mut det_groups: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    let mut unknown_detections = 0;
    for (i, d) in dets.iter().enumerate() {
        if known(&d.class_name) {
            det_groups
                .entry((d.image_id.as_str(), d.class_name.as_str()))
                .or_default()
                .push(i);
        } else {
            labels[i] = MatchLabel::UnknownClass;
            unknown_detections += 1;
        }
    }

    let empty = Vec::new();
    for (key, mut order) in det_groups {
        order.sort_by(|&a, &b| dets[b].confidence.partial_cmp(&dets[a].confidence).unwrap());
        let group = gt_groups.get(&key).unwrap_or(&empty);
        let mut taken = vec![false; group.len()];
        for di in order {
            let dbox = &dets[di].bbox;
            let mut best: Option<(usize, T)> = None;
            for (slot, &gi) in group.iter().enumerate() {
                let g = &gts[gi];
                if taken[slot] || (opts.exclude_difficult && g.difficult) {
                    continue;
                }
                let o = iou(dbox, &g.bbox);
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((slot, o));
                }
            }
            labels[di] = match best {
                Some((slot, o)) if opts.passes(o) => {
                    taken[slot] = true;
                    MatchLabel::TruePositive
                }
                _ if opts.exclude_difficult
                    && group
                        .iter()
                        .any(|&gi| gts[gi].difficult && opts.passes(iou(dbox, &gts[gi].bbox))) =>
                {
                    MatchLabel::Ignored
                }
                _ => MatchLabel::FalsePositive,
            };
        }
    }

    Ok(Matching {
        labels,
        unknown_detections,
        unknown_ground_truths,
    })
}

/// Average precision of scored TP/FP labels against `n_gt` ground truths.
/// Labels are ranked by descending confidence, ties in slice order.
/// Returns `None` when `n_gt` is zero.
pub fn average_precision<T: Scalar>(
    scored: &[(T, bool)],
    n_gt: usize,
    interpolation: Interpolation,
) -> Option<T> {
    if n_gt == 0 {
        return None;
    }
    let mut ranked: Vec<&(T, bool)> = scored.iter().collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let n = T::of(n_gt as f64);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    for &&(_, is_tp) in &ranked {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(T::of(tp as f64) / n);
        precision.push(T::of(tp as f64) / T::of((tp + fp) as f64));
    }

    let ap = match interpolation {
        Interpolation::AllPoint => {
            let mut mrec = vec![T::zero()];
            mrec.extend_from_slice(&recall);
            mrec.push(T::one());
            let mut mpre = vec![T::zero()];
            mpre.extend_from_slice(&precision);
            mpre.push(T::zero());
            for i in (0..mpre.len() - 1).rev() {
                mpre[i] = mpre[i].max(mpre[i + 1]);
            }
            (0..mrec.len() - 1)
                .filter(|&i| mrec[i + 1] != mrec[i])
                .fold(T::zero(), |acc, i| {
                    acc + (mrec[i + 1] - mrec[i]) * mpre[i + 1]
                })
        }
        Interpolation::ElevenPoint => {
            let sum = (0..=10).fold(T::zero(), |acc, k| {
                let t = T::of(k as f64 / 10.0);
                let p = recall
                    .iter()
                    .zip(&precision)
                    .filter(|(r, _)| **r >= t)
                    .map(|(_, p)| *p)
                    .fold(T::zero(), T::max);
                acc + p
            });
            sum / T::of(11.0)
        }
    };
    Some(ap.max(T::zero()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassResult<T> {
    pub class_name: String,
    /// `None` when the class has no ground truth.
    pub ap: Option<T>,
    pub n_gt: usize,
    pub n_tp: usize,
    pub n_fp: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub per_class: Vec<ClassResult<T>>,
    /// Mean AP over classes with at least one ground truth; 0 if none has.
    pub map: T,
    pub iou_threshold: T,
    pub unknown_detections: usize,
    pub unknown_ground_truths: usize,
}

pub fn evaluate<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruth<T>],
    opts: &EvalOptions<T>,
) -> Result<EvalReport<T>> {
    let matching = match_detections(dets, gts, opts)?;
    let mut per_class = Vec::with_capacity(opts.classes.len());
    for class in &opts.classes {
        let n_gt = gts
            .iter()
            .filter(|g| &g.class_name == class && !(opts.exclude_difficult && g.difficult))
            .count();
        let scored: Vec<(T, bool)> = dets
            .iter()
            .zip(&matching.labels)
            .filter(|(d, _)| &d.class_name == class)
            .filter_map(|(d, l)| match l {
                MatchLabel::TruePositive => Some((d.confidence, true)),
                MatchLabel::FalsePositive => Some((d.confidence, false)),
                _ => None,
            })
            .collect();
        let n_tp = scored.iter().filter(|s| s.1).count();
        per_class.push(ClassResult {
            class_name: class.clone(),
            ap: average_precision(&scored, n_gt, opts.interpolation),
            n_gt,
            n_tp,
            n_fp: scored.len() - n_tp,
        });
    }
    let aps: Vec<T> = per_class.iter().filter_map(|c| c.ap).collect();
    let map = if aps.is_empty() {
        T::zero()
    } else {
        aps.iter().fold(T::zero(), |a, &b| a + b) / T::of(aps.len() as f64)
    };
    Ok(EvalReport {
        per_class,
        map,
        iou_threshold: opts.iou_threshold,
        unknown_detections: matching.unknown_detections,
        unknown_ground_truths: matching.unknown_ground_truths,
    })
}

impl<T: Scalar> EvalReport<T> {
    pub fn class(&self, name: &str) -> Option<&ClassResult<T>> {
        self.per_class.iter().find(|c| c.class_name == name)
    }

    fn totals(&self) -> (usize, usize, usize) {
        self.per_class.iter().fold((0, 0, 0), |(g, t, f), c| {
            (g + c.n_gt, t + c.n_tp, f + c.n_fp)
        })
    }

    /// `class,AP,n_gt,n_tp,n_fp` rows in class order, then an `mAP` row with
    /// totals. Classes without ground truth report `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,AP,n_gt,n_tp,n_fp\n");
        for c in &self.per_class {
            let ap =
                c.ap.map_or("NA".to_string(), |v| format!("{:.6}", v.as_f64()));
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.class_name, ap, c.n_gt, c.n_tp, c.n_fp
            );
        }
        let (g, t, f) = self.totals();
        let _ = writeln!(out, "mAP,{:.6},{g},{t},{f}", self.map.as_f64());
        out
    }

    pub fn to_table(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|c| c.class_name.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}",
            "class", "AP", "n_gt", "n_tp", "n_fp"
        );
        for c in &self.per_class {
            let ap =
                c.ap.map_or("NA".to_string(), |v| format!("{:.4}", v.as_f64()));
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}",
                c.class_name, ap, c.n_gt, c.n_tp, c.n_fp
            );
        }
        let (g, t, f) = self.totals();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.4}  {:>6}  {:>6}  {:>6}",
            "mAP",
            self.map.as_f64(),
            g,
            t,
            f
        );
        out
    }
}

/// Parses detection lines `image_id class_name confidence x_min y_min x_max y_max`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_detections<T: Scalar>(contents: &str) -> Result<Vec<Detection<T>>> {
    let mut out = Vec::new();
    for (idx, raw) in contents.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", tok.len())));
        }
        let mut nums = [T::zero(); 5];
        for (slot, t) in nums.iter_mut().zip(&tok[2..]) {
            let v: f64 = t
                .parse()
                .map_err(|_| err(format!("{t:?} is not a number")))?;
            *slot = T::of(v);
        }
        let bbox = BBox::new(nums[1], nums[2], nums[3], nums[4]).map_err(|e| err(e.to_string()))?;
        out.push(Detection::new(tok[0], tok[1], bbox, nums[0]).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}
