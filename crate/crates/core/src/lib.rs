//! Preprocessing toolkit for multimodal aerial object detection.
//!
//! Binary context masks (harbors, bridges, vehicles, ...) rarely line up
//! pixel-for-pixel with the RGB frame they describe. This crate turns such
//! masks into smooth probability maps that stay informative under small
//! translations, stacks them with the RGB image into early-fusion tensors,
//! and scores detector output with per-class AP / mAP.
//!
//! The stages are:
//!
//! 1. **Masks** – DOTA annotation parsing, polygon rasterization, mask PNG I/O.
//! 2. **Distance transform** – exact linear-time Euclidean distance transform.
//! 3. **Probability maps** – normalized-distance maps and neighborhood-weighted maps.
//! 4. **Misalignment** – seeded random translations of masks.
//! 5. **Fusion** – RGB + probability channels, the `.fus` tensor format, dataset manifests.
//! 6. **Evaluation** – IoU matching, AP, mAP and report tables.
//!
//! Numeric rasters and boxes are generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below pick the precisions used by the pipeline.

pub mod annotation;
pub mod edt;
pub mod error;
pub mod eval;
mod fft;
pub mod fused_format;
pub mod fusion;
pub mod mask;
pub mod misalignment;
pub mod pipeline;
pub mod probability;
pub mod rasterize;
pub mod scalar;

pub use annotation::{parse_annotations, AnnotationRecord, DOTA_CLASSES};
pub use edt::{edt, edt_bruteforce, DistanceField};
pub use error::{Error, Result};
pub use eval::{
    average_precision, evaluate, iou, match_detections, BBox, Detection, EvalOptions, EvalReport,
    GroundTruth, Interpolation,
};
pub use fused_format::{read_fused, write_fused};
pub use fusion::{build_fused, ContextEntry, ContextMapping, FusedTensor, MappingMode};
pub use mask::{read_mask, write_mask, BinaryMask};
pub use misalignment::{apply_shift, sample_shift, ShiftPolicy, ShiftSpec};
pub use pipeline::{Manifest, PipelineConfig};
pub use probability::{
    prob_map_eq1, prob_map_eq2, prob_map_eq2_bruteforce, Eq2Params, MapMethod, ProbabilityMap,
};
pub use rasterize::rasterize;
pub use scalar::Scalar;

/// Probability map at the precision stored in fused tensors.
pub type ProbMap = ProbabilityMap<f32>;
/// Probability map at the precision used by the reference checks.
pub type ProbMap64 = ProbabilityMap<f64>;
/// Box in pixel coordinates, double precision.
pub type Box64 = BBox<f64>;
/// Evaluation report, double precision.
pub type Report64 = EvalReport<f64>;
