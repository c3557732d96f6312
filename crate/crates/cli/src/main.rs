//! `probfuse` command-line front end.
//!
//! Summaries go to stdout as JSON (or a table for `eval`). Progress and
//! warnings go to stderr. Failures print one JSON line on stderr and exit
//! with 2 for usage or validation errors, 1 for I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use probfuse::annotation::{default_classes, parse_annotations};
use probfuse::eval::parse_detections;
use probfuse::misalignment::ShiftPolicy;
use probfuse::pipeline::{self, build_manifest};
use probfuse::{
    apply_shift, build_fused, evaluate, rasterize, read_mask, sample_shift, write_fused,
    write_mask, ContextMapping, Eq2Params, EvalOptions, GroundTruth, Interpolation, Manifest,
    MapMethod, PipelineConfig, ProbMap, Report64, ShiftSpec,
};

#[derive(Parser)]
#[command(
    name = "probfuse",
    version,
    about = "Probability-map context fusion for aerial imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize one class of a DOTA annotation file into a binary mask PNG.
    Rasterize(RasterizeArgs),
    /// Turn a binary mask PNG into a probability map PNG.
    Probmap(ProbmapArgs),
    /// Translate a binary mask, by a fixed or a sampled offset.
    Shift(ShiftArgs),
    /// Stack an RGB image with context probability maps into a .fus file.
    Fuse(FuseArgs),
    /// Score detections against ground truth (AP per class and mAP).
    Eval(EvalArgs),
    /// Run the whole dataset pipeline from a JSON config.
    Pipeline(PipelineArgs),
    /// Rebuild every output listed in a manifest.
    Regenerate(RegenerateArgs),
}

#[derive(Args)]
struct RasterizeArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long = "class")]
    class_name: String,
    /// Take width and height from this image.
    #[arg(long, conflicts_with_all = ["width", "height"])]
    like: Option<PathBuf>,
    #[arg(long, requires = "height")]
    width: Option<usize>,
    #[arg(long, requires = "width")]
    height: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Eq1,
    Eq2,
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_enum, default_value = "eq2")]
    method: Method,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    radius: usize,
}

impl MethodArgs {
    fn resolve(&self) -> Result<MapMethod, Failure> {
        let m = match self.method {
            Method::Eq1 => MapMethod::Eq1,
            Method::Eq2 => MapMethod::Eq2(Eq2Params {
                alpha: self.alpha,
                radius: self.radius,
            }),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Args)]
struct ProbmapArgs {
    #[arg(long)]
    mask: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShiftArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(
        long,
        allow_hyphen_values = true,
        requires = "dy",
        conflicts_with = "image_id"
    )]
    dx: Option<i64>,
    #[arg(long, allow_hyphen_values = true, requires = "dx")]
    dy: Option<i64>,
    /// Sample the offset for this key instead of giving --dx/--dy.
    #[arg(long)]
    image_id: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    min_frac: f64,
    #[arg(long, default_value_t = 0.10)]
    max_frac: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mapping {
    Direct,
    Indirect,
    Single,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    image: PathBuf,
    /// CLASS=PATH of a binary mask; repeatable.
    #[arg(long = "mask", value_name = "CLASS=PATH")]
    masks: Vec<String>,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long, value_enum, default_value = "indirect")]
    mapping: Mapping,
    /// Context class for --mapping single.
    #[arg(long)]
    context: Option<String>,
    /// Comma-separated class list; defaults to the 15 DOTA classes.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    /// Lines of `image_id class confidence x_min y_min x_max y_max`.
    #[arg(long)]
    detections: PathBuf,
    /// DOTA annotation file, or a directory of them named `<image_id>.txt`.
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Accept IoU equal to the threshold.
    #[arg(long)]
    inclusive: bool,
    #[arg(long)]
    eleven_point: bool,
    #[arg(long)]
    exclude_difficult: bool,
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Print the manifest that would be executed and write nothing.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RegenerateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    dataset_root: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Usage(String),
    Validation(String),
    Io(String),
}

impl From<probfuse::Error> for Failure {
    fn from(e: probfuse::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Io(e.to_string())
        }
    }
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (kind, message, code) = match self {
            Failure::Usage(m) => ("usage", m, 2),
            Failure::Validation(m) => ("validation", m, 2),
            Failure::Io(m) => ("io", m, 1),
        };
        eprintln!("{}", json!({ "error": kind, "message": message }));
        ExitCode::from(code)
    }
}

type Outcome = Result<(), Failure>;

fn require_file(path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "input file {} does not exist",
            path.display()
        )))
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    require_file(path)?;
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path, e: probfuse::Error) -> Failure {
    match e {
        probfuse::Error::Parse { line, message } => {
            Failure::Validation(format!("{}: line {line}: {message}", path.display()))
        }
        other => other.into(),
    }
}

fn cmd_rasterize(a: RasterizeArgs) -> Outcome {
    let text = read_text(&a.annotations)?;
    let records = parse_annotations(&text).map_err(|e| in_file(&a.annotations, e))?;
    let (w, h) = match (&a.like, a.width, a.height) {
        (Some(p), _, _) => {
            require_file(p)?;
            let (w, h) = image::image_dimensions(p).map_err(probfuse::Error::from)?;
            (w as usize, h as usize)
        }
        (None, Some(w), Some(h)) => (w, h),
        _ => {
            return Err(Failure::Usage(
                "give --like or both --width and --height".into(),
            ))
        }
    };
    let mask = rasterize(&records, &a.class_name, w, h)?;
    write_mask(&mask, &a.out)?;
    let polygons = records
        .iter()
        .filter(|r| r.class_name == a.class_name)
        .count();
    println!(
        "{}",
        json!({ "class": a.class_name, "width": w, "height": h, "polygons": polygons,
                "cells": mask.count(), "out": a.out })
    );
    Ok(())
}

fn cmd_probmap(a: ProbmapArgs) -> Outcome {
    let method = a.method.resolve()?;
    require_file(&a.mask)?;
    let mask = read_mask(&a.mask)?;
    let map: ProbMap = method.generate(&mask)?;
    map.write_png(&a.out)?;
    let v = map.values();
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    let max = v.iter().copied().fold(0.0f32, f32::max);
    println!(
        "{}",
        json!({ "method": method, "width": map.width(), "height": map.height(),
                "mean": mean, "max": max, "out": a.out })
    );
    Ok(())
}

fn cmd_shift(a: ShiftArgs) -> Outcome {
    let policy = ShiftPolicy::new(a.min_frac, a.max_frac, a.seed)?;
    require_file(&a.mask)?;
    let mask = read_mask(&a.mask)?;
    let spec = match (a.dx, a.dy, &a.image_id) {
        (Some(dx), Some(dy), None) => ShiftSpec::new(dx, dy),
        (None, None, Some(id)) => sample_shift(&policy, id, mask.width(), mask.height())?,
        _ => {
            return Err(Failure::Usage(
                "give either --dx and --dy or --image-id".into(),
            ))
        }
    };
    let out = apply_shift(&mask, spec)?;
    write_mask(&out, &a.out)?;
    println!(
        "{}",
        json!({ "dx": spec.dx, "dy": spec.dy, "cells_before": mask.count(),
                "cells_after": out.count(), "out": a.out })
    );
    Ok(())
}

fn cmd_fuse(a: FuseArgs) -> Outcome {
    let method = a.method.resolve()?;
    let classes = a.classes.clone().unwrap_or_else(default_classes);
    let mapping = match a.mapping {
        Mapping::Direct => ContextMapping::direct(&classes),
        Mapping::Indirect => ContextMapping::indirect_default(),
        Mapping::Single => {
            let ctx = a
                .context
                .as_deref()
                .ok_or_else(|| Failure::Usage("--mapping single needs --context".into()))?;
            ContextMapping::single(ctx, &classes)
        }
    };
    mapping.validate(&classes)?;
    let mut inputs = Vec::new();
    for spec in &a.masks {
        let (class, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--mask expects CLASS=PATH, got {spec:?}")))?;
        let path = PathBuf::from(path);
        require_file(&path)?;
        inputs.push((class.to_string(), path));
    }
    require_file(&a.image)?;

    let img = image::open(&a.image)
        .map_err(probfuse::Error::from)?
        .into_rgb8();
    let mut maps = Vec::new();
    for (class, path) in &inputs {
        let mask = read_mask(path)?;
        let map: ProbMap = if mask.is_blank() {
            ProbMap::zeros(mask.width(), mask.height(), method)
        } else {
            method.generate(&mask)?
        };
        maps.push((class.clone(), map));
    }
    let tensor = build_fused(&img, &maps, &mapping)?;
    write_fused(&tensor, &a.out)?;
    println!(
        "{}",
        json!({ "channels": tensor.channel_names(), "height": tensor.height(),
                "width": tensor.width(), "out": a.out })
    );
    Ok(())
}

fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruth<f64>>, Failure> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
            .collect();
        v.sort();
        v
    } else {
        require_file(path)?;
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for f in files {
        let id = f
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let text = read_text(&f)?;
        for r in parse_annotations(&text).map_err(|e| in_file(&f, e))? {
            out.push(GroundTruth::from_annotation(&id, &r)?);
        }
    }
    Ok(out)
}

fn report_json(r: &Report64) -> serde_json::Value {
    let classes: Vec<_> = r
        .per_class
        .iter()
        .map(|c| {
            json!({ "class": c.class_name, "ap": c.ap, "n_gt": c.n_gt,
                          "n_tp": c.n_tp, "n_fp": c.n_fp })
        })
        .collect();
    json!({ "iou_threshold": r.iou_threshold, "mAP": r.map, "classes": classes,
            "unknown_detections": r.unknown_detections,
            "unknown_ground_truths": r.unknown_ground_truths })
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let opts = EvalOptions {
        iou_threshold: a.iou,
        inclusive: a.inclusive,
        interpolation: if a.eleven_point {
            Interpolation::ElevenPoint
        } else {
            Interpolation::AllPoint
        },
        exclude_difficult: a.exclude_difficult,
        classes: a.classes.clone().unwrap_or_else(default_classes),
    };
    opts.validate()?;
    if !a.ground_truth.exists() {
        return Err(Failure::Validation(format!(
            "ground truth {} does not exist",
            a.ground_truth.display()
        )));
    }
    let dets = parse_detections::<f64>(&read_text(&a.detections)?)
        .map_err(|e| in_file(&a.detections, e))?;
    let gts = load_ground_truth(&a.ground_truth)?;
    let report = evaluate(&dets, &gts, &opts)?;
    if report.unknown_detections + report.unknown_ground_truths > 0 {
        eprintln!(
            "warning: ignored {} detections and {} ground truths outside the class list",
            report.unknown_detections, report.unknown_ground_truths
        );
    }
    match a.format {
        ReportFormat::Table => print!("{}", report.to_table()),
        ReportFormat::Csv => print!("{}", report.to_csv()),
        ReportFormat::Json => println!("{}", report_json(&report)),
    }
    Ok(())
}

/// Relative paths in a config are taken from the config file's directory.
fn load_config(path: &Path) -> Result<PipelineConfig, Failure> {
    let text = read_text(path)?;
    let mut cfg = PipelineConfig::from_json(&text)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    if cfg.dataset_root.is_relative() {
        cfg.dataset_root = base.join(&cfg.dataset_root);
    }
    if let Some(o) = cfg.output_root.as_mut().filter(|o| o.is_relative()) {
        *o = base.join(&*o);
    }
    if !cfg.dataset_root.is_dir() {
        return Err(Failure::Validation(format!(
            "dataset root {} does not exist",
            cfg.dataset_root.display()
        )));
    }
    Ok(cfg)
}

fn print_warnings(m: &Manifest) -> usize {
    let mut n = 0;
    for (id, w) in m.warnings() {
        eprintln!("warning: {id}: {w}");
        n += 1;
    }
    n
}

fn cmd_pipeline(a: PipelineArgs) -> Outcome {
    let mut cfg = load_config(&a.config)?;
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if a.dry_run {
        let plan = build_manifest(&cfg)?;
        print_warnings(&plan);
        print!("{}", plan.to_json()?);
        return Ok(());
    }
    let total = build_manifest(&cfg)?.images.len();
    let done = AtomicUsize::new(0);
    let manifest = pipeline::run(&cfg, &|entry| {
        let k = done.fetch_add(1, Ordering::SeqCst) + 1;
        eprintln!("[{k}/{total}] {}", entry.id);
    })?;
    let warnings = print_warnings(&manifest);
    println!(
        "{}",
        json!({ "images": manifest.images.len(), "warnings": warnings,
                "output_root": cfg.output_root(), "manifest": cfg.manifest_path() })
    );
    Ok(())
}

fn cmd_regenerate(a: RegenerateArgs) -> Outcome {
    let text = read_text(&a.manifest)?;
    let manifest = Manifest::from_json(&text)
        .map_err(|e| Failure::Validation(format!("{}: {e}", a.manifest.display())))?;
    if !a.dataset_root.is_dir() {
        return Err(Failure::Validation(format!(
            "dataset root {} does not exist",
            a.dataset_root.display()
        )));
    }
    let done = pipeline::regenerate(&manifest, &a.dataset_root, &a.out, a.threads)?;
    println!(
        "{}",
        json!({ "images": done.images.len(), "output_root": a.out })
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            return Failure::Usage(first.to_string()).report();
        }
    };
    let result = match cli.command {
        Command::Rasterize(a) => cmd_rasterize(a),
        Command::Probmap(a) => cmd_probmap(a),
        Command::Shift(a) => cmd_shift(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Regenerate(a) => cmd_regenerate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
