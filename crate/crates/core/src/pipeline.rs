//! End-to-end dataset processing: annotations → masks → shifted masks →
//! probability maps → fused tensors, plus the manifest that records every
//! choice made along the way.
//!
//! Dataset layout:
//!
//! ```text
//! root/images/<id>.png        RGB (or gray/RGBA, converted to RGB)
//! root/annotations/<id>.txt   DOTA annotations
//! root/fused/<id>.fus         written
//! root/maps/<id>__<class>.png written when `write_maps` is set
//! root/manifest.json          written
//! ```
//!
//! Planning reads every annotation and image header up front, so a run
//! fails before writing anything if an input is malformed. The manifest
//! stores the shift drawn for each channel; [`regenerate`] replays it.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{default_classes, parse_annotations, unknown_classes, AnnotationRecord};
use crate::error::{Error, Result};
use crate::fused_format::write_fused;
use crate::fusion::{build_fused, ContextEntry, ContextMapping, MappingMode};
use crate::misalignment::{apply_shift, sample_shift, ShiftPolicy, ShiftSpec};
use crate::probability::{Eq2Params, MapMethod, ProbabilityMap};
use crate::rasterize::rasterize;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "PROBFUSE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Eq1,
    Eq2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingConfig {
    pub mode: MappingMode,
    /// Indirect mode only; defaults to harbor/bridge/roundabout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<ContextEntry>>,
    /// Single mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            mode: MappingMode::Indirect,
            entries: None,
            class: None,
        }
    }
}

impl MappingConfig {
    pub fn resolve(&self, classes: &[String]) -> Result<ContextMapping> {
        let mapping = match self.mode {
            MappingMode::Direct => ContextMapping::direct(classes),
            MappingMode::Indirect => match &self.entries {
                Some(e) => ContextMapping::indirect(e.clone()),
                None => ContextMapping::indirect_default(),
            },
            MappingMode::Single => {
                let class = self
                    .class
                    .as_deref()
                    .ok_or_else(|| Error::Input("single mapping needs a \"class\" field".into()))?;
                ContextMapping::single(class, classes)
            }
        };
        mapping.validate(classes)?;
        Ok(mapping)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "ShiftConfig::default_min")]
    pub min_frac: f64,
    #[serde(default = "ShiftConfig::default_max")]
    pub max_frac: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Use one shift for all context channels of an image instead of one
    /// per (image, class).
    #[serde(default)]
    pub shared_per_image: bool,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        let p = ShiftPolicy::default();
        Self {
            enabled: true,
            min_frac: p.min_frac,
            max_frac: p.max_frac,
            master_seed: p.master_seed,
            shared_per_image: false,
        }
    }
}

impl ShiftConfig {
    fn default_min() -> f64 {
        ShiftPolicy::default().min_frac
    }

    fn default_max() -> f64 {
        ShiftPolicy::default().max_frac
    }

    pub fn policy(&self) -> Result<ShiftPolicy> {
        ShiftPolicy::new(self.min_frac, self.max_frac, self.master_seed)
    }

    /// Stream key for one channel.
    pub fn key(&self, image_id: &str, class_name: &str) -> String {
        if self.shared_per_image {
            image_id.to_string()
        } else {
            format!("{image_id}/{class_name}")
        }
    }
}

/// JSON configuration of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_root: PathBuf,
    /// Where `fused/`, `maps/` and the manifest go; defaults to `dataset_root`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_root: Option<PathBuf>,
    #[serde(default = "PipelineConfig::default_method")]
    pub method: MethodName,
    #[serde(default = "PipelineConfig::default_alpha")]
    pub alpha: f64,
    #[serde(default = "PipelineConfig::default_radius")]
    pub radius: usize,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub shift: ShiftConfig,
    #[serde(default = "default_classes")]
    pub classes: Vec<String>,
    #[serde(default = "PipelineConfig::default_fused_dir")]
    pub fused_dir: String,
    #[serde(default = "PipelineConfig::default_maps_dir")]
    pub maps_dir: String,
    #[serde(default = "yes")]
    pub write_maps: bool,
    #[serde(default = "PipelineConfig::default_manifest")]
    pub manifest_name: String,
    /// Worker count; `PROBFUSE_THREADS` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl PipelineConfig {
    fn default_method() -> MethodName {
        MethodName::Eq2
    }
    fn default_alpha() -> f64 {
        1.0
    }
    fn default_radius() -> usize {
        1
    }
    fn default_fused_dir() -> String {
        "fused".into()
    }
    fn default_maps_dir() -> String {
        "maps".into()
    }
    fn default_manifest() -> String {
        "manifest.json".into()
    }

    /// Configuration with every default and the given dataset root.
    pub fn new(dataset_root: impl Into<PathBuf>) -> Self {
        serde_json::from_value(serde_json::json!({ "dataset_root": dataset_root.into() }))
            .expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn map_method(&self) -> Result<MapMethod> {
        let m = match self.method {
            MethodName::Eq1 => MapMethod::Eq1,
            MethodName::Eq2 => MapMethod::Eq2(Eq2Params {
                alpha: self.alpha,
                radius: self.radius,
            }),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn output_root(&self) -> &Path {
        self.output_root.as_deref().unwrap_or(&self.dataset_root)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.output_root().join(&self.manifest_name)
    }

    /// Checks every parameter without touching the file system.
    pub fn validate(&self) -> Result<ManifestConfig> {
        if self.classes.is_empty() {
            return Err(Error::Input("class list is empty".into()));
        }
        for dir in [&self.fused_dir, &self.maps_dir] {
            if dir.is_empty() || Path::new(dir).is_absolute() || dir.contains("..") {
                return Err(Error::Input(format!(
                    "output directory {dir:?} must be a relative path inside the output root"
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("threads must be at least 1".into()));
        }
        self.shift.policy()?;
        Ok(ManifestConfig {
            method: self.map_method()?,
            mapping: self.mapping.resolve(&self.classes)?,
            shift: self.shift.clone(),
            classes: self.classes.clone(),
            rgb_scale: RGB_SCALE.into(),
            tensor_format: TENSOR_FORMAT.into(),
            fused_dir: self.fused_dir.clone(),
            maps_dir: self.maps_dir.clone(),
            write_maps: self.write_maps,
        })
    }
}

const RGB_SCALE: &str = "1/255";
const TENSOR_FORMAT: &str = "FUSE v1";

/// Resolved configuration echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestConfig {
    pub method: MapMethod,
    pub mapping: ContextMapping,
    pub shift: ShiftConfig,
    pub classes: Vec<String>,
    /// Factor applied to 8-bit RGB values.
    pub rgb_scale: String,
    pub tensor_format: String,
    pub fused_dir: String,
    pub maps_dir: String,
    pub write_maps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub class_name: String,
    /// `"rasterized"` when drawn from the annotation file, `"absent"` otherwise.
    pub mask_source: String,
    pub polygons: usize,
    pub shift: ShiftSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_path: Option<String>,
    /// Set cells after shifting; filled in once the channel is built.
    #[serde(default)]
    pub mask_cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub id: String,
    pub image_path: String,
    pub annotation_path: Option<String>,
    pub width: usize,
    pub height: usize,
    pub fused_path: String,
    pub channels: Vec<ChannelEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: ManifestConfig,
    pub images: Vec<ImageEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "manifest schema version {} is not supported",
                m.schema_version
            )));
        }
        m.config.method.validate()?;
        m.config.mapping.validate(&m.config.classes)?;
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn warnings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.images
            .iter()
            .flat_map(|i| i.warnings.iter().map(move |w| (i.id.as_str(), w.as_str())))
    }
}

fn list_images(root: &Path) -> Result<Vec<(String, String)>> {
    let dir = root.join("images");
    if !dir.is_dir() {
        return Err(Error::Input(format!(
            "dataset root {} has no images/ directory",
            root.display()
        )));
    }
    let rd = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        let path = entry.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if !is_png || !path.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push((id, name));
    }
    out.sort();
    Ok(out)
}

fn read_records(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text).map_err(|e| match e {
        Error::Parse { line, message } => {
            Error::Input(format!("{}: line {line}: {message}", path.display()))
        }
        other => other,
    })
}

/// Validates the configuration and inputs and builds the manifest without
/// writing anything. `mask_cells` stays empty until the plan is executed.
pub fn build_manifest(config: &PipelineConfig) -> Result<Manifest> {
    let resolved = config.validate()?;
    let root = &config.dataset_root;
    let policy = config.shift.policy()?;
    let mut images = Vec::new();
    for (id, file_name) in list_images(root)? {
        let image_path = format!("images/{file_name}");
        let (w, h) = image::image_dimensions(root.join(&image_path))?;
        let (w, h) = (w as usize, h as usize);

        let mut warnings = Vec::new();
        let ann_rel = format!("annotations/{id}.txt");
        let ann_abs = root.join(&ann_rel);
        let (annotation_path, records) = if ann_abs.is_file() {
            (Some(ann_rel), read_records(&ann_abs)?)
        } else {
            warnings.push(format!("missing annotation file {ann_rel}"));
            (None, Vec::new())
        };
        for c in unknown_classes(&records, &resolved.classes) {
            warnings.push(format!("annotation class {c:?} is not in the class list"));
        }

        let mut channels = Vec::new();
        for class in &resolved.mapping.channel_order {
            let shift = if config.shift.enabled {
                sample_shift(&policy, &config.shift.key(&id, class), w, h)?
            } else {
                ShiftSpec::ZERO
            };
            channels.push(ChannelEntry {
                class_name: class.clone(),
                mask_source: if annotation_path.is_some() {
                    "rasterized".into()
                } else {
                    "absent".into()
                },
                polygons: records.iter().filter(|r| &r.class_name == class).count(),
                shift,
                map_path: config
                    .write_maps
                    .then(|| format!("{}/{id}__{class}.png", config.maps_dir)),
                mask_cells: None,
            });
        }
        images.push(ImageEntry {
            fused_path: format!("{}/{id}.fus", config.fused_dir),
            id,
            image_path,
            annotation_path,
            width: w,
            height: h,
            channels,
            warnings,
        });
    }
    Ok(Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        config: resolved,
        images,
    })
}

/// Builds one image's channels and fused tensor under `out_root` and
/// returns the per-channel mask cell counts.
fn execute_image(
    config: &ManifestConfig,
    entry: &ImageEntry,
    dataset_root: &Path,
    out_root: &Path,
) -> Result<Vec<usize>> {
    let img = image::open(dataset_root.join(&entry.image_path))?.into_rgb8();
    if (img.width() as usize, img.height() as usize) != (entry.width, entry.height) {
        return Err(Error::Shape(format!(
            "{} is {}x{}, manifest says {}x{}",
            entry.image_path,
            img.width(),
            img.height(),
            entry.width,
            entry.height
        )));
    }
    let records = match &entry.annotation_path {
        Some(p) => read_records(&dataset_root.join(p))?,
        None => Vec::new(),
    };

    let mut maps = Vec::with_capacity(entry.channels.len());
    let mut counts = Vec::with_capacity(entry.channels.len());
    for ch in &entry.channels {
        let mask = rasterize(&records, &ch.class_name, entry.width, entry.height)?;
        let shifted = apply_shift(&mask, ch.shift)?;
        let cells = shifted.count();
        let map: ProbabilityMap<f32> = if cells == 0 {
            ProbabilityMap::zeros(entry.width, entry.height, config.method)
        } else {
            config.method.generate(&shifted)?
        };
        if let Some(p) = &ch.map_path {
            map.write_png(out_root.join(p))?;
        }
        counts.push(cells);
        maps.push((ch.class_name.clone(), map));
    }
    let tensor = build_fused(&img, &maps, &config.mapping)?;
    write_fused(&tensor, out_root.join(&entry.fused_path))?;
    Ok(counts)
}

fn thread_count(configured: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Parameter(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(configured),
    }
}

/// Executes a manifest, writing outputs under `out_root`, and returns the
/// manifest with `mask_cells` filled in. Output is identical for any
/// thread count.
pub fn execute(
    manifest: &Manifest,
    dataset_root: &Path,
    out_root: &Path,
    threads: Option<usize>,
    progress: &(dyn Fn(&ImageEntry) + Sync),
) -> Result<Manifest> {
    let cfg = &manifest.config;
    for dir in [&cfg.fused_dir, &cfg.maps_dir] {
        if dir == &cfg.maps_dir && !cfg.write_maps {
            continue;
        }
        let d = out_root.join(dir);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;

    let counts: Vec<Vec<usize>> = pool.install(|| {
        manifest
            .images
            .par_iter()
            .map(|entry| {
                let c = execute_image(cfg, entry, dataset_root, out_root)?;
                progress(entry);
                Ok(c)
            })
            .collect::<Result<_>>()
    })?;

    let mut done = manifest.clone();
    for (entry, cells) in done.images.iter_mut().zip(counts) {
        for (ch, n) in entry.channels.iter_mut().zip(cells) {
            ch.mask_cells = Some(n);
        }
    }
    Ok(done)
}

/// Plans, executes and writes the manifest. Nothing is written if planning
/// fails.
pub fn run(config: &PipelineConfig, progress: &(dyn Fn(&ImageEntry) + Sync)) -> Result<Manifest> {
    let plan = build_manifest(config)?;
    let out_root = config.output_root();
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let done = execute(
        &plan,
        &config.dataset_root,
        out_root,
        config.threads,
        progress,
    )?;
    done.write(config.manifest_path())?;
    Ok(done)
}

/// Rebuilds every output listed in `manifest` from the dataset under
/// `dataset_root`, writing to `out_root` together with a copy of the
/// manifest.
pub fn regenerate(
    manifest: &Manifest,
    dataset_root: &Path,
    out_root: &Path,
    threads: Option<usize>,
) -> Result<Manifest> {
    std::fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let plan = Manifest {
        images: manifest
            .images
            .iter()
            .cloned()
            .map(|mut e| {
                e.channels.iter_mut().for_each(|c| c.mask_cells = None);
                e
            })
            .collect(),
        ..manifest.clone()
    };
    let done = execute(&plan, dataset_root, out_root, threads, &|_| {})?;
    done.write(out_root.join("manifest.json"))?;
    Ok(done)
}
