//! Early fusion: RGB plus probability channels in one planar tensor.

use std::collections::HashSet;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::ProbabilityMap;

pub const RGB_NAMES: [&str; 3] = ["R", "G", "B"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingMode {
    /// One channel per detection class.
    Direct,
    /// Channels of related context classes (harbor for ships, ...).
    Indirect,
    /// A single context channel.
    Single,
}

/// A context class and the target classes it is meant to support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextEntry {
    pub context: String,
    pub targets: Vec<String>,
}

impl ContextEntry {
    pub fn new(context: &str, targets: &[&str]) -> Self {
        Self {
            context: context.to_string(),
            targets: targets.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextMapping {
    pub mode: MappingMode,
    pub entries: Vec<ContextEntry>,
    pub channel_order: Vec<String>,
}

impl ContextMapping {
    /// Every class is its own context channel.
    pub fn direct(classes: &[String]) -> Self {
        Self {
            mode: MappingMode::Direct,
            entries: classes
                .iter()
                .map(|c| ContextEntry {
                    context: c.clone(),
                    targets: vec![c.clone()],
                })
                .collect(),
            channel_order: classes.to_vec(),
        }
    }

    /// harbor → ship; bridge and roundabout → small and large vehicles.
    pub fn indirect_default() -> Self {
        Self::indirect(vec![
            ContextEntry::new("harbor", &["ship"]),
            ContextEntry::new("bridge", &["small-vehicle", "large-vehicle"]),
            ContextEntry::new("roundabout", &["small-vehicle", "large-vehicle"]),
        ])
    }

    pub fn indirect(entries: Vec<ContextEntry>) -> Self {
        let channel_order = entries.iter().map(|e| e.context.clone()).collect();
        Self {
            mode: MappingMode::Indirect,
            entries,
            channel_order,
        }
    }

    /// One context class, supporting every class in `classes`.
    pub fn single(context: &str, classes: &[String]) -> Self {
        Self {
            mode: MappingMode::Single,
            entries: vec![ContextEntry {
                context: context.to_string(),
                targets: classes.to_vec(),
            }],
            channel_order: vec![context.to_string()],
        }
    }

    /// Checks mode-specific invariants against the configured class list.
    pub fn validate(&self, classes: &[String]) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.channel_order {
            if !seen.insert(c.as_str()) {
                return Err(Error::Input(format!("context class {c:?} listed twice")));
            }
            if RGB_NAMES.contains(&c.as_str()) {
                return Err(Error::Input(format!(
                    "context class may not be named {c:?}"
                )));
            }
            if !classes.contains(c) {
                return Err(Error::Input(format!(
                    "context class {c:?} is not a known class"
                )));
            }
        }
        for e in &self.entries {
            if !self.channel_order.contains(&e.context) {
                return Err(Error::Input(format!(
                    "entry for {:?} has no channel",
                    e.context
                )));
            }
            if let Some(t) = e.targets.iter().find(|t| !classes.contains(t)) {
                return Err(Error::Input(format!(
                    "target class {t:?} is not a known class"
                )));
            }
        }
        match self.mode {
            MappingMode::Direct if self.channel_order != classes => Err(Error::Input(
                "direct mapping must have one channel per class, in class order".into(),
            )),
            MappingMode::Single if self.channel_order.len() != 1 => Err(Error::Input(format!(
                "single mapping needs exactly one context class, got {}",
                self.channel_order.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// `C x H x W` planar tensor of values in `[0, 1]`. The first three channels
/// are R, G, B; the rest are probability maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedTensor {
    channel_names: Vec<String>,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FusedTensor {
    pub fn new(
        channel_names: Vec<String>,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if channel_names.len() < 3 || channel_names[..3].iter().map(String::as_str).ne(RGB_NAMES) {
            return Err(Error::Input(
                "fused tensor channels must start with R, G, B".into(),
            ));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = channel_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Input(format!("duplicate channel name {dup:?}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "tensor dimensions must be positive, got {height}x{width}"
            )));
        }
        let expected = channel_names
            .len()
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::Shape("tensor size overflows".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for a {}x{height}x{width} tensor",
                data.len(),
                channel_names.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("tensor value {v} outside [0, 1]")));
        }
        Ok(Self {
            channel_names,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_by_name(&self, name: &str) -> Option<&[f32]> {
        self.channel_names
            .iter()
            .position(|n| n == name)
            .map(|c| self.channel(c))
    }
}

/// Stacks `image` (scaled by 1/255) with the maps named in
/// `mapping.channel_order`. Classes without a map get an all-zero channel;
/// maps for classes outside the mapping are ignored.
pub fn build_fused(
    image: &RgbImage,
    maps: &[(String, ProbabilityMap<f32>)],
    mapping: &ContextMapping,
) -> Result<FusedTensor> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut seen = HashSet::new();
    for (name, map) in maps {
        if !seen.insert(name.as_str()) {
            return Err(Error::Input(format!(
                "two maps supplied for class {name:?}"
            )));
        }
        if (map.width(), map.height()) != (w, h) {
            return Err(Error::Shape(format!(
                "map for {name:?} is {}x{}, image is {w}x{h}",
                map.width(),
                map.height()
            )));
        }
    }

    let plane = w * h;
    let channels = 3 + mapping.channel_order.len();
    let mut data = vec![0f32; channels * plane];
    for (i, px) in image.pixels().enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px.0[c] as f32 / 255.0;
        }
    }
    for (k, class) in mapping.channel_order.iter().enumerate() {
        if let Some((_, map)) = maps.iter().find(|(n, _)| n == class) {
            let dst = &mut data[(3 + k) * plane..(4 + k) * plane];
            dst.copy_from_slice(map.values());
        }
    }

    let names = RGB_NAMES
        .iter()
        .map(|s| s.to_string())
        .chain(mapping.channel_order.iter().cloned())
        .collect();
    FusedTensor::new(names, h, w, data)
}
