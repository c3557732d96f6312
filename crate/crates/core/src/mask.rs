//! Binary context masks and their PNG representation.
//!
//! Cells are addressed as `(x, y)` with `x` the column and `y` the row, and
//! stored row-major. A mask PNG is single-channel 8-bit: `0` is background,
//! any value `>= 128` is a set cell. Masks are written back as `0` / `255`.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// Pixel values at or above this threshold read as set cells.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
    class_name: String,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: usize, height: usize, class_name: impl Into<String>) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            cells: vec![false; width * height],
            class_name: class_name.into(),
        })
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        cells: Vec<bool>,
        class_name: impl Into<String>,
    ) -> Result<Self> {
        check_dims(width, height)?;
        if cells.len() != width * height {
            return Err(Error::Shape(format!(
                "{} cells for a {width}x{height} mask",
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            cells,
            class_name: class_name.into(),
        })
    }

    /// Builds a mask from a closure evaluated at every cell.
    pub fn from_fn(
        width: usize,
        height: usize,
        class_name: impl Into<String>,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                cells.push(f(x, y));
            }
        }
        Self::from_cells(width, height, cells, class_name)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn with_class_name(mut self, class_name: impl Into<String>) -> Self {
        self.class_name = class_name.into();
        self
    }

    /// Row-major cell values.
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.cells[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// True when no cell is set.
    pub fn is_blank(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    /// Coordinates `(x, y)` of the set cells in row-major order.
    pub fn set_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| (i % w, i / w))
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Shape(format!(
            "mask dimensions must be positive, got {width}x{height}"
        )));
    }
    if width > u32::MAX as usize || height > u32::MAX as usize {
        return Err(Error::Shape(format!("mask {width}x{height} is too large")));
    }
    Ok(())
}

/// Reads a single-channel 8-bit PNG mask. The class name is taken from the
/// file stem.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(ImageFormat::Png) {
        return Err(Error::UnsupportedFormat(format!(
            "{} is not a PNG file",
            path.display()
        )));
    }
    let gray = match reader.decode()? {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: expected 8-bit grayscale, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let class_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (w, h) = gray.dimensions();
    let cells = gray
        .into_raw()
        .into_iter()
        .map(|v| v >= MASK_THRESHOLD)
        .collect();
    BinaryMask::from_cells(w as usize, h as usize, cells, class_name)
}

/// Writes `mask` as an 8-bit grayscale PNG with values 0 and 255.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes = mask
        .cells
        .iter()
        .map(|&c| if c { 255 } else { 0 })
        .collect();
    let img = GrayImage::from_raw(mask.width as u32, mask.height as u32, bytes)
        .expect("buffer length matches mask dimensions");
    save_png(&DynamicImage::ImageLuma8(img), path.as_ref())
}

pub(crate) fn save_png(img: &DynamicImage, path: &Path) -> Result<()> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)?;
    std::fs::write(path, buf.into_inner()).map_err(|e| Error::io(path, e))
}
