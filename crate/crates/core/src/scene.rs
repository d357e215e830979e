//! Scene geometry: walkable grids, labeled object masks and the world/pixel mapping.
//!
//! World frame: `x` runs along columns, `y` along rows, and the world origin sits
//! on pixel `(0, 0)`. Points outside the extent clamp to the border pixel.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default grid: 256 x 256 pixels covering 10 m x 10 m.
pub const DEFAULT_WIDTH_PX: usize = 256;
pub const DEFAULT_EXTENT_M: f64 = 10.0;

/// Grayscale values at or above this threshold are walkable.
pub const WALKABLE_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene descriptor: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("invalid field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("duplicate object label `{0}`")]
    DuplicateLabel(String),
    #[error("object `{label}` has mask pixel index {index} outside the {width}x{height} grid")]
    MaskOutOfBounds {
        label: String,
        index: usize,
        width: usize,
        height: usize,
    },
    #[error("object `{0}` has an empty mask")]
    EmptyMask(String),
    #[error("scene map has no walkable cell")]
    NoWalkable,
    #[error("scene has no objects")]
    NoObjects,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: String, found: String },
}

impl SceneError {
    fn field(field: &str, reason: impl Into<String>) -> Self {
        SceneError::Field {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        SceneError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A `(row, col)` grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub const fn new(row: usize, col: usize) -> Self {
        Pixel { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width_px: usize,
    pub height_px: usize,
    pub extent_m: f64,
}

impl Default for GridGeometry {
    fn default() -> Self {
        GridGeometry {
            width_px: DEFAULT_WIDTH_PX,
            height_px: DEFAULT_WIDTH_PX,
            extent_m: DEFAULT_EXTENT_M,
        }
    }
}

impl GridGeometry {
    pub fn new(width_px: usize, height_px: usize, extent_m: f64) -> Result<Self, SceneError> {
        let geom = GridGeometry {
            width_px,
            height_px,
            extent_m,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Square grid of `side_px` pixels covering `extent_m` meters.
    pub fn square(side_px: usize, extent_m: f64) -> Result<Self, SceneError> {
        Self::new(side_px, side_px, extent_m)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.width_px == 0 {
            return Err(SceneError::field("geometry.width_px", "must be positive"));
        }
        if self.width_px != self.height_px {
            return Err(SceneError::field(
                "geometry.height_px",
                format!("grid must be square, got {}x{}", self.width_px, self.height_px),
            ));
        }
        if !(self.extent_m.is_finite() && self.extent_m > 0.0) {
            return Err(SceneError::field("geometry.extent_m", "must be a positive number"));
        }
        Ok(())
    }

    /// Meters per pixel.
    pub fn pitch(&self) -> f64 {
        self.extent_m / self.width_px as f64
    }

    pub fn cell_count(&self) -> usize {
        self.width_px * self.height_px
    }

    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.row < self.height_px && p.col < self.width_px
    }

    pub fn index(&self, p: Pixel) -> usize {
        p.row * self.width_px + p.col
    }

    pub fn pixel(&self, index: usize) -> Pixel {
        Pixel::new(index / self.width_px, index % self.width_px)
    }

    /// Maps a world point (meters) to its pixel. `(0, 0)` lands on pixel
    /// `(0, 0)` and `(extent, extent)` on `(H-1, W-1)`; outside points clamp.
    pub fn world_to_pixel(&self, x: f64, y: f64) -> Pixel {
        let axis = |v: f64, n: usize| -> usize {
            let last = (n - 1) as f64;
            let scaled = (v / self.extent_m * last).floor();
            if scaled.is_nan() || scaled <= 0.0 {
                0
            } else if scaled >= last {
                n - 1
            } else {
                scaled as usize
            }
        };
        Pixel::new(axis(y, self.height_px), axis(x, self.width_px))
    }

    /// World coordinates of the center of a pixel's cell under
    /// [`GridGeometry::world_to_pixel`], clamped to the extent.
    pub fn pixel_to_world(&self, p: Pixel) -> (f64, f64) {
        let axis = |i: usize, n: usize| -> f64 {
            if n == 1 {
                return 0.5 * self.extent_m;
            }
            let step = self.extent_m / (n - 1) as f64;
            ((i as f64 + 0.5) * step).min(self.extent_m)
        };
        (axis(p.col, self.width_px), axis(p.row, self.height_px))
    }
}

/// Binary walkable grid: 1 = walkable, 0 = obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMap {
    geometry: GridGeometry,
    walkable: Vec<u8>,
}

impl SceneMap {
    pub fn new(geometry: GridGeometry, walkable: Vec<u8>) -> Result<Self, SceneError> {
        geometry.validate()?;
        if walkable.len() != geometry.cell_count() {
            return Err(SceneError::Dimension {
                expected: format!("{} cells", geometry.cell_count()),
                found: format!("{} cells", walkable.len()),
            });
        }
        if let Some(v) = walkable.iter().find(|&&v| v > 1) {
            return Err(SceneError::field("walkable", format!("cell value {v} is not binary")));
        }
        if !walkable.contains(&1) {
            return Err(SceneError::NoWalkable);
        }
        Ok(SceneMap { geometry, walkable })
    }

    /// Every cell walkable.
    pub fn open(geometry: GridGeometry) -> Result<Self, SceneError> {
        let n = geometry.cell_count();
        Self::new(geometry, vec![1; n])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn cells(&self) -> &[u8] {
        &self.walkable
    }

    pub fn is_walkable(&self, p: Pixel) -> bool {
        self.geometry.in_bounds(p) && self.walkable[self.geometry.index(p)] == 1
    }

    pub fn walkable_count(&self) -> usize {
        self.walkable.iter().filter(|&&v| v == 1).count()
    }

    /// Nearest walkable cell to `p` by squared pixel distance; ties resolve to
    /// the lowest row-major index.
    pub fn nearest_walkable(&self, p: Pixel) -> Pixel {
        if self.is_walkable(p) {
            return p;
        }
        let (r0, c0) = (p.row as i64, p.col as i64);
        let mut best: Option<(i64, usize)> = None;
        for (i, &v) in self.walkable.iter().enumerate() {
            if v != 1 {
                continue;
            }
            let q = self.geometry.pixel(i);
            let (dr, dc) = (q.row as i64 - r0, q.col as i64 - c0);
            let d = dr * dr + dc * dc;
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        // Construction guarantees at least one walkable cell.
        self.geometry.pixel(best.expect("walkable cell").1)
    }

    /// Decodes an 8-bit grayscale PNG; values >= 128 are walkable.
    pub fn from_png(path: &Path, geometry: GridGeometry) -> Result<Self, SceneError> {
        let img = image::open(path)?.to_luma8();
        if img.width() as usize != geometry.width_px || img.height() as usize != geometry.height_px {
            return Err(SceneError::Dimension {
                expected: format!("{}x{} walkable image", geometry.width_px, geometry.height_px),
                found: format!("{}x{}", img.width(), img.height()),
            });
        }
        let cells = img
            .as_raw()
            .iter()
            .map(|&v| u8::from(v >= WALKABLE_THRESHOLD))
            .collect();
        Self::new(geometry, cells)
    }

    pub fn write_png(&self, path: &Path) -> Result<(), SceneError> {
        let g = &self.geometry;
        let pixels: Vec<u8> = self.walkable.iter().map(|&v| if v == 1 { 255 } else { 0 }).collect();
        let img = image::GrayImage::from_raw(g.width_px as u32, g.height_px as u32, pixels)
            .expect("buffer matches geometry");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRegion {
    pub label: String,
    /// Sorted, deduplicated pixels.
    pub mask: Vec<Pixel>,
    pub display_color: [u8; 3],
}

impl ObjectRegion {
    pub fn new(label: impl Into<String>, mut mask: Vec<Pixel>, display_color: [u8; 3]) -> Self {
        mask.sort_unstable();
        mask.dedup();
        ObjectRegion {
            label: label.into(),
            mask,
            display_color,
        }
    }

    pub fn area(&self) -> usize {
        self.mask.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub map: SceneMap,
    pub objects: Vec<ObjectRegion>,
}

impl Scene {
    pub fn new(name: impl Into<String>, map: SceneMap, objects: Vec<ObjectRegion>) -> Result<Self, SceneError> {
        if objects.is_empty() {
            return Err(SceneError::NoObjects);
        }
        let geom = *map.geometry();
        let mut seen = HashSet::new();
        for obj in &objects {
            if !seen.insert(obj.label.as_str()) {
                return Err(SceneError::DuplicateLabel(obj.label.clone()));
            }
            if obj.mask.is_empty() {
                return Err(SceneError::EmptyMask(obj.label.clone()));
            }
            if let Some(p) = obj.mask.iter().find(|p| !geom.in_bounds(**p)) {
                return Err(SceneError::MaskOutOfBounds {
                    label: obj.label.clone(),
                    index: p.row * geom.width_px + p.col,
                    width: geom.width_px,
                    height: geom.height_px,
                });
            }
        }
        Ok(Scene {
            name: name.into(),
            map,
            objects,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.map.geometry()
    }

    pub fn labels(&self) -> Vec<String> {
        self.objects.iter().map(|o| o.label.clone()).collect()
    }

    pub fn object(&self, label: &str) -> Option<&ObjectRegion> {
        self.objects.iter().find(|o| o.label == label)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.object(label).is_some()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub name: String,
    pub geometry: GridGeometry,
    pub walkable_png: String,
    pub objects: Vec<ObjectDescriptor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    pub label: String,
    pub color_rgb: [u8; 3],
    pub mask_rle: Vec<usize>,
}

/// Run-length encodes sorted row-major indices as `[start, len, start, len, ...]`.
pub fn encode_mask_rle(indices: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut iter = indices.iter().copied();
    let Some(first) = iter.next() else {
        return out;
    };
    let (mut start, mut len) = (first, 1usize);
    for i in iter {
        if i == start + len {
            len += 1;
        } else {
            out.extend([start, len]);
            start = i;
            len = 1;
        }
    }
    out.extend([start, len]);
    out
}

pub fn decode_mask_rle(label: &str, rle: &[usize], geom: &GridGeometry) -> Result<Vec<Pixel>, SceneError> {
    if !rle.len().is_multiple_of(2) {
        return Err(SceneError::field(
            &format!("objects[{label}].mask_rle"),
            "odd number of entries; expected start/length pairs",
        ));
    }
    let cells = geom.cell_count();
    let mut out = Vec::new();
    for pair in rle.chunks_exact(2) {
        let (start, len) = (pair[0], pair[1]);
        for index in start..start.saturating_add(len) {
            if index >= cells {
                return Err(SceneError::MaskOutOfBounds {
                    label: label.to_string(),
                    index,
                    width: geom.width_px,
                    height: geom.height_px,
                });
            }
            out.push(geom.pixel(index));
        }
    }
    Ok(out)
}

/// Reads a scene descriptor and the walkable PNG it references.
pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = fs::read_to_string(path).map_err(|e| SceneError::io(path, e))?;
    let desc: SceneDescriptor = serde_json::from_str(&text)?;
    desc.geometry.validate()?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let png = base.join(&desc.walkable_png);
    if !png.is_file() {
        return Err(SceneError::field(
            "walkable_png",
            format!("{} does not exist", png.display()),
        ));
    }
    let map = SceneMap::from_png(&png, desc.geometry)?;
    let mut objects = Vec::with_capacity(desc.objects.len());
    for obj in &desc.objects {
        let mask = decode_mask_rle(&obj.label, &obj.mask_rle, &desc.geometry)?;
        if mask.is_empty() {
            return Err(SceneError::EmptyMask(obj.label.clone()));
        }
        objects.push(ObjectRegion::new(obj.label.clone(), mask, obj.color_rgb));
    }
    Scene::new(desc.name, map, objects)
}

/// Writes `<stem>.json` and `<stem>.png` side by side. The descriptor references
/// the PNG by file name.
pub fn save_scene(scene: &Scene, json_path: &Path) -> Result<(), SceneError> {
    let png_path = json_path.with_extension("png");
    let png_name = png_path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| SceneError::field("walkable_png", "non UTF-8 file name"))?
        .to_string();
    scene.map.write_png(&png_path)?;
    let geom = *scene.geometry();
    let desc = SceneDescriptor {
        name: scene.name.clone(),
        geometry: geom,
        walkable_png: png_name,
        objects: scene
            .objects
            .iter()
            .map(|o| {
                let idx: Vec<usize> = o.mask.iter().map(|p| geom.index(*p)).collect();
                ObjectDescriptor {
                    label: o.label.clone(),
                    color_rgb: o.display_color,
                    mask_rle: encode_mask_rle(&idx),
                }
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&desc)?;
    text.push('\n');
    fs::write(json_path, text).map_err(|e| SceneError::io(json_path, e))
}

/// Non-negative field over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(geometry: GridGeometry) -> Self {
        Heatmap {
            values: vec![0.0; geometry.cell_count()],
            geometry,
        }
    }

    pub fn filled(geometry: GridGeometry, value: f64) -> Self {
        Heatmap {
            values: vec![value; geometry.cell_count()],
            geometry,
        }
    }

    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self, SceneError> {
        if values.len() != geometry.cell_count() {
            return Err(SceneError::Dimension {
                expected: format!("{} values", geometry.cell_count()),
                found: format!("{}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SceneError::field("heatmap", "values must be finite and non-negative"));
        }
        Ok(Heatmap { geometry, values })
    }

    pub fn get(&self, p: Pixel) -> f64 {
        self.values[self.geometry.index(p)]
    }

    pub fn set(&mut self, p: Pixel, v: f64) {
        let i = self.geometry.index(p);
        self.values[i] = v;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Heatmap {
        Heatmap {
            geometry: self.geometry,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Sum of heatmap values over the region's mask.
pub fn object_overlap_mass(heatmap: &Heatmap, region: &ObjectRegion) -> Result<f64, SceneError> {
    let geom = &heatmap.geometry;
    if let Some(p) = region.mask.iter().find(|p| !geom.in_bounds(**p)) {
        return Err(SceneError::Dimension {
            expected: format!("pixels within {}x{}", geom.width_px, geom.height_px),
            found: format!("pixel ({}, {}) of `{}`", p.row, p.col, region.label),
        });
    }
    Ok(region.mask.iter().map(|p| heatmap.get(*p)).sum())
}
