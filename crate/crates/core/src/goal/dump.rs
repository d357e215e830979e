//! File formats shared with the training tools.
//!
//! Heatmaps are dumped as `TRLH`: the magic, then u32 height, u32 width and a
//! reserved u32 (zero), followed by `height * width` float32 values in
//! row-major order. Everything is little-endian.
//!
//! Raster stacks travel as a `TRLW` container holding a single tensor named
//! [`STACK_TENSOR`] with dims `[181, H, W]`.

use std::fs;
use std::path::Path;

use super::weights::{Tensor, WeightContainer, WeightsError};
use crate::raster::{RasterStack, CHANNELS};
use crate::scene::{GridGeometry, Heatmap};

pub const HEATMAP_MAGIC: &[u8; 4] = b"TRLH";
pub const HEATMAP_HEADER_LEN: usize = 16;
pub const STACK_TENSOR: &str = "input";

fn io_err(path: &Path, source: std::io::Error) -> WeightsError {
    WeightsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn heatmap_to_bytes(heatmap: &Heatmap) -> Vec<u8> {
    let g = &heatmap.geometry;
    let mut out = Vec::with_capacity(HEATMAP_HEADER_LEN + 4 * heatmap.values.len());
    out.extend_from_slice(HEATMAP_MAGIC);
    out.extend_from_slice(&(g.height_px as u32).to_le_bytes());
    out.extend_from_slice(&(g.width_px as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &v in &heatmap.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses a `TRLH` dump. The file carries no physical extent, so the caller
/// supplies it.
pub fn heatmap_from_bytes(bytes: &[u8], extent_m: f64) -> Result<Heatmap, WeightsError> {
    if bytes.len() < HEATMAP_HEADER_LEN {
        return Err(WeightsError::Length(format!(
            "heatmap header needs {HEATMAP_HEADER_LEN} bytes, have {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != HEATMAP_MAGIC {
        return Err(WeightsError::Format(format!(
            "bad magic {:?}, expected \"TRLH\"",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let word = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]) as usize;
    let (h, w) = (word(4), word(8));
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEATMAP_HEADER_LEN))
        .ok_or_else(|| WeightsError::Length(format!("heatmap dims {h}x{w} overflow")))?;
    if bytes.len() != expected {
        return Err(WeightsError::Length(format!(
            "{h}x{w} heatmap needs {expected} bytes, have {}",
            bytes.len()
        )));
    }
    let geometry = GridGeometry::new(w, h, extent_m).map_err(|e| WeightsError::Format(e.to_string()))?;
    let values = bytes[HEATMAP_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Heatmap::from_values(geometry, values).map_err(|e| WeightsError::Format(e.to_string()))
}

pub fn save_heatmap(heatmap: &Heatmap, path: &Path) -> Result<(), WeightsError> {
    fs::write(path, heatmap_to_bytes(heatmap)).map_err(|e| io_err(path, e))
}

pub fn load_heatmap(path: &Path, extent_m: f64) -> Result<Heatmap, WeightsError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    heatmap_from_bytes(&bytes, extent_m)
}

pub fn stack_to_container(stack: &RasterStack) -> WeightContainer {
    let g = &stack.geometry;
    let tensor = Tensor::new(STACK_TENSOR, vec![CHANNELS, g.height_px, g.width_px], stack.data.clone())
        .expect("stack data matches its geometry");
    WeightContainer::new(vec![tensor]).expect("single tensor")
}

pub fn stack_from_container(weights: &WeightContainer, extent_m: f64) -> Result<RasterStack, WeightsError> {
    let t = weights
        .get(STACK_TENSOR)
        .ok_or_else(|| WeightsError::MissingTensor(STACK_TENSOR.into()))?;
    if t.dims.len() != 3 || t.dims[0] != CHANNELS {
        return Err(WeightsError::Shape {
            name: STACK_TENSOR.into(),
            expected: vec![CHANNELS, 0, 0],
            found: t.dims.clone(),
        });
    }
    let geometry =
        GridGeometry::new(t.dims[2], t.dims[1], extent_m).map_err(|e| WeightsError::Format(e.to_string()))?;
    Ok(RasterStack {
        geometry,
        data: t.data.clone(),
    })
}
