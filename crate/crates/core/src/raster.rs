//! 181-channel trajectory raster consumed by the U-Net goal predictor.
//!
//! Layout: channels `[0, 90)` hold position splats (oldest to newest),
//! `[90, 180)` hold heading splats placed at a look-ahead point along each
//! heading, and channel 180 is the binary walkable map.

use crate::scene::{GridGeometry, Pixel, SceneMap};
use crate::trajectory::{Trajectory, TrajectoryError};

pub const EPOCHS: usize = 90;
pub const CHANNELS: usize = 2 * EPOCHS + 1;
pub const MAP_CHANNEL: usize = 2 * EPOCHS;
pub const DEFAULT_SIGMA_PX: f64 = 3.0;
/// Distance of the heading splat ahead of the position.
pub const HEADING_LOOKAHEAD_M: f64 = 0.3;
/// Splats are cut off beyond this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RasterStack {
    pub geometry: GridGeometry,
    /// `CHANNELS x H x W`, row-major.
    pub data: Vec<f32>,
}

impl RasterStack {
    pub fn zeros(geometry: GridGeometry) -> Self {
        RasterStack {
            data: vec![0.0; CHANNELS * geometry.cell_count()],
            geometry,
        }
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        let n = self.geometry.cell_count();
        &self.data[k * n..(k + 1) * n]
    }

    fn channel_mut(&mut self, k: usize) -> &mut [f32] {
        let n = self.geometry.cell_count();
        &mut self.data[k * n..(k + 1) * n]
    }

    /// Row-major index of the first maximum in channel `k`.
    pub fn argmax(&self, k: usize) -> Pixel {
        let ch = self.channel(k);
        let mut best = 0;
        for (i, &v) in ch.iter().enumerate() {
            if v > ch[best] {
                best = i;
            }
        }
        self.geometry.pixel(best)
    }
}

/// Adds an unnormalized isotropic Gaussian (peak 1.0 at `center`) truncated
/// at `TRUNCATION_SIGMAS * sigma_px`. Overlapping splats take the maximum.
pub fn splat_gaussian(channel: &mut [f32], geom: &GridGeometry, center: Pixel, sigma_px: f64) {
    let cutoff = TRUNCATION_SIGMAS * sigma_px;
    let reach = cutoff.floor() as i64;
    let inv = 1.0 / (2.0 * sigma_px * sigma_px);
    let (h, w) = (geom.height_px as i64, geom.width_px as i64);
    for dr in -reach..=reach {
        let r = center.row as i64 + dr;
        if r < 0 || r >= h {
            continue;
        }
        for dc in -reach..=reach {
            let c = center.col as i64 + dc;
            if c < 0 || c >= w {
                continue;
            }
            let d2 = (dr * dr + dc * dc) as f64;
            if d2 > cutoff * cutoff {
                continue;
            }
            let v = (-d2 * inv).exp() as f32;
            let slot = &mut channel[(r * w + c) as usize];
            if v > *slot {
                *slot = v;
            }
        }
    }
}

/// Rasterizes a 90-epoch trajectory over `map`.
pub fn rasterize(traj: &Trajectory, map: &SceneMap, sigma_px: f64) -> Result<RasterStack, TrajectoryError> {
    if traj.len() != EPOCHS {
        return Err(TrajectoryError::EpochCount {
            expected: EPOCHS,
            found: traj.len(),
        });
    }
    let geom = *map.geometry();
    let mut stack = RasterStack::zeros(geom);
    let headings = traj.headings();
    for (k, (s, heading)) in traj.samples().iter().zip(&headings).enumerate() {
        let at = geom.world_to_pixel(s.x, s.y);
        splat_gaussian(stack.channel_mut(k), &geom, at, sigma_px);
        let ahead = geom.world_to_pixel(
            s.x + HEADING_LOOKAHEAD_M * heading.cos(),
            s.y + HEADING_LOOKAHEAD_M * heading.sin(),
        );
        splat_gaussian(stack.channel_mut(EPOCHS + k), &geom, ahead, sigma_px);
    }
    for (dst, &src) in stack.channel_mut(MAP_CHANNEL).iter_mut().zip(map.cells()) {
        *dst = src as f32;
    }
    Ok(stack)
}
