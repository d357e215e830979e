//! Path-efficiency goal model.
//!
//! A walker heading to goal `g` rarely detours, so the observed path length
//! `L` plus the remaining geodesic `D(c, g)` should be close to the direct
//! geodesic `D(s, g)`. Each walkable cell scores
//! `exp(-beta * max(0, L + D(c, g) - D(s, g)))`.

use thiserror::Error;

use crate::geodesic::distance_field;
use crate::scene::{Heatmap, Pixel, Scene};
use crate::trajectory::Trajectory;

pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeometricError {
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("degenerate input: current cell ({}, {}) is unreachable from start cell ({}, {})", .current.row, .current.col, .start.row, .start.col)]
    Disconnected { start: Pixel, current: Pixel },
}

/// Start and current cells of a trajectory, snapped to the nearest walkable
/// cell.
pub fn anchor_cells(scene: &Scene, traj: &Trajectory) -> (Pixel, Pixel) {
    let geom = scene.geometry();
    let (s, c) = (traj.first(), traj.last());
    let start = scene.map.nearest_walkable(geom.world_to_pixel(s.x, s.y));
    let current = scene.map.nearest_walkable(geom.world_to_pixel(c.x, c.y));
    (start, current)
}

pub fn geometric_predict(scene: &Scene, traj: &Trajectory, beta: f64) -> Result<Heatmap, GeometricError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(GeometricError::InvalidBeta(beta));
    }
    let (start, current) = anchor_cells(scene, traj);
    let from_start = distance_field(&scene.map, start);
    if from_start.steps(current).is_none() {
        return Err(GeometricError::Disconnected { start, current });
    }
    let from_current = distance_field(&scene.map, current);
    let observed = traj.progress_distance();
    let geom = *scene.geometry();
    let mut heat = Heatmap::zeros(geom);
    for (i, v) in heat.values.iter_mut().enumerate() {
        let g = geom.pixel(i);
        if let (Some(ds), Some(dc)) = (from_start.meters(g), from_current.meters(g)) {
            let detour = (observed + dc - ds).max(0.0);
            *v = (-beta * detour).exp();
        }
    }
    Ok(heat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{GridGeometry, ObjectRegion, SceneMap};
    use crate::trajectory::Sample;

    /// One-pixel-high corridor at 1 m pitch.
    fn corridor() -> Scene {
        let g = GridGeometry::square(40, 40.0).unwrap();
        let mut cells = vec![0u8; g.cell_count()];
        for c in 0..40 {
            cells[g.index(Pixel::new(20, c))] = 1;
        }
        let map = SceneMap::new(g, cells).unwrap();
        let obj = ObjectRegion::new("end", vec![Pixel::new(20, 39)], [0; 3]);
        Scene::new("corridor", map, vec![obj]).unwrap()
    }

    #[test]
    fn zero_progress_is_flat_over_reachable_cells() {
        let scene = corridor();
        let p = scene.geometry().pixel_to_world(Pixel::new(20, 10));
        let t = Trajectory::new(vec![Sample::new(0.0, p.0, p.1), Sample::new(1.0, p.0, p.1)]).unwrap();
        let h = geometric_predict(&scene, &t, 1.0).unwrap();
        for c in 0..40 {
            assert_eq!(h.get(Pixel::new(20, c)), 1.0);
        }
        assert_eq!(h.get(Pixel::new(0, 0)), 0.0);
    }

    #[test]
    fn beta_must_be_positive() {
        let scene = corridor();
        let t = Trajectory::new(vec![Sample::new(0.0, 1.0, 20.0), Sample::new(1.0, 2.0, 20.0)]).unwrap();
        assert_eq!(geometric_predict(&scene, &t, 0.0), Err(GeometricError::InvalidBeta(0.0)));
    }
}
