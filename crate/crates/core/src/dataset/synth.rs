//! Deterministic walking trajectories: geodesic path, corner cutting and a
//! trapezoidal speed profile.

use super::DatasetError;
use crate::geodesic::distance_field;
use crate::scene::{Pixel, Scene};
use crate::trajectory::{Sample, Trajectory};

pub const SAMPLE_RATE_HZ: f64 = 10.0;
pub const DEFAULT_SPEED_MPS: f64 = 1.2;
/// Time to accelerate from rest to cruise speed, and to stop again.
pub const RAMP_S: f64 = 0.5;
pub const SMOOTHING_PASSES: usize = 3;

/// Walkable cells 8-adjacent to the object's mask and outside it.
pub fn goal_cells(scene: &Scene, label: &str) -> Result<Vec<Pixel>, DatasetError> {
    let obj = scene
        .object(label)
        .ok_or_else(|| DatasetError::UnknownObject(label.to_string()))?;
    let geom = scene.geometry();
    let mut in_mask = vec![false; geom.cell_count()];
    for p in &obj.mask {
        in_mask[geom.index(*p)] = true;
    }
    let mut seen = vec![false; geom.cell_count()];
    let mut out = Vec::new();
    for p in &obj.mask {
        let (r, c) = (p.row as i64, p.col as i64);
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= geom.height_px as i64 || nc >= geom.width_px as i64 {
                    continue;
                }
                let q = Pixel::new(nr as usize, nc as usize);
                let i = geom.index(q);
                if !in_mask[i] && !seen[i] && scene.map.is_walkable(q) {
                    seen[i] = true;
                    out.push(q);
                }
            }
        }
    }
    out.sort_by_key(|p| geom.index(*p));
    Ok(out)
}

/// One pass of `p_i <- (p_{i-1} + 2 p_i + p_{i+1}) / 4`, endpoints fixed.
fn cut_corners(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let n = points.len();
    if n < 3 {
        return points.to_vec();
    }
    let mut out = points.to_vec();
    for i in 1..n - 1 {
        let (a, b, c) = (points[i - 1], points[i], points[i + 1]);
        out[i] = ((a.0 + 2.0 * b.0 + c.0) / 4.0, (a.1 + 2.0 * b.1 + c.1) / 4.0);
    }
    out
}

/// Trapezoidal (or, for short paths, triangular) speed profile.
struct Profile {
    length: f64,
    speed: f64,
    accel: f64,
    ramp: f64,
    total: f64,
}

impl Profile {
    fn new(length: f64, speed: f64) -> Self {
        let accel = speed / RAMP_S;
        if length >= speed * speed / accel {
            let ramp = speed / accel;
            Profile {
                length,
                speed,
                accel,
                ramp,
                total: ramp + length / speed,
            }
        } else {
            let peak = (accel * length).sqrt();
            let ramp = peak / accel;
            Profile {
                length,
                speed: peak,
                accel,
                ramp,
                total: 2.0 * ramp,
            }
        }
    }

    fn distance_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.total);
        let s = if t < self.ramp {
            0.5 * self.accel * t * t
        } else if t <= self.total - self.ramp {
            0.5 * self.accel * self.ramp * self.ramp + self.speed * (t - self.ramp)
        } else {
            let rem = self.total - t;
            self.length - 0.5 * self.accel * rem * rem
        };
        s.clamp(0.0, self.length)
    }
}

fn point_at(points: &[(f64, f64)], cum: &[f64], s: f64) -> (f64, f64) {
    let i = cum.partition_point(|&c| c <= s).clamp(1, points.len() - 1);
    let (a, b) = (points[i - 1], points[i]);
    let seg = cum[i] - cum[i - 1];
    let f = if seg > 0.0 { ((s - cum[i - 1]) / seg).clamp(0.0, 1.0) } else { 1.0 };
    (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
}

/// Walks from `start` (meters) to the nearest walkable cell next to `goal`.
pub fn synthesize_trajectory(scene: &Scene, start: [f64; 2], goal: &str, speed_mps: f64) -> Result<Trajectory, DatasetError> {
    if !(speed_mps.is_finite() && speed_mps > 0.0) {
        return Err(DatasetError::Precondition(format!("speed must be positive, got {speed_mps}")));
    }
    let geom = *scene.geometry();
    let targets = goal_cells(scene, goal)?;
    let src = scene.map.nearest_walkable(geom.world_to_pixel(start[0], start[1]));
    let field = distance_field(&scene.map, src);
    let target = targets
        .iter()
        .filter_map(|p| field.steps(*p).map(|d| (d, geom.index(*p), *p)))
        .min()
        .map(|(_, _, p)| p)
        .ok_or_else(|| DatasetError::Unreachable(goal.to_string()))?;
    let path = field.path_to(target).expect("target is reachable");

    let mut points: Vec<(f64, f64)> = path.iter().map(|p| geom.pixel_to_world(*p)).collect();
    for _ in 0..SMOOTHING_PASSES {
        points = cut_corners(&points);
    }
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let length = *cum.last().unwrap();
    let dt = 1.0 / SAMPLE_RATE_HZ;
    if length == 0.0 {
        let (x, y) = points[0];
        return Ok(Trajectory::new(vec![Sample::new(0.0, x, y), Sample::new(dt, x, y)])?);
    }

    let profile = Profile::new(length, speed_mps);
    let mut times: Vec<f64> = (0..)
        .map(|i| i as f64 / SAMPLE_RATE_HZ)
        .take_while(|t| *t < profile.total - 1e-6)
        .collect();
    times.push(profile.total);
    let samples = times
        .iter()
        .map(|&t| {
            let (x, y) = point_at(&points, &cum, profile.distance_at(t));
            let px = geom.world_to_pixel(x, y);
            if scene.map.is_walkable(px) {
                Sample::new(t, x, y)
            } else {
                let (x, y) = geom.pixel_to_world(scene.map.nearest_walkable(px));
                Sample::new(t, x, y)
            }
        })
        .collect();
    Ok(Trajectory::new(samples)?)
}

/// True when `p` is 8-adjacent to, but outside, the mask of `label`.
pub fn is_goal_adjacent(scene: &Scene, label: &str, p: Pixel) -> bool {
    scene.object(label).is_some_and(|o| {
        !o.mask.contains(&p) && (o.mask.iter().any(|m| m.row.abs_diff(p.row) <= 1 && m.col.abs_diff(p.col) <= 1))
    })
}
