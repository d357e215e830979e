//! PNG composite of a prediction: floor plan, target-area heatmap,
//! trajectory and objects colored by probability rank.

use std::path::Path;

use image::{imageops, Rgba, RgbaImage};

use crate::probs::ObjectProbabilityMap;
use crate::scene::{Heatmap, Pixel, Scene, SceneError};
use crate::trajectory::Trajectory;

const WALKABLE: [u8; 3] = [225, 225, 225];
const BLOCKED: [u8; 3] = [60, 60, 60];
const HEAT: [u8; 3] = [255, 230, 0];
const HEAT_MAX_ALPHA: f64 = 0.75;
const PATH: [u8; 3] = [0, 150, 0];
const START: [u8; 3] = [230, 0, 0];
const CURRENT: [u8; 3] = [0, 255, 0];
const DOT_RADIUS: i64 = 3;

/// Blue (least likely) to red (most likely). Tied probabilities share the
/// mean of their ranks, so a uniform map paints every object mid-scale.
pub fn rank_colors(probs: &ObjectProbabilityMap) -> Vec<(String, [u8; 3])> {
    let ranked = probs.ranked();
    let n = ranked.len();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ranked[j + 1].1 == ranked[i].1 {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0;
        let t = if n > 1 { 1.0 - mean_rank / (n - 1) as f64 } else { 0.5 };
        let color = [(255.0 * t).round() as u8, 0, (255.0 * (1.0 - t)).round() as u8];
        for (label, _) in &ranked[i..=j] {
            out.push((label.to_string(), color));
        }
        i = j + 1;
    }
    out
}

fn blend(dst: &mut Rgba<u8>, src: [u8; 3], alpha: f64) {
    for k in 0..3 {
        let v = dst[k] as f64 * (1.0 - alpha) + src[k] as f64 * alpha;
        dst[k] = v.round() as u8;
    }
}

fn put(img: &mut RgbaImage, r: i64, c: i64, color: [u8; 3]) {
    if r >= 0 && c >= 0 && (r as u32) < img.height() && (c as u32) < img.width() {
        img.put_pixel(c as u32, r as u32, Rgba([color[0], color[1], color[2], 255]));
    }
}

fn line(img: &mut RgbaImage, a: Pixel, b: Pixel, color: [u8; 3]) {
    let (mut r, mut c) = (a.row as i64, a.col as i64);
    let (r1, c1) = (b.row as i64, b.col as i64);
    let (dr, dc) = ((r1 - r).abs(), -(c1 - c).abs());
    let (sr, sc) = (if r < r1 { 1 } else { -1 }, if c < c1 { 1 } else { -1 });
    let mut err = dr + dc;
    loop {
        put(img, r, c, color);
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
}

fn dot(img: &mut RgbaImage, p: Pixel, color: [u8; 3]) {
    for dr in -DOT_RADIUS..=DOT_RADIUS {
        for dc in -DOT_RADIUS..=DOT_RADIUS {
            if dr * dr + dc * dc <= DOT_RADIUS * DOT_RADIUS {
                put(img, p.row as i64 + dr, p.col as i64 + dc, color);
            }
        }
    }
}

/// Composite image at one pixel per cell, upscaled by `scale`.
pub fn compose(
    scene: &Scene,
    traj: &Trajectory,
    heatmap: &Heatmap,
    probs: &ObjectProbabilityMap,
    scale: u32,
) -> Result<RgbaImage, SceneError> {
    let geom = *scene.geometry();
    if heatmap.geometry != geom {
        return Err(SceneError::Dimension {
            expected: format!("{}x{} heatmap", geom.width_px, geom.height_px),
            found: format!("{}x{}", heatmap.geometry.width_px, heatmap.geometry.height_px),
        });
    }
    let mut img = RgbaImage::new(geom.width_px as u32, geom.height_px as u32);
    for (i, &w) in scene.map.cells().iter().enumerate() {
        let p = geom.pixel(i);
        put(&mut img, p.row as i64, p.col as i64, if w == 1 { WALKABLE } else { BLOCKED });
    }
    for (label, color) in rank_colors(probs) {
        if let Some(obj) = scene.object(&label) {
            for p in &obj.mask {
                put(&mut img, p.row as i64, p.col as i64, color);
            }
        }
    }
    let max = heatmap.max();
    if max > 0.0 {
        for (i, &v) in heatmap.values.iter().enumerate() {
            if v > 0.0 {
                let p = geom.pixel(i);
                blend(img.get_pixel_mut(p.col as u32, p.row as u32), HEAT, HEAT_MAX_ALPHA * v / max);
            }
        }
    }
    let pts: Vec<Pixel> = traj.samples().iter().map(|s| geom.world_to_pixel(s.x, s.y)).collect();
    for w in pts.windows(2) {
        line(&mut img, w[0], w[1], PATH);
    }
    dot(&mut img, pts[0], START);
    dot(&mut img, *pts.last().expect("trajectory is non-empty"), CURRENT);
    let scale = scale.max(1);
    if scale > 1 {
        img = imageops::resize(&img, img.width() * scale, img.height() * scale, imageops::FilterType::Nearest);
    }
    Ok(img)
}

/// Writes the composite as an 8-bit RGBA PNG.
pub fn render_prediction(
    scene: &Scene,
    traj: &Trajectory,
    heatmap: &Heatmap,
    probs: &ObjectProbabilityMap,
    scale: u32,
    out: &Path,
) -> Result<(), SceneError> {
    let img = compose(scene, traj, heatmap, probs, scale)?;
    img.save_with_format(out, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{GridGeometry, ObjectRegion, SceneMap};
    use crate::trajectory::Sample;

    fn fixture() -> (Scene, Trajectory) {
        let g = GridGeometry::square(32, 4.0).unwrap();
        let objects = vec![
            ObjectRegion::new("a", vec![Pixel::new(2, 2), Pixel::new(2, 3)], [0; 3]),
            ObjectRegion::new("b", vec![Pixel::new(20, 20)], [0; 3]),
            ObjectRegion::new("c", vec![Pixel::new(28, 5)], [0; 3]),
        ];
        let scene = Scene::new("r", SceneMap::open(g).unwrap(), objects).unwrap();
        let traj = Trajectory::new(vec![Sample::new(0.0, 0.5, 3.5), Sample::new(1.0, 3.5, 0.5)]).unwrap();
        (scene, traj)
    }

    #[test]
    fn uniform_probs_paint_mid_scale() {
        let u = ObjectProbabilityMap::uniform(["a", "b", "c"]).unwrap();
        let colors = rank_colors(&u);
        assert!(colors.iter().all(|(_, c)| *c == [128, 0, 128]));
    }

    #[test]
    fn ranked_probs_span_blue_to_red() {
        let p = ObjectProbabilityMap::from_weights([("a", 3.0), ("b", 2.0), ("c", 1.0)]).unwrap().probs;
        let colors = rank_colors(&p);
        assert_eq!(colors[0], ("a".to_string(), [255, 0, 0]));
        assert_eq!(colors[2], ("c".to_string(), [0, 0, 255]));
    }

    #[test]
    fn zero_heatmap_has_no_yellow() {
        let (scene, traj) = fixture();
        let u = ObjectProbabilityMap::uniform(["a", "b", "c"]).unwrap();
        let img = compose(&scene, &traj, &Heatmap::zeros(*scene.geometry()), &u, 1).unwrap();
        assert!(img.pixels().all(|p| !(p[0] > 200 && p[1] > 200 && p[2] < 100)));
        assert_eq!(*img.get_pixel(10, 10), Rgba([225, 225, 225, 255]));
    }

    #[test]
    fn heatmap_peak_is_tinted_and_output_is_deterministic() {
        let (scene, traj) = fixture();
        let mut h = Heatmap::zeros(*scene.geometry());
        h.set(Pixel::new(10, 25), 2.0);
        let u = ObjectProbabilityMap::uniform(["a", "b", "c"]).unwrap();
        let a = compose(&scene, &traj, &h, &u, 2).unwrap();
        let b = compose(&scene, &traj, &h, &u, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dimensions(), (64, 64));
        let px = a.get_pixel(50, 20);
        assert!(px[0] > px[2] && px[1] > px[2]);
    }
}
