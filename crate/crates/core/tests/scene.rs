mod common;

use std::fs;

use proptest::prelude::*;
use serde_json::Value;
use trllm_core::scene::{
    decode_mask_rle, encode_mask_rle, load_scene, object_overlap_mass, save_scene, GridGeometry, Heatmap,
    ObjectRegion, Pixel, SceneError, SceneMap,
};

fn geom() -> GridGeometry {
    GridGeometry::square(256, 10.0).unwrap()
}

#[test]
fn l_shaped_fixture_loads() {
    let scene = common::scene("scene_L.json");
    assert_eq!(scene.objects.len(), 4);
    assert_eq!(scene.geometry().width_px, 256);
    assert_eq!(scene.geometry().height_px, 256);
    assert_eq!(scene.labels(), ["sink", "fridge", "sofa", "tv"]);
    // Areas of the rectangles written by the fixture author.
    let areas: Vec<usize> = scene.objects.iter().map(|o| o.area()).collect();
    assert_eq!(areas, [10 * 30, 30 * 8, 40 * 10, 10 * 30]);
    // Vertical bar 216x100 plus the part of the horizontal bar right of it.
    assert_eq!(scene.map.walkable_count(), 216 * 100 + 100 * 116);
    assert!(!scene.map.is_walkable(Pixel::new(50, 200)));
    assert!(scene.map.is_walkable(Pixel::new(200, 200)));
}

fn edited_fixture(edit: impl FnOnce(&mut Value)) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let mut desc: Value = serde_json::from_str(&fs::read_to_string(common::fixture("scene_L.json")).unwrap()).unwrap();
    edit(&mut desc);
    fs::copy(common::fixture("scene_L.png"), dir.path().join("scene_L.png")).unwrap();
    let path = dir.path().join("scene.json");
    fs::write(&path, serde_json::to_string(&desc).unwrap()).unwrap();
    (dir, path)
}

#[test]
fn duplicate_label_rejected() {
    let (_dir, path) = edited_fixture(|d| {
        d["objects"][1]["label"] = "sink".into();
    });
    assert!(matches!(load_scene(&path), Err(SceneError::DuplicateLabel(l)) if l == "sink"));
}

#[test]
fn out_of_bounds_mask_rejected() {
    let (_dir, path) = edited_fixture(|d| {
        d["objects"][0]["mask_rle"] = serde_json::json!([65530, 10]);
    });
    assert!(matches!(load_scene(&path), Err(SceneError::MaskOutOfBounds { .. })));
}

#[test]
fn malformed_descriptor_names_the_field() {
    let (_dir, path) = edited_fixture(|d| {
        d.as_object_mut().unwrap().remove("geometry");
    });
    let err = load_scene(&path).unwrap_err();
    assert!(err.to_string().contains("geometry"), "{err}");

    let (_dir, path) = edited_fixture(|d| {
        d["objects"][0]["mask_rle"] = "oops".into();
    });
    let err = load_scene(&path).unwrap_err();
    assert!(matches!(err, SceneError::Json(_)), "{err}");
}

#[test]
fn zero_walkable_cells_rejected() {
    assert!(matches!(
        SceneMap::new(GridGeometry::square(8, 1.0).unwrap(), vec![0; 64]),
        Err(SceneError::NoWalkable)
    ));
    let dir = tempfile::tempdir().unwrap();
    let (_d, path) = edited_fixture(|_| {});
    let blank = image::GrayImage::new(256, 256);
    blank.save(dir.path().join("scene_L.png")).unwrap();
    fs::copy(&path, dir.path().join("scene.json")).unwrap();
    assert!(matches!(load_scene(&dir.path().join("scene.json")), Err(SceneError::NoWalkable)));
}

#[test]
fn save_then_load_preserves_scene() {
    let scene = common::scene("scene_L.json");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.json");
    save_scene(&scene, &path).unwrap();
    let back = load_scene(&path).unwrap();
    assert_eq!(back.map, scene.map);
    assert_eq!(back.objects, scene.objects);
}

#[test]
fn world_to_pixel_examples() {
    let g = geom();
    assert_eq!(g.world_to_pixel(0.0, 0.0), Pixel::new(0, 0));
    // floor(5 / 10 * 255) = floor(127.5) = 127 on both axes.
    assert_eq!(g.world_to_pixel(5.0, 5.0), Pixel::new(127, 127));
    assert_eq!(g.world_to_pixel(10.0, 10.0), Pixel::new(255, 255));
    // x clamps to the last column, y to the first row.
    assert_eq!(g.world_to_pixel(11.0, -1.0), Pixel::new(0, 255));
    assert_eq!(g.world_to_pixel(-1.0, 11.0), Pixel::new(255, 0));
    assert!((g.pitch() - 10.0 / 256.0).abs() < 1e-15);
}

#[test]
fn overlap_mass_examples() {
    let g = geom();
    let region = ObjectRegion::new("r", (0..12).map(|c| Pixel::new(3, c)).collect(), [0; 3]);
    assert_eq!(object_overlap_mass(&Heatmap::filled(g, 1.0), &region).unwrap(), 12.0);
    assert_eq!(object_overlap_mass(&Heatmap::zeros(g), &region).unwrap(), 0.0);
    let mut h = Heatmap::zeros(g);
    h.set(Pixel::new(3, 5), 0.7);
    assert_eq!(object_overlap_mass(&h, &region).unwrap(), 0.7);
    let small = Heatmap::zeros(GridGeometry::square(4, 10.0).unwrap());
    assert!(matches!(object_overlap_mass(&small, &region), Err(SceneError::Dimension { .. })));
}

proptest! {
    #[test]
    fn world_pixel_round_trip(x in -3.0f64..13.0, y in -3.0f64..13.0, n in 2usize..300, extent in 0.5f64..50.0) {
        let g = GridGeometry::square(n, extent).unwrap();
        let sx = x / 10.0 * extent;
        let sy = y / 10.0 * extent;
        let (wx, wy) = g.pixel_to_world(g.world_to_pixel(sx, sy));
        let pitch = extent / n as f64;
        prop_assert!((wx - sx.clamp(0.0, extent)).abs() <= pitch + 1e-12);
        prop_assert!((wy - sy.clamp(0.0, extent)).abs() <= pitch + 1e-12);
    }

    #[test]
    fn world_to_pixel_is_monotone(a in -1.0f64..11.0, b in -1.0f64..11.0, y in 0.0f64..10.0) {
        let g = geom();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(g.world_to_pixel(lo, y).col <= g.world_to_pixel(hi, y).col);
        prop_assert!(g.world_to_pixel(y, lo).row <= g.world_to_pixel(y, hi).row);
    }

    #[test]
    fn rle_round_trip(cells in proptest::collection::btree_set(0usize..1024, 1..200)) {
        let g = GridGeometry::square(32, 1.0).unwrap();
        let idx: Vec<usize> = cells.iter().copied().collect();
        let rle = encode_mask_rle(&idx);
        let back: Vec<usize> = decode_mask_rle("x", &rle, &g).unwrap().iter().map(|p| g.index(*p)).collect();
        prop_assert_eq!(back, idx);
    }

    #[test]
    fn overlap_mass_is_additive(
        values in proptest::collection::vec(0.0f64..5.0, 256),
        owner in proptest::collection::vec(0u8..3, 256),
    ) {
        let g = GridGeometry::square(16, 1.0).unwrap();
        let h = Heatmap::from_values(g, values).unwrap();
        let pick = |k: u8| -> Vec<Pixel> {
            owner.iter().enumerate().filter(|(_, o)| **o == k).map(|(i, _)| g.pixel(i)).collect()
        };
        let (m1, m2) = (pick(1), pick(2));
        prop_assume!(!m1.is_empty() && !m2.is_empty());
        let union: Vec<Pixel> = m1.iter().chain(&m2).copied().collect();
        let mass = |m: Vec<Pixel>| object_overlap_mass(&h, &ObjectRegion::new("r", m, [0; 3])).unwrap();
        let (a, b, u) = (mass(m1), mass(m2), mass(union));
        prop_assert!((u - (a + b)).abs() <= 1e-9 * (1.0 + u));
    }
}
