mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trllm_core::raster::{
    rasterize, splat_gaussian, CHANNELS, DEFAULT_SIGMA_PX, EPOCHS, HEADING_LOOKAHEAD_M, MAP_CHANNEL,
};
use trllm_core::scene::{GridGeometry, SceneMap};
use trllm_core::trajectory::{Sample, Trajectory, TrajectoryError};

fn traj(points: &[(f64, f64, f64)]) -> Trajectory {
    Trajectory::new(points.iter().map(|&(t, x, y)| Sample::new(t, x, y)).collect()).unwrap()
}

fn polyline_length(t: &Trajectory) -> f64 {
    t.samples().windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
}

#[test]
fn progress_examples() {
    assert_eq!(traj(&[(0.0, 0.0, 0.0), (1.0, 1.0, 0.0)]).progress_distance(), 1.0);
    assert_eq!(traj(&[(0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (2.0, 2.0, 0.0)]).progress_distance(), 2.0);
    assert_eq!(common::trajectory("square_loop.csv").progress_distance(), 4.0);
}

#[test]
fn invalid_trajectories_rejected() {
    assert!(Trajectory::new(vec![Sample::new(0.0, 0.0, 0.0)]).is_err());
    assert!(Trajectory::new(vec![Sample::new(0.0, 0.0, 0.0), Sample::new(0.0, 1.0, 0.0)]).is_err());
    assert!(Trajectory::from_csv_str("time,x,y\n0,0,0\n1,1,1\n").is_err());
}

#[test]
fn csv_accepts_crlf() {
    let a = Trajectory::from_csv_str("t,x,y\r\n0,0,0\r\n1,1.5,2\r\n").unwrap();
    let b = Trajectory::from_csv_str("t,x,y\n0,0,0\n1,1.5,2\n").unwrap();
    assert_eq!(a, b);
    assert_eq!(Trajectory::from_csv_str(&a.to_csv_string()).unwrap(), a);
}

#[test]
fn resample_examples() {
    let line = traj(&[(0.0, 0.0, 0.0), (2.0, 4.0, 2.0)]);
    let r = line.resample_to_epochs(3);
    assert_eq!(r.samples()[1], Sample::new(1.0, 2.0, 1.0));

    let uniform = traj(&[(0.0, 0.0, 0.0), (1.0, 0.5, 0.1), (2.0, 0.7, 0.9), (3.0, 1.0, 1.0)]);
    assert_eq!(uniform.resample_to_epochs(4), uniform);

    let irregular = common::trajectory("collinear_7.csv");
    assert_eq!(irregular.len(), 7);
    let r = irregular.resample_to_epochs(EPOCHS);
    assert_eq!(r.len(), EPOCHS);
    assert_eq!(r.first(), irregular.first());
    assert_eq!(r.last(), irregular.last());
    assert!((polyline_length(&r) - polyline_length(&irregular)).abs() < 1e-9);
    let dt: Vec<f64> = r.samples().windows(2).map(|w| w[1].t - w[0].t).collect();
    assert!(dt.iter().all(|d| (d - 3.1 / 89.0).abs() < 1e-12));
}

#[test]
fn heading_examples() {
    let along_x = traj(&[(0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (2.0, 3.0, 0.0)]);
    assert_eq!(along_x.headings(), [0.0, 0.0, 0.0]);
    let along_y = traj(&[(0.0, 0.0, 0.0), (1.0, 0.0, 1.0), (2.0, 0.0, 2.0)]);
    assert_eq!(along_y.headings(), [FRAC_PI_2; 3]);
    let square = common::trajectory("square_loop.csv");
    assert_eq!(square.headings(), [0.0, FRAC_PI_2, PI, -FRAC_PI_2, -FRAC_PI_2]);
    let paused = traj(&[(0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (2.0, 1.0, 2.0), (3.0, 1.0, 2.0)]);
    assert_eq!(paused.headings(), [0.0, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2]);
}

#[test]
fn truncation_examples() {
    let straight = traj(&[(0.0, 0.0, 0.0), (5.0, 5.0, 0.0)]);
    let (p, sat) = straight.truncate_at_progress(2.0);
    assert!(!sat);
    assert_eq!(p.progress_distance(), 2.0);
    assert_eq!(p.last(), Sample::new(2.0, 2.0, 0.0));

    let (p, sat) = straight.truncate_at_progress(0.0);
    assert!(!sat);
    assert_eq!(p.len(), 2);
    assert_eq!(p.progress_distance(), 0.0);
    assert_eq!((p.last().x, p.last().y), (0.0, 0.0));
    assert!(p.last().t > p.first().t);

    let short = traj(&[(0.0, 0.0, 0.0), (1.0, 1.5, 0.0)]);
    let (p, sat) = short.truncate_at_progress(3.0);
    assert!(sat);
    assert_eq!(p, short);
}

fn raster_map(n: usize) -> SceneMap {
    SceneMap::open(GridGeometry::square(n, 10.0).unwrap()).unwrap()
}

#[test]
fn stationary_trajectory_raster() {
    let samples = (0..EPOCHS).map(|i| Sample::new(i as f64 * 0.1, 5.0, 5.0)).collect();
    let stack = rasterize(&Trajectory::new(samples).unwrap(), &raster_map(256), DEFAULT_SIGMA_PX).unwrap();
    assert_eq!(stack.data.len(), CHANNELS * 256 * 256);
    assert_eq!(CHANNELS, 181);
    for k in 0..EPOCHS {
        assert_eq!(stack.argmax(k), trllm_core::Pixel::new(127, 127));
        assert_eq!(stack.channel(k), stack.channel(0));
    }
    assert!(stack.channel(MAP_CHANNEL).iter().all(|&v| v == 1.0));
}

#[test]
fn rasterize_requires_ninety_epochs() {
    let t = traj(&[(0.0, 1.0, 1.0), (1.0, 2.0, 2.0)]);
    assert!(matches!(
        rasterize(&t, &raster_map(32), 3.0),
        Err(TrajectoryError::EpochCount { expected: 90, found: 2 })
    ));
}

/// Midpoint-rule integral of exp(-r^2 / 2 s^2) over the disc r <= 3 s.
fn truncated_gaussian_integral(sigma: f64) -> f64 {
    let h = 0.01;
    let r_max = 3.0 * sigma;
    let n = (2.0 * r_max / h).ceil() as i64;
    let mut total = 0.0;
    for i in 0..n {
        let x = -r_max + (i as f64 + 0.5) * h;
        for j in 0..n {
            let y = -r_max + (j as f64 + 0.5) * h;
            let r2 = x * x + y * y;
            if r2 <= r_max * r_max {
                total += (-r2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    total * h * h
}

#[test]
fn splat_mass_matches_integral() {
    let integral = truncated_gaussian_integral(3.0);
    let full = 2.0 * PI * 9.0;
    assert!(integral > 0.95 * full && integral < full);
    let g = GridGeometry::square(64, 10.0).unwrap();
    let mut ch = vec![0f32; 64 * 64];
    splat_gaussian(&mut ch, &g, trllm_core::Pixel::new(32, 32), 3.0);
    let mass: f64 = ch.iter().map(|&v| v as f64).sum();
    assert!(mass >= full * 0.95 && mass <= full * 1.01, "{mass}");
    assert!((mass - integral).abs() / integral < 0.01, "{mass} vs {integral}");
}

#[test]
fn splat_fuzz_ten_thousand_points() {
    let g = GridGeometry::square(256, 10.0).unwrap();
    let full = 2.0 * PI * 9.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ch = vec![0f32; g.cell_count()];
    for _ in 0..10_000 {
        let (x, y) = (rng.gen_range(-0.5..10.5), rng.gen_range(-0.5..10.5));
        let at = g.world_to_pixel(x, y);
        ch.fill(0.0);
        splat_gaussian(&mut ch, &g, at, DEFAULT_SIGMA_PX);
        let best = ch.iter().copied().fold(f32::MIN, f32::max);
        assert_eq!(best, 1.0);
        assert_eq!(ch[g.index(at)], 1.0);
        assert_eq!(ch.iter().filter(|&&v| v == 1.0).count(), 1);
        let mass: f64 = ch.iter().map(|&v| v as f64).sum();
        assert!(mass <= full * 1.01);
        let interior = (9..247).contains(&at.row) && (9..247).contains(&at.col);
        if interior {
            assert!(mass >= full * 0.95, "{at:?}: {mass}");
        }
    }
}

fn random_walk(rng: &mut ChaCha8Rng) -> Trajectory {
    let n = rng.gen_range(2..30);
    let mut t = 0.0;
    let (mut x, mut y) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push(Sample::new(t, x, y));
        t += rng.gen_range(0.05..1.0);
        x = (x + rng.gen_range(-1.0..1.0)).clamp(0.0, 10.0);
        y = (y + rng.gen_range(-1.0..1.0)).clamp(0.0, 10.0);
    }
    Trajectory::new(samples).unwrap()
}

#[test]
fn raster_argmax_tracks_samples() {
    let map = raster_map(64);
    let g = *map.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..112 {
        let r = random_walk(&mut rng).resample_to_epochs(EPOCHS);
        let stack = rasterize(&r, &map, DEFAULT_SIGMA_PX).unwrap();
        let headings = r.headings();
        for (k, s) in r.samples().iter().enumerate() {
            assert_eq!(stack.argmax(k), g.world_to_pixel(s.x, s.y));
            let ahead = g.world_to_pixel(
                s.x + HEADING_LOOKAHEAD_M * headings[k].cos(),
                s.y + HEADING_LOOKAHEAD_M * headings[k].sin(),
            );
            assert_eq!(stack.argmax(EPOCHS + k), ahead);
            assert_eq!(stack.channel(k).iter().copied().fold(0.0, f32::max), 1.0);
        }
        assert!(stack.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(rasterize(&r, &map, DEFAULT_SIGMA_PX).unwrap(), stack);
    }
}

#[test]
fn map_channel_copies_walkable_grid() {
    let scene = common::scene("scene_L.json");
    let r = common::trajectory("collinear_7.csv").resample_to_epochs(EPOCHS);
    let stack = rasterize(&r, &scene.map, DEFAULT_SIGMA_PX).unwrap();
    let map: Vec<f32> = scene.map.cells().iter().map(|&c| c as f32).collect();
    assert_eq!(stack.channel(MAP_CHANNEL), &map[..]);
}

fn samples_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((0.01f64..2.0, -20.0f64..20.0, -20.0f64..20.0), 2..40)
}

fn build(steps: &[(f64, f64, f64)], t0: f64) -> Trajectory {
    let mut t = t0;
    let samples = steps
        .iter()
        .map(|&(dt, x, y)| {
            t += dt;
            Sample::new(t, x, y)
        })
        .collect();
    Trajectory::new(samples).unwrap()
}

proptest! {
    #[test]
    fn progress_of_concatenation(a in samples_strategy(), b in samples_strategy()) {
        let ta = build(&a, 0.0);
        let tb = build(&b, ta.last().t);
        let joined = Trajectory::new(ta.samples().iter().chain(tb.samples()).copied().collect()).unwrap();
        let gap = ta.last().distance_to(&tb.first());
        let want = ta.progress_distance() + tb.progress_distance() + gap;
        prop_assert!((joined.progress_distance() - want).abs() <= 1e-9 * (1.0 + want));
    }

    #[test]
    fn progress_is_rigid_invariant(a in samples_strategy(), angle in -PI..PI, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let t = build(&a, 0.0);
        let (c, s) = (angle.cos(), angle.sin());
        let moved = Trajectory::new(
            t.samples().iter().map(|p| Sample::new(p.t, c * p.x - s * p.y + dx, s * p.x + c * p.y + dy)).collect(),
        ).unwrap();
        prop_assert!((moved.progress_distance() - t.progress_distance()).abs() <= 1e-9);
    }

    #[test]
    fn truncation_is_exact_prefix(a in samples_strategy(), d in 0.0f64..200.0) {
        let t = build(&a, 0.0);
        let total = t.progress_distance();
        let (p, saturated) = t.truncate_at_progress(d);
        prop_assert_eq!(saturated, d > total);
        prop_assert!((p.progress_distance() - d.min(total)).abs() <= 1e-9);
        let keep = p.len() - 1;
        prop_assert_eq!(&p.samples()[..keep], &t.samples()[..keep]);
        if d > 0.0 && !saturated {
            let cut = p.last();
            let (prev, next) = (t.samples()[keep - 1], t.samples()[keep]);
            let cross = (next.x - prev.x) * (cut.y - prev.y) - (next.y - prev.y) * (cut.x - prev.x);
            prop_assert!(cross.abs() <= 1e-6 * (1.0 + prev.distance_to(&next).powi(2)));
        }
    }

    #[test]
    fn resample_keeps_endpoints(a in samples_strategy(), n in 2usize..200) {
        let t = build(&a, 0.0);
        let r = t.resample_to_epochs(n);
        prop_assert_eq!(r.len(), n);
        prop_assert_eq!(r.first(), t.first());
        prop_assert_eq!(r.last(), t.last());
        prop_assert!(r.progress_distance() <= t.progress_distance() + 1e-9);
    }
}
