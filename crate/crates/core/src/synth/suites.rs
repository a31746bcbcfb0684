use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const SUITE_NAMES: [&str; 5] = ["S1", "S2", "S3", "S4", "S5"];

const HEIGHT: f64 = 2.5;
/// Puts the flat-ground horizon at image row 140 (detector row 17).
const PITCH_DEG: f64 = 11.309_932_474_020_213;
const STEP: f64 = 0.25;

const TERRAIN: Albedo = [0.22, 0.30, 0.14];
const TRAIL: Albedo = [0.55, 0.47, 0.36];
const BARK: Albedo = [0.30, 0.21, 0.13];
const LEAVES: Albedo = [0.12, 0.26, 0.09];
const BRIGHT: Albedo = [0.96, 0.95, 0.90];

fn vga() -> Intrinsics {
    Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).expect("valid intrinsics")
}

fn point_at(line: &[[f64; 2]], s: f64) -> [f64; 2] {
    let mut left = s.max(0.0);
    for seg in line.windows(2) {
        let len = ((seg[1][0] - seg[0][0]).powi(2) + (seg[1][1] - seg[0][1]).powi(2)).sqrt();
        if left <= len {
            let t = if len > 0.0 { left / len } else { 0.0 };
            return [seg[0][0] + t * (seg[1][0] - seg[0][0]), seg[0][1] + t * (seg[1][1] - seg[0][1])];
        }
        left -= len;
    }
    *line.last().expect("non-empty line")
}

/// Camera poses following the centreline from arc length `start`, with a
/// slow lateral sway and yaw from the local look-ahead direction.
fn follow(line: &[[f64; 2]], frames: usize, start: f64, sway: f64, phase: f64) -> Vec<CameraFrame> {
    (0..frames)
        .map(|i| {
            let s = start + i as f64 * STEP;
            let p = point_at(line, s);
            let a = point_at(line, s - 1.0);
            let b = point_at(line, s + 3.0);
            let (dx, dz) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dz * dz).sqrt();
            let (nx, nz) = (dz / len, -dx / len);
            let off = sway * (s / 9.0 + phase).sin();
            let yaw = dx.atan2(dz).to_degrees() + 4.0 * sway * (s / 9.0 + phase).cos();
            let pos = Vector3::new(p[0] + nx * off, -HEIGHT, p[1] + nz * off);
            CameraFrame { pose: camera_pose(pos, yaw, PITCH_DEG), pitch_deg: PITCH_DEG }
        })
        .collect()
}

fn base(name: &str, centerline: Vec<[f64; 2]>, seed: u64) -> SceneSpec {
    SceneSpec {
        name: name.into(),
        intrinsics: vga(),
        detector_size: (80, 60),
        trail: TrailSpec { centerline, width: 0.9, albedo: TRAIL },
        terrain: TerrainSpec { albedo: TERRAIN, texture_amplitude: 0.35, texture_scale: 0.35, undulation: None },
        sky: [0.20, 0.27, 0.15],
        obstacles: vec![],
        shrubs: vec![],
        distractors: vec![],
        camera_path: vec![],
        noise: NoiseSpec::default(),
        seed,
    }
}

fn straight() -> Vec<[f64; 2]> {
    vec![[0.0, -10.0], [0.0, 140.0]]
}

fn curved() -> Vec<[f64; 2]> {
    let r = 45.0;
    (0..=60).map(|i| -10.0 + i as f64 * 2.5).map(|s: f64| [r * (1.0 - (s / r).cos()), r * (s / r).sin()]).collect()
}

/// Trees and shrubs along both sides of the trail, clear of the corridor.
fn roadside(spec: &mut SceneSpec, rng: &mut ChaCha8Rng, from: f64, to: f64) {
    let line = spec.trail.centerline.clone();
    let half = spec.trail.width / 2.0;
    let mut s = from;
    let mut side = 1.0;
    while s < to {
        let p = point_at(&line, s);
        let q = point_at(&line, s + 0.5);
        let (dx, dz) = (q[0] - p[0], q[1] - p[1]);
        let len = (dx * dx + dz * dz).sqrt();
        let (nx, nz) = (dz / len, -dx / len);
        if rng.random_bool(0.8) {
            let radius = rng.random_range(0.15..0.32);
            let off = half + 1.0 + radius + rng.random_range(0.0..1.5);
            spec.obstacles.push(Cylinder {
                center: [p[0] + side * nx * off, p[1] + side * nz * off],
                radius,
                height: rng.random_range(3.0..6.0),
                albedo: BARK,
            });
        } else {
            let hs: [f64; 2] = [rng.random_range(0.3..0.6), rng.random_range(0.3..0.6)];
            let off = half + 1.2 + (hs[0] * hs[0] + hs[1] * hs[1]).sqrt() + rng.random_range(0.0..1.0);
            spec.shrubs.push(BoxShrub {
                center: [p[0] + side * nx * off, p[1] + side * nz * off],
                half_size: hs,
                height: rng.random_range(0.6..1.2),
                albedo: LEAVES,
            });
        }
        side = -side;
        s += rng.random_range(2.5..4.5);
    }
}

fn s1(seed: u64) -> SceneSpec {
    let mut spec = base("S1", straight(), seed);
    spec.camera_path = follow(&spec.trail.centerline, 60, 10.0, 0.15, seed as f64);
    spec
}

fn s2(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0002);
    let mut spec = base("S2", curved(), seed);
    roadside(&mut spec, &mut rng, 12.0, 80.0);
    spec.camera_path = follow(&spec.trail.centerline, 60, 10.0, 0.1, seed as f64);
    spec
}

fn s3(seed: u64) -> SceneSpec {
    let mut spec = base("S3", straight(), seed);
    // a bright raised walkway edge running beside the trail
    spec.distractors.push(Distractor { center: [1.4, 65.0], half_size: [0.4, 75.0], height: 0.35, albedo: BRIGHT });
    spec.camera_path = follow(&spec.trail.centerline, 150, 8.0, 0.15, seed as f64);
    spec
}

fn s4(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0004);
    let mut spec = base("S4", straight(), seed);
    spec.terrain.undulation = Some(Undulation { amplitude: 0.12, wavelength: 9.0 });
    roadside(&mut spec, &mut rng, 14.0, 60.0);
    spec.camera_path = follow(&spec.trail.centerline, 60, 10.0, 0.15, seed as f64);
    spec
}

fn s5(seed: u64) -> SceneSpec {
    let mut spec = s2(seed);
    spec.name = "S5".into();
    spec.noise.dropout = 0.5;
    spec
}

/// Named suite for `seed`; `None` for unknown names.
pub fn suite(name: &str, seed: u64) -> Option<SceneSpec> {
    Some(match name {
        "S1" => s1(seed),
        "S2" => s2(seed),
        "S3" => s3(seed),
        "S4" => s4(seed),
        "S5" => s5(seed),
        _ => return None,
    })
}

pub fn standard_suites_seeded(seed: u64) -> Vec<SceneSpec> {
    SUITE_NAMES.iter().map(|n| suite(n, seed).expect("known suite")).collect()
}

pub fn standard_suites() -> Vec<SceneSpec> {
    standard_suites_seeded(0)
}
