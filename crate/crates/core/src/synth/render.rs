use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{Albedo, GroundTruth, SceneSpec, SpecError};
use crate::keyframe::Keyframe;
use crate::raster::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Sky,
    Ground,
    Trail,
    Patch,
    Obstacle,
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    t: f64,
    label: Label,
    color: Albedo,
}

const EPS: f64 = 1e-9;
/// Solids extend this far below their base so undulating ground leaves no gap.
const SINK: f64 = 0.3;

fn sun() -> Vector3<f64> {
    Vector3::new(-0.4, -0.8, -0.45).normalize()
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn lattice(ix: i64, iz: i64, seed: u64) -> f64 {
    let h = splitmix(seed ^ splitmix(ix as u64 ^ splitmix(iz as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in [0, 1).
fn value_noise(x: f64, z: f64, scale: f64, seed: u64) -> f64 {
    let (fx, fz) = (x / scale, z / scale);
    let (x0, z0) = (fx.floor(), fz.floor());
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, tz) = (s(fx - x0), s(fz - z0));
    let (ix, iz) = (x0 as i64, z0 as i64);
    let a = lattice(ix, iz, seed) * (1.0 - tx) + lattice(ix + 1, iz, seed) * tx;
    let b = lattice(ix, iz + 1, seed) * (1.0 - tx) + lattice(ix + 1, iz + 1, seed) * tx;
    a * (1.0 - tz) + b * tz
}

fn scaled(a: Albedo, k: f64) -> Albedo {
    [a[0] * k, a[1] * k, a[2] * k]
}

fn ground_color(spec: &SceneSpec, x: f64, z: f64) -> (Label, Albedo) {
    let t = &spec.terrain;
    let n = 0.65 * value_noise(x, z, t.texture_scale, spec.seed) + 0.35 * value_noise(x, z, t.texture_scale / 3.0, spec.seed ^ 1);
    let texture = 1.0 + t.texture_amplitude * (2.0 * n - 1.0);
    for d in spec.distractors.iter().filter(|d| d.height <= 0.0) {
        if (x - d.center[0]).abs() <= d.half_size[0] && (z - d.center[1]).abs() <= d.half_size[1] {
            return (Label::Patch, scaled(d.albedo, 1.0 + 0.3 * (texture - 1.0)));
        }
    }
    if spec.trail.distance(x, z) <= spec.trail.width / 2.0 {
        return (Label::Trail, scaled(spec.trail.albedo, 1.0 + 0.5 * (texture - 1.0)));
    }
    (Label::Ground, scaled(t.albedo, texture))
}

fn hit_ground(spec: &SceneSpec, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    match spec.terrain.undulation {
        None => (d.y > 0.0).then(|| -o.y / d.y).filter(|&t| t > EPS),
        Some(u) => {
            if d.y <= 0.0 {
                return None;
            }
            let f = |t: f64| {
                let p = o + d * t;
                p.y - spec.terrain.ground_y(p.x, p.z)
            };
            let a = u.amplitude.abs();
            let t_end = (a - o.y) / d.y;
            let mut lo = ((-a - o.y) / d.y).max(EPS);
            if f(lo) >= 0.0 {
                return Some(lo);
            }
            let step = 0.05;
            while lo < t_end {
                let hi = (lo + step).min(t_end);
                if f(hi) >= 0.0 {
                    let (mut l, mut h) = (lo, hi);
                    for _ in 0..48 {
                        let m = 0.5 * (l + h);
                        if f(m) >= 0.0 {
                            h = m;
                        } else {
                            l = m;
                        }
                    }
                    return Some(h);
                }
                lo = hi;
            }
            Some(t_end)
        }
    }
}

fn hit_cylinder(spec: &SceneSpec, o: &Vector3<f64>, d: &Vector3<f64>, best: f64) -> Option<Hit> {
    let mut out: Option<Hit> = None;
    for c in &spec.obstacles {
        let base = spec.terrain.ground_y(c.center[0], c.center[1]);
        let top = base - c.height;
        let (ox, oz) = (o.x - c.center[0], o.z - c.center[1]);
        let a = d.x * d.x + d.z * d.z;
        let b = 2.0 * (ox * d.x + oz * d.z);
        let cc = ox * ox + oz * oz - c.radius * c.radius;
        let limit = out.map_or(best, |h| h.t);
        if a > 0.0 {
            let disc = b * b - 4.0 * a * cc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                    let y = o.y + t * d.y;
                    if t > EPS && t < limit && y >= top && y <= base + SINK {
                        let p = o + d * t;
                        let n = Vector3::new(p.x - c.center[0], 0.0, p.z - c.center[1]) / c.radius;
                        let shade = 0.5 + 0.5 * n.dot(&sun()).max(0.0);
                        out = Some(Hit { t, label: Label::Obstacle, color: scaled(c.albedo, shade) });
                        break;
                    }
                }
            }
        }
        let limit = out.map_or(best, |h| h.t);
        if d.y.abs() > 0.0 {
            let t = (top - o.y) / d.y;
            let p = o + d * t;
            let r2 = (p.x - c.center[0]).powi(2) + (p.z - c.center[1]).powi(2);
            if t > EPS && t < limit && r2 <= c.radius * c.radius {
                out = Some(Hit { t, label: Label::Obstacle, color: scaled(c.albedo, 0.9) });
            }
        }
    }
    out
}

/// Slab test; returns entry distance and the entered face's outward normal.
fn hit_box(o: &Vector3<f64>, d: &Vector3<f64>, lo: Vector3<f64>, hi: Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut normal = Vector3::zeros();
    for axis in 0..3 {
        if d[axis].abs() < 1e-15 {
            if o[axis] < lo[axis] || o[axis] > hi[axis] {
                return None;
            }
            continue;
        }
        let (mut t0, mut t1) = ((lo[axis] - o[axis]) / d[axis], (hi[axis] - o[axis]) / d[axis]);
        let mut sign = -1.0;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = 1.0;
        }
        if t0 > t_near {
            t_near = t0;
            normal = Vector3::zeros();
            normal[axis] = sign;
        }
        t_far = t_far.min(t1);
    }
    (t_near <= t_far && t_near > EPS).then_some((t_near, normal))
}

fn hit_boxes(spec: &SceneSpec, o: &Vector3<f64>, d: &Vector3<f64>, best: f64) -> Option<Hit> {
    let mut out: Option<Hit> = None;
    let shrubs = spec.shrubs.iter().map(|b| (b.center, b.half_size, b.height, b.albedo, false));
    let raised = spec.distractors.iter().filter(|r| r.height > 0.0).map(|r| (r.center, r.half_size, r.height, r.albedo, true));
    for (c, hs, height, albedo, bright) in shrubs.chain(raised) {
        let base = spec.terrain.ground_y(c[0], c[1]);
        let lo = Vector3::new(c[0] - hs[0], base - height, c[1] - hs[1]);
        let hi = Vector3::new(c[0] + hs[0], base + SINK, c[1] + hs[1]);
        if let Some((t, n)) = hit_box(o, d, lo, hi) {
            if t < out.map_or(best, |h| h.t) {
                let lit = n.dot(&sun()).max(0.0);
                let shade = if bright { 0.85 + 0.15 * lit } else { 0.5 + 0.5 * lit };
                out = Some(Hit { t, label: Label::Obstacle, color: scaled(albedo, shade) });
            }
        }
    }
    out
}

fn cast(spec: &SceneSpec, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let mut best = hit_ground(spec, o, d).map(|t| {
        let p = o + d * t;
        let (label, color) = ground_color(spec, p.x, p.z);
        Hit { t, label, color }
    });
    if let Some(h) = hit_cylinder(spec, o, d, best.map_or(f64::INFINITY, |h| h.t)) {
        best = Some(h);
    }
    if let Some(h) = hit_boxes(spec, o, d, best.map_or(f64::INFINITY, |h| h.t)) {
        best = Some(h);
    }
    best
}

/// Majority vote of each `factor`×`factor` block: a block is set when more
/// than half its pixels carry `label`.
fn block_majority(labels: &[Label], w: usize, factor: usize, det: (usize, usize), label: Label) -> Grid<bool> {
    let half = factor * factor / 2;
    Grid::from_fn(det.0, det.1, |bx, by| {
        let mut n = 0;
        for y in by * factor..(by + 1) * factor {
            for x in bx * factor..(bx + 1) * factor {
                n += (labels[y * w + x] == label) as usize;
            }
        }
        n > half
    })
}

/// Renders keyframe `i` of `spec`. Noise is drawn from a stream keyed by
/// (seed, frame index), so frames can be rendered in any order.
pub fn render_frame(spec: &SceneSpec, i: usize) -> (Keyframe, GroundTruth) {
    let k = &spec.intrinsics;
    let (w, h) = (k.width as usize, k.height as usize);
    let cam = &spec.camera_path[i];
    let r = *cam.pose.rotation();
    let o = *cam.pose.translation();

    let rows: Vec<Vec<Option<Hit>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let dir = Vector3::new((x as f64 + 0.5 - k.cx) / k.fx, (y as f64 + 0.5 - k.cy) / k.fy, 1.0);
                    cast(spec, &o, &(r * dir))
                })
                .collect()
        })
        .collect();
    let hits: Vec<Option<Hit>> = rows.into_iter().flatten().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(i as u64 + 1);
    let inv_noise = Normal::new(0.0, spec.noise.inverse_depth_sigma.max(0.0)).unwrap();
    let img_noise = Normal::new(0.0, spec.noise.image_sigma.max(0.0)).unwrap();

    let mut depth = Vec::with_capacity(w * h);
    let mut rgb = Vec::with_capacity(w * h);
    let mut labels = Vec::with_capacity(w * h);
    for hit in &hits {
        let (color, label) = match hit {
            Some(hit) => (hit.color, hit.label),
            None => (spec.sky, Label::Sky),
        };
        labels.push(label);
        let mut px = [0u8; 3];
        for (c, v) in px.iter_mut().zip(color) {
            *c = (v * 255.0 + img_noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
        }
        rgb.push(px);
        let dropped = spec.noise.dropout > 0.0 && rng.random::<f64>() < spec.noise.dropout;
        let z = match hit {
            Some(hit) if !dropped && hit.t <= spec.noise.max_depth => {
                let inv = 1.0 / hit.t + inv_noise.sample(&mut rng);
                if inv > 0.0 {
                    (1.0 / inv) as f32
                } else {
                    0.0
                }
            }
            _ => 0.0,
        };
        depth.push(z);
    }

    let factor = w / spec.detector_size.0;
    let gt = GroundTruth {
        trail: block_majority(&labels, w, factor, spec.detector_size, Label::Trail),
        obstacles: block_majority(&labels, w, factor, spec.detector_size, Label::Obstacle),
        plane: [0.0, -1.0, 0.0, 0.0],
        pitch_deg: cam.pitch_deg,
    };
    let kf = Keyframe {
        index: i,
        rgb: Grid::from_vec(w, h, rgb),
        depth: Grid::from_vec(w, h, depth),
        pose: cam.pose,
        intrinsics: *k,
    };
    (kf, gt)
}

pub fn render_sequence(spec: &SceneSpec) -> Result<Vec<(Keyframe, GroundTruth)>, SpecError> {
    spec.validate()?;
    Ok((0..spec.camera_path.len()).map(|i| render_frame(spec, i)).collect())
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::geom::{backproject, Intrinsics};

    fn flat_spec(height: f64, pitch: f64) -> SceneSpec {
        SceneSpec {
            name: "flat".into(),
            intrinsics: Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap(),
            detector_size: (80, 60),
            trail: TrailSpec { centerline: vec![[0.0, -10.0], [0.0, 200.0]], width: 1.2, albedo: [0.6, 0.5, 0.4] },
            terrain: TerrainSpec { albedo: [0.3, 0.35, 0.2], texture_amplitude: 0.3, texture_scale: 0.3, undulation: None },
            sky: [0.7, 0.8, 0.95],
            obstacles: vec![],
            shrubs: vec![],
            distractors: vec![],
            camera_path: vec![CameraFrame { pose: camera_pose(Vector3::new(0.0, -height, 0.0), 0.0, pitch), pitch_deg: pitch }],
            noise: NoiseSpec { inverse_depth_sigma: 0.0, dropout: 0.0, image_sigma: 0.0, max_depth: f64::INFINITY },
            seed: 3,
        }
    }

    #[test]
    fn ground_range_matches_analytic() {
        let spec = flat_spec(2.0, 0.0);
        let (kf, _) = render_frame(&spec, 0);
        let k = spec.intrinsics;
        let u = 320usize;
        for v in 241..480 {
            let d = *kf.depth.get(u, v) as f64;
            let p = backproject(u as f64 + 0.5, v as f64 + 0.5, d, &k).unwrap();
            // angle between the pixel ray and the ground
            let ray = Vector3::new((u as f64 + 0.5 - k.cx) / k.fx, (v as f64 + 0.5 - k.cy) / k.fy, 1.0);
            let angle = (ray.y / ray.norm()).asin();
            let expected = 2.0 / angle.sin();
            assert!((p.norm() - expected).abs() / expected < 1e-6, "row {v}: {} vs {expected}", p.norm());
        }
        // sky above the horizon
        assert_eq!(*kf.depth.get(u, 100), 0.0);
    }

    #[test]
    fn depth_equals_analytic_everywhere() {
        let spec = flat_spec(1.5, 12.0);
        let (kf, _) = render_frame(&spec, 0);
        let k = spec.intrinsics;
        let pose = spec.camera_path[0].pose;
        for v in (0..480).step_by(7) {
            for u in (0..640).step_by(5) {
                let ray = pose.rotation() * Vector3::new((u as f64 + 0.5 - k.cx) / k.fx, (v as f64 + 0.5 - k.cy) / k.fy, 1.0);
                let d = *kf.depth.get(u, v) as f64;
                if ray.y > 0.0 {
                    let t = 1.5 / ray.y;
                    assert!((d - t).abs() <= 1e-6 * t.max(1.0) + t * 1e-7, "{u},{v}: {d} vs {t}");
                } else {
                    assert_eq!(d, 0.0);
                }
            }
        }
    }

    #[test]
    fn cylinder_silhouette_is_disjoint_from_trail() {
        let mut spec = flat_spec(1.5, 8.0);
        spec.obstacles.push(Cylinder { center: [2.0, 6.0], radius: 0.3, height: 4.0, albedo: [0.3, 0.2, 0.1] });
        let (_, gt) = render_frame(&spec, 0);
        let obs = gt.obstacles.data().iter().filter(|&&b| b).count();
        assert!(obs > 0);
        assert!(gt.trail.data().iter().zip(gt.obstacles.data()).all(|(a, b)| !(a & b)));
        assert!(gt.trail.data().iter().any(|&b| b));
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut spec = flat_spec(1.5, 8.0);
        spec.noise = NoiseSpec { inverse_depth_sigma: 0.001, dropout: 0.2, image_sigma: 4.0, max_depth: 30.0 };
        spec.obstacles.push(Cylinder { center: [-2.0, 5.0], radius: 0.25, height: 3.0, albedo: [0.3, 0.2, 0.1] });
        assert_eq!(render_frame(&spec, 0), render_frame(&spec, 0));
    }

    #[test]
    fn ground_points_stay_near_plane() {
        let mut spec = flat_spec(1.5, 10.0);
        let sigma_inv = 0.0005;
        spec.noise = NoiseSpec { inverse_depth_sigma: sigma_inv, dropout: 0.0, image_sigma: 0.0, max_depth: 30.0 };
        let (kf, _) = render_frame(&spec, 0);
        let world = crate::geom::transform_cloud(&kf.local_cloud(2), &kf.pose);
        let mut far = 0usize;
        for p in &world.points {
            // one standard deviation of metric depth noise at this range
            let z = p.position.z.max(1.0);
            let metric = sigma_inv * z * z;
            if p.position.y.abs() > 4.0 * metric {
                far += 1;
            }
        }
        assert!((far as f64) < 0.001 * world.len() as f64 + 1.0, "{far} of {}", world.len());
    }

    #[test]
    fn undulating_ground_is_hit_exactly() {
        let mut spec = flat_spec(1.5, 10.0);
        spec.terrain.undulation = Some(Undulation { amplitude: 0.15, wavelength: 6.0 });
        let (kf, _) = render_frame(&spec, 0);
        let world = crate::geom::transform_cloud(&kf.local_cloud(8), &kf.pose);
        assert!(world.len() > 1000);
        for p in &world.points {
            let g = spec.terrain.ground_y(p.position.x, p.position.z);
            assert!((p.position.y - g).abs() < 1e-4, "{} vs {g}", p.position.y);
        }
    }

    #[test]
    fn camera_below_ground_is_rejected() {
        let mut spec = flat_spec(1.5, 0.0);
        spec.camera_path[0].pose = camera_pose(Vector3::new(0.0, 0.5, 0.0), 0.0, 0.0);
        assert_eq!(render_sequence(&spec).unwrap_err(), SpecError::CameraBelowGround(0));
    }
}
