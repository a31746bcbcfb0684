use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::FilterParams;
use crate::geom::ColoredPointCloud;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlaneError {
    #[error("too few plane candidates ({0})")]
    TooFewCandidates(usize),
    #[error("best plane hypothesis has too few inliers ({0})")]
    TooFewInliers(usize),
}

/// Plane `a x + b y + c z + d = 0` with unit normal pointing to the camera's
/// up half-space (negative y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub inlier_mean_dist: f64,
    pub inlier_count: usize,
}

impl GroundPlane {
    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(self.a, self.b, self.c)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Builds a plane from a (not necessarily unit) normal and offset,
    /// normalising and orienting it upward.
    pub fn from_normal_offset(n: Vector3<f64>, d: f64) -> Option<Self> {
        let len = n.norm();
        if !(len > 1e-12) {
            return None;
        }
        let (mut n, mut d) = (n / len, d / len);
        if points_down(&n) {
            n = -n;
            d = -d;
        }
        Some(Self { a: n.x, b: n.y, c: n.z, d, inlier_mean_dist: 0.0, inlier_count: 0 })
    }
}

fn points_down(n: &Vector3<f64>) -> bool {
    if n.y != 0.0 {
        n.y > 0.0
    } else if n.z != 0.0 {
        n.z > 0.0
    } else {
        n.x > 0.0
    }
}

/// Signed distance; positive on the up side of the plane.
pub fn point_plane_distance(p: &Vector3<f64>, plane: &GroundPlane) -> f64 {
    plane.a * p.x + plane.b * p.y + plane.c * p.z + plane.d
}

/// RANSAC ground-plane fit over upward-facing candidates. A point supports a
/// hypothesis when it lies within `ransac_inlier_gamma` of it and its normal
/// is within `normal_up_max_angle` of the plane normal.
pub fn fit_ground_plane(
    candidates: &ColoredPointCloud,
    normals: &[Vector3<f64>],
    params: &FilterParams,
    rng_seed: u64,
) -> Result<GroundPlane, PlaneError> {
    assert_eq!(candidates.len(), normals.len(), "one normal per candidate");
    let pts: Vec<Vector3<f64>> = candidates.positions().copied().collect();
    fit_plane_ransac(
        &pts,
        Some(normals),
        params.ransac_iterations,
        params.ransac_inlier_gamma,
        params.normal_up_max_angle,
        rng_seed,
    )
}

/// Plain 3-point RANSAC with least-squares refinement. Normals, when given,
/// gate inliers by orientation.
pub fn fit_plane_ransac(
    pts: &[Vector3<f64>],
    normals: Option<&[Vector3<f64>]>,
    iterations: usize,
    gamma: f64,
    max_angle_deg: f64,
    rng_seed: u64,
) -> Result<GroundPlane, PlaneError> {
    if pts.len() < 3 {
        return Err(PlaneError::TooFewCandidates(pts.len()));
    }
    let cos_max = max_angle_deg.to_radians().cos();
    let is_inlier = |plane: &GroundPlane, i: usize| -> Option<f64> {
        let dist = point_plane_distance(&pts[i], plane).abs();
        if dist >= gamma {
            return None;
        }
        if let Some(ns) = normals {
            if ns[i].dot(&plane.normal()).abs() < cos_max {
                return None;
            }
        }
        Some(dist)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<(usize, f64, GroundPlane)> = None;
    for _ in 0..iterations {
        let sample = rand::seq::index::sample(&mut rng, pts.len(), 3);
        let (p0, p1, p2) = (pts[sample.index(0)], pts[sample.index(1)], pts[sample.index(2)]);
        let n = (p1 - p0).cross(&(p2 - p0));
        let Some(hyp) = GroundPlane::from_normal_offset(n, -n.dot(&p0)) else {
            continue;
        };
        let mut count = 0usize;
        let mut sum = 0.0;
        for i in 0..pts.len() {
            if let Some(d) = is_inlier(&hyp, i) {
                count += 1;
                sum += d;
            }
        }
        if count == 0 {
            continue;
        }
        let mean = sum / count as f64;
        let better = match &best {
            None => true,
            Some((bc, bm, _)) => count > *bc || (count == *bc && mean < *bm),
        };
        if better {
            best = Some((count, mean, hyp));
        }
    }

    let Some((count, _, hyp)) = best else {
        return Err(PlaneError::TooFewInliers(0));
    };
    if count < 3 {
        return Err(PlaneError::TooFewInliers(count));
    }
    let inliers: Vec<usize> = (0..pts.len()).filter(|&i| is_inlier(&hyp, i).is_some()).collect();
    let mut plane = least_squares_plane(inliers.iter().map(|&i| &pts[i])).unwrap_or(hyp);
    plane.inlier_count = inliers.len();
    plane.inlier_mean_dist =
        inliers.iter().map(|&i| point_plane_distance(&pts[i], &plane).abs()).sum::<f64>() / inliers.len() as f64;
    Ok(plane)
}

/// Total least squares plane through a point set.
fn least_squares_plane<'a>(pts: impl Iterator<Item = &'a Vector3<f64>> + Clone) -> Option<GroundPlane> {
    let mut n = 0usize;
    let mut centroid = Vector3::zeros();
    for p in pts.clone() {
        centroid += p;
        n += 1;
    }
    if n < 3 {
        return None;
    }
    centroid /= n as f64;
    let mut scatter = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if eig.eigenvalues[order[1]] <= 1e-12 * eig.eigenvalues[order[2]].max(1e-300) {
        return None;
    }
    let normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned();
    GroundPlane::from_normal_offset(normal, -normal.dot(&centroid))
}

/// Points lying more than `υ + inlier_mean_dist` above the plane.
pub fn segment_obstacles(
    obstacle_candidates: &ColoredPointCloud,
    plane: &GroundPlane,
    params: &FilterParams,
) -> ColoredPointCloud {
    let threshold = params.obstacle_margin_upsilon + plane.inlier_mean_dist;
    let pts = &obstacle_candidates.points;
    obstacle_candidates.select(|i| point_plane_distance(&pts[i].position, plane) > threshold)
}

/// Camera pitch relative to a camera-frame ground plane, in degrees;
/// positive when the optical axis points down into the plane.
pub fn estimate_pitch(plane: &GroundPlane) -> f64 {
    (-plane.c).clamp(-1.0, 1.0).asin().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{ColoredPoint, Frame};
    use crate::test_support::{lsq_plane_oracle, noisy_plane_with_cylinders};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn cloud_of(pts: &[Vector3<f64>]) -> ColoredPointCloud {
        ColoredPointCloud::from_points(pts.iter().map(|&p| ColoredPoint { position: p, color: [0; 3] }).collect(), Frame::Local(0))
    }

    fn plane_at(b: f64, d: f64, mean: f64) -> GroundPlane {
        GroundPlane { a: 0.0, b, c: 0.0, d, inlier_mean_dist: mean, inlier_count: 3 }
    }

    #[test]
    fn distance_examples() {
        let plane = plane_at(-1.0, -0.5, 0.0);
        assert_eq!(point_plane_distance(&Vector3::new(0.0, -2.0, 1.0), &plane), 1.5);
        assert!(point_plane_distance(&Vector3::new(3.0, -0.5, 7.0), &plane).abs() < 1e-12);
    }

    #[test]
    fn distance_matches_projection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = Vector3::new(0.3, -0.9, 0.2).normalize();
        let origin = Vector3::new(0.5, 1.2, 3.0);
        let plane = GroundPlane::from_normal_offset(n, -n.dot(&origin)).unwrap();
        for _ in 0..100 {
            let p = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            // project onto the plane, then measure along the normal
            let foot = p - n * (p - origin).dot(&n);
            let oracle = (p - foot).norm() * (p - foot).dot(&n).signum();
            assert!((point_plane_distance(&p, &plane) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn three_points_give_their_plane() {
        let pts = [Vector3::new(0.0, 1.0, 1.0), Vector3::new(1.0, 1.0, 1.0), Vector3::new(0.0, 1.0, 2.0)];
        let normals = [Vector3::new(0.0, -1.0, 0.0); 3];
        let plane = fit_plane_ransac(&pts, Some(&normals), 10, 0.05, 30.0, 1).unwrap();
        assert!((plane.normal() - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((plane.d - 1.0).abs() < 1e-12);
        assert!(plane.inlier_mean_dist < 1e-12);
        assert_eq!(plane.inlier_count, 3);
    }

    #[test]
    fn too_few_candidates_fail() {
        let pts = [Vector3::zeros(), Vector3::x()];
        assert_eq!(fit_plane_ransac(&pts, None, 10, 0.05, 30.0, 1), Err(PlaneError::TooFewCandidates(2)));
        let line: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(fit_plane_ransac(&line, None, 10, 0.05, 30.0, 1), Err(PlaneError::TooFewInliers(_))));
    }

    #[test]
    fn noisy_plane_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let clean: Vec<Vector3<f64>> =
            (0..1000).map(|_| Vector3::new(rng.random_range(-2.0..2.0), -0.5, rng.random_range(1.0..5.0))).collect();
        let noisy: Vec<Vector3<f64>> = clean.iter().map(|p| p + Vector3::new(0.0, noise.sample(&mut rng), 0.0)).collect();
        let normals = vec![Vector3::new(0.0, -1.0, 0.0); noisy.len()];
        let params = FilterParams::default();
        let plane = fit_ground_plane(&cloud_of(&noisy), &normals, &params, 5).unwrap();
        let (on, od) = lsq_plane_oracle(&clean);
        assert!(plane.normal().dot(&on).clamp(-1.0, 1.0).acos().to_degrees() < 1.0);
        assert!((plane.d - od).abs() < 0.02);
        assert!((plane.d - (-0.5)).abs() < 0.02);
    }

    #[test]
    fn plane_with_clutter_recovered() {
        let scene = noisy_plane_with_cylinders(33, 600, 400, 0.01);
        let params = FilterParams::default();
        let split = super::super::don_and_up_filter(&scene.cloud, &params);
        let plane = fit_ground_plane(&split.plane_candidates, &split.plane_normals, &params, 3).unwrap();
        assert!(plane.normal().dot(&scene.normal).acos().to_degrees() < 2.0);
        // inliers are within gamma of the plane; clutter sits well above it
        for (p, is_plane) in scene.cloud.points.iter().zip(&scene.labels) {
            let d = point_plane_distance(&p.position, &plane).abs();
            if !is_plane && d < params.ransac_inlier_gamma {
                panic!("clutter point {d} m from plane counted as inlier");
            }
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let scene = noisy_plane_with_cylinders(4, 300, 200, 0.01);
        let pts: Vec<_> = scene.cloud.positions().copied().collect();
        let a = fit_plane_ransac(&pts, None, 50, 0.05, 30.0, 77).unwrap();
        let b = fit_plane_ransac(&pts, None, 50, 0.05, 30.0, 77).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn obstacle_threshold() {
        let plane = plane_at(-1.0, -0.5, 0.02);
        let params = FilterParams { obstacle_margin_upsilon: 0.1, ..FilterParams::default() };
        let cands = cloud_of(&[
            Vector3::new(0.0, -0.5, 2.0),
            Vector3::new(0.0, -1.0, 2.0),
            Vector3::new(0.0, -0.55, 2.0),
        ]);
        let obs = segment_obstacles(&cands, &plane, &params);
        assert_eq!(obs.len(), 1);
        assert_eq!(obs.points[0].position.y, -1.0);
    }

    #[test]
    fn obstacles_exclude_inliers() {
        let scene = noisy_plane_with_cylinders(8, 500, 300, 0.01);
        let params = FilterParams { obstacle_margin_upsilon: 0.0, ..FilterParams::default() };
        let split = super::super::don_and_up_filter(&scene.cloud, &params);
        let plane = fit_ground_plane(&split.plane_candidates, &split.plane_normals, &params, 1).unwrap();
        let obs = segment_obstacles(&split.obstacle_candidates, &plane, &params);
        for p in &obs.points {
            assert!(point_plane_distance(&p.position, &plane) > plane.inlier_mean_dist);
        }
    }

    #[test]
    fn pitch_examples() {
        let level = GroundPlane::from_normal_offset(Vector3::new(0.0, -1.0, 0.0), 1.5).unwrap();
        assert_eq!(estimate_pitch(&level), 0.0);
        let t = 10f64.to_radians();
        let down = GroundPlane::from_normal_offset(Vector3::new(0.0, -t.cos(), -t.sin()), 1.5).unwrap();
        assert!((estimate_pitch(&down) - 10.0).abs() < 1e-9);
        let up = GroundPlane::from_normal_offset(Vector3::new(0.0, -t.cos(), t.sin()), 1.5).unwrap();
        assert!((estimate_pitch(&up) + 10.0).abs() < 1e-9);
    }
}
