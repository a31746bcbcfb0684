use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::{FilterParams, PointIndex};
use crate::geom::ColoredPointCloud;

/// Unit surface normal, or `None` when the neighbourhood is too small or
/// degenerate (collinear) to define one.
pub type Normal = Option<Vector3<f64>>;

/// The camera-frame up direction.
pub(crate) const UP: Vector3<f64> = Vector3::new(0.0, -1.0, 0.0);

pub fn estimate_normals(c: &ColoredPointCloud, radius: f64) -> Vec<Normal> {
    let index = PointIndex::build(c);
    estimate_normals_indexed(c, &index, radius)
}

pub(crate) fn estimate_normals_indexed(c: &ColoredPointCloud, index: &PointIndex, radius: f64) -> Vec<Normal> {
    c.points
        .par_iter()
        .map(|p| {
            let nbrs = index.within(&p.position, radius);
            neighbourhood_normal(nbrs.iter().map(|&j| &c.points[j].position))
        })
        .collect()
}

/// Smallest-eigenvalue eigenvector of the neighbourhood covariance, flipped
/// so its y component is not positive.
fn neighbourhood_normal<'a>(pts: impl Iterator<Item = &'a Vector3<f64>> + Clone) -> Normal {
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
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, hi) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(hi > 0.0) || mid <= 1e-10 * hi {
        return None;
    }
    let mut normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned();
    normal.normalize_mut();
    if normal.y > 0.0 {
        normal = -normal;
    }
    Some(normal)
}

/// Output of [`don_and_up_filter`].
#[derive(Debug, Clone)]
pub struct DonSplit {
    /// Scale-stable, upward-facing points used to fit the ground plane.
    pub plane_candidates: ColoredPointCloud,
    /// Normals at `normal_radius` for each plane candidate.
    pub plane_normals: Vec<Vector3<f64>>,
    /// Points eligible for obstacle segmentation; normal orientation and DoN
    /// magnitude only prune the plane candidates.
    pub obstacle_candidates: ColoredPointCloud,
    /// Per-input-point DoN magnitude (`None` for null normals).
    pub don_magnitude: Vec<Option<f64>>,
}

/// Difference of Normals split. The DoN vector is `(n_small - n_large) / 2`
/// with `n_large` sign-aligned to `n_small`, so near-horizontal normals whose
/// up/down orientation is ambiguous do not register as scale-unstable.
pub fn don_and_up_filter(c: &ColoredPointCloud, params: &FilterParams) -> DonSplit {
    let index = PointIndex::build(c);
    let small = estimate_normals_indexed(c, &index, params.don_radius_small);
    let large = estimate_normals_indexed(c, &index, params.don_radius_large);
    let fit = if params.normal_radius == params.don_radius_large {
        None
    } else if params.normal_radius == params.don_radius_small {
        Some(small.clone())
    } else {
        Some(estimate_normals_indexed(c, &index, params.normal_radius))
    };
    let fit = fit.as_ref().unwrap_or(&large);
    let cos_up = params.normal_up_max_angle.to_radians().cos();

    let mut don_magnitude = Vec::with_capacity(c.len());
    let mut keep = Vec::with_capacity(c.len());
    for i in 0..c.len() {
        let don = match (small[i], large[i]) {
            (Some(s), Some(l)) => {
                let l = if s.dot(&l) < 0.0 { -l } else { l };
                Some(((s - l) * 0.5).norm())
            }
            _ => None,
        };
        don_magnitude.push(don);
        let up_ok = large[i].is_some_and(|l| l.dot(&UP) >= cos_up);
        let stable = don.is_some_and(|m| m <= params.don_magnitude_max);
        keep.push(up_ok && stable && fit[i].is_some());
    }
    let plane_candidates = c.select(|i| keep[i]);
    let plane_normals = (0..c.len()).filter(|&i| keep[i]).map(|i| fit[i].unwrap()).collect();
    DonSplit { plane_candidates, plane_normals, obstacle_candidates: c.clone(), don_magnitude }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{ColoredPoint, Frame};

    fn plane_cloud(n: usize, y: f64) -> ColoredPointCloud {
        let pts = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| ColoredPoint {
                position: Vector3::new(i as f64 * 0.05 - 1.0, y, j as f64 * 0.05 + 1.0),
                color: [0; 3],
            })
            .collect();
        ColoredPointCloud::from_points(pts, Frame::Local(0))
    }

    pub(crate) fn cylinder_cloud(radius: f64, centre: (f64, f64), rings: usize, per_ring: usize) -> (ColoredPointCloud, Vec<Vector3<f64>>) {
        let mut pts = Vec::new();
        let mut radial = Vec::new();
        for r in 0..rings {
            let y = -0.05 * r as f64;
            for s in 0..per_ring {
                let a = s as f64 / per_ring as f64 * std::f64::consts::TAU;
                let dir = Vector3::new(a.cos(), 0.0, a.sin());
                pts.push(ColoredPoint {
                    position: Vector3::new(centre.0 + radius * a.cos(), y, centre.1 + radius * a.sin()),
                    color: [0; 3],
                });
                radial.push(dir);
            }
        }
        (ColoredPointCloud::from_points(pts, Frame::Local(0)), radial)
    }

    #[test]
    fn plane_normals_point_up() {
        let c = plane_cloud(30, 0.0);
        let normals = estimate_normals(&c, 0.2);
        for n in normals {
            let n = n.expect("normal");
            assert!(n.dot(&UP).acos().to_degrees() < 1.0);
        }
    }

    #[test]
    fn cylinder_normals_are_radial() {
        let (c, radial) = cylinder_cloud(0.2, (0.0, 3.0), 30, 40);
        let normals = estimate_normals(&c, 0.07);
        for (n, r) in normals.iter().zip(&radial) {
            let n = n.expect("normal");
            let angle = n.dot(r).abs().min(1.0).acos().to_degrees();
            assert!(angle < 5.0, "angle {angle}");
        }
    }

    #[test]
    fn isolated_and_collinear_points_have_no_normal() {
        let lone = ColoredPointCloud::from_points(
            vec![ColoredPoint { position: Vector3::new(0.0, 0.0, 1.0), color: [0; 3] }],
            Frame::Local(0),
        );
        assert_eq!(estimate_normals(&lone, 0.5), vec![None]);
        let line = ColoredPointCloud::from_points(
            (0..10).map(|i| ColoredPoint { position: Vector3::new(i as f64 * 0.01, 0.0, 1.0), color: [0; 3] }).collect(),
            Frame::Local(0),
        );
        assert!(estimate_normals(&line, 0.5).iter().all(Option::is_none));
    }

    #[test]
    fn flat_plane_is_all_candidates() {
        let c = plane_cloud(30, 0.5);
        let split = don_and_up_filter(&c, &FilterParams::default());
        assert_eq!(split.plane_candidates.len(), c.len());
        assert_eq!(split.plane_normals.len(), c.len());
    }

    #[test]
    fn cylinder_wall_is_excluded_from_plane_candidates() {
        let (c, _) = cylinder_cloud(0.2, (0.0, 3.0), 30, 40);
        let split = don_and_up_filter(&c, &FilterParams::default());
        assert!(split.plane_candidates.is_empty());
        assert_eq!(split.obstacle_candidates.len(), c.len());
    }
}
