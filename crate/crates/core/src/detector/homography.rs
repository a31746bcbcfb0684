use nalgebra::{Matrix3, Vector3};

use crate::cloud::GroundPlane;
use crate::geom::{Intrinsics, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub matrix: Matrix3<f64>,
    /// Set when the plane passes through the camera centre and the identity
    /// was substituted.
    pub degenerate: bool,
}

impl Homography {
    pub fn identity() -> Self {
        Self { matrix: Matrix3::identity(), degenerate: false }
    }

    /// Maps a pixel; `None` when it lands at infinity.
    pub fn apply(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let p = self.matrix * Vector3::new(u, v, 1.0);
        if p.z.abs() < 1e-12 {
            return None;
        }
        Some((p.x / p.z, p.y / p.z))
    }

    pub fn inverse(&self) -> Option<Homography> {
        self.matrix.try_inverse().map(|m| Homography { matrix: normalized(m), degenerate: self.degenerate })
    }
}

fn normalized(m: Matrix3<f64>) -> Matrix3<f64> {
    if m[(2, 2)].abs() > 1e-12 {
        m / m[(2, 2)]
    } else {
        m
    }
}

/// Ground-plane homography taking previous-frame pixels to current-frame
/// pixels. `plane` is expressed in the previous camera's frame.
pub fn pose_homography(prev: &Pose, cur: &Pose, plane: &GroundPlane, k: &Intrinsics) -> Homography {
    if plane.d.abs() < 1e-6 {
        return Homography { matrix: Matrix3::identity(), degenerate: true };
    }
    let rc_t = cur.rotation().transpose();
    let r_rel = rc_t * prev.rotation();
    let t_rel = rc_t * (prev.translation() - cur.translation());
    let h = k.matrix() * (r_rel - t_rel * plane.normal().transpose() / plane.d) * k.inverse_matrix();
    Homography { matrix: normalized(h), degenerate: false }
}

/// Re-expresses a full-resolution homography at `1/factor` resolution.
pub fn scale_homography(h: &Homography, factor: f64) -> Homography {
    let s = Matrix3::new(1.0 / factor, 0.0, 0.0, 0.0, 1.0 / factor, 0.0, 0.0, 0.0, 1.0);
    let s_inv = Matrix3::new(factor, 0.0, 0.0, 0.0, factor, 0.0, 0.0, 0.0, 1.0);
    Homography { matrix: normalized(s * h.matrix * s_inv), degenerate: h.degenerate }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::project_point;
    use nalgebra::Rotation3;

    fn vga() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    /// Camera 1.5 m above y = 0 world ground; the plane in the camera frame.
    fn level_plane() -> GroundPlane {
        GroundPlane::from_normal_offset(Vector3::new(0.0, -1.0, 0.0), 1.5).unwrap()
    }

    fn ground_points() -> Vec<Vector3<f64>> {
        (0..50).map(|i| Vector3::new(-2.0 + (i % 10) as f64 * 0.4, 0.0, 4.0 + (i / 10) as f64 * 1.5)).collect()
    }

    /// Projects world points through both poses and compares with the
    /// homography's transfer.
    fn max_transfer_error(prev: &Pose, cur: &Pose, plane: &GroundPlane) -> f64 {
        let k = vga();
        let h = pose_homography(prev, cur, plane, &k);
        let mut worst: f64 = 0.0;
        let mut used = 0;
        for w in ground_points() {
            let (Some(a), Some(b)) =
                (project_point(&prev.inverse().apply(&w), &k), project_point(&cur.inverse().apply(&w), &k))
            else {
                continue;
            };
            let (u, v) = h.apply(a.u, a.v).unwrap();
            worst = worst.max(((u - b.u).powi(2) + (v - b.v).powi(2)).sqrt());
            used += 1;
        }
        assert!(used >= 10, "too few visible points: {used}");
        worst
    }

    #[test]
    fn identical_poses_give_identity() {
        let p = Pose::from_translation(Vector3::new(0.0, -1.5, 0.0));
        let h = pose_homography(&p, &p, &level_plane(), &vga());
        assert!((h.matrix - Matrix3::identity()).abs().max() < 1e-9);
        assert!(!h.degenerate);
    }

    #[test]
    fn roll_matches_projection() {
        let prev = Pose::from_translation(Vector3::new(0.0, -1.5, 0.0));
        let roll = Rotation3::from_axis_angle(&Vector3::z_axis(), 5f64.to_radians()).into_inner();
        let cur = Pose::new(roll, Vector3::new(0.0, -1.5, 0.0)).unwrap();
        assert!(max_transfer_error(&prev, &cur, &level_plane()) < 0.1);
        let h = pose_homography(&prev, &cur, &level_plane(), &vga());
        let krk = vga().matrix() * roll.transpose() * vga().inverse_matrix();
        assert!((h.matrix - krk / krk[(2, 2)]).abs().max() < 1e-9);
    }

    #[test]
    fn forward_translation_matches_projection() {
        let prev = Pose::from_translation(Vector3::new(0.0, -1.5, 0.0));
        let cur = Pose::from_translation(Vector3::new(0.1, -1.5, 0.6));
        assert!(max_transfer_error(&prev, &cur, &level_plane()) < 0.5);
    }

    #[test]
    fn plane_through_centre_is_flagged() {
        let p = Pose::identity();
        let plane = GroundPlane::from_normal_offset(Vector3::new(0.0, -1.0, 0.0), 0.0).unwrap();
        let h = pose_homography(&p, &p, &plane, &vga());
        assert!(h.degenerate);
        assert_eq!(h.matrix, Matrix3::identity());
    }

    #[test]
    fn scaling_commutes_with_pixel_scaling() {
        let prev = Pose::from_translation(Vector3::new(0.0, -1.5, 0.0));
        let cur = Pose::from_translation(Vector3::new(0.05, -1.5, 0.4));
        let h = pose_homography(&prev, &cur, &level_plane(), &vga());
        let hd = scale_homography(&h, 8.0);
        let (u, v) = h.apply(300.0, 400.0).unwrap();
        let (ud, vd) = hd.apply(300.0 / 8.0, 400.0 / 8.0).unwrap();
        assert!((ud * 8.0 - u).abs() < 1e-9 && (vd * 8.0 - v).abs() < 1e-9);
    }
}
