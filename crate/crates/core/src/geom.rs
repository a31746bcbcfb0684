//! Pinhole camera model, rigid poses and point-cloud containers.
//!
//! Camera frame convention: +z forward, +x right, +y down. Image rows grow
//! with +y, so "above the ground" is the negative-y half-space of a level
//! camera.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Orthonormality tolerance applied by [`Pose::new`].
pub const POSE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid intrinsics: {0}")]
    Intrinsics(String),
    #[error("rotation is not orthonormal (max |RᵀR - I| = {0:.3e})")]
    NotOrthonormal(f64),
    #[error("improper rotation (determinant {0:.6})")]
    ImproperRotation(f64),
    #[error("non-finite pose component")]
    NonFinite,
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeomError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeomError::Intrinsics("focal lengths must be positive".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(GeomError::Intrinsics(format!("cx {} outside [0, {})", self.cx, self.width)));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(GeomError::Intrinsics(format!("cy {} outside [0, {})", self.cy, self.height)));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Camera-to-world rigid transform `p_world = R * p_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Validates the rotation at [`POSE_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        Self::with_tolerance(rotation, translation, POSE_TOLERANCE)
    }

    pub fn with_tolerance(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tol: f64,
    ) -> Result<Self, GeomError> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let det = rotation.determinant();
        if det < 0.0 {
            return Err(GeomError::ImproperRotation(det));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if err > tol {
            return Err(GeomError::NotOrthonormal(err));
        }
        if (det - 1.0).abs() > tol {
            return Err(GeomError::ImproperRotation(det));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation: t }
    }

    /// Builds a pose from a row-major homogeneous 4×4 matrix.
    pub fn from_row_major(m: &[f64; 16], tol: f64) -> Result<Self, GeomError> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        Self::with_tolerance(rotation, translation, tol)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        invert_pose(self)
    }
}

pub fn invert_pose(s: &Pose) -> Pose {
    let rt = s.rotation.transpose();
    Pose { rotation: rt, translation: -(rt * s.translation) }
}

/// Pixel coordinates in continuous image space; pixel `(i, j)` covers
/// `[i, i+1) × [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn index(&self) -> (u32, u32) {
        (self.u.floor() as u32, self.v.floor() as u32)
    }
}

/// Projects a camera-frame point. Returns `None` when the point is behind
/// the camera or lands outside the raster.
pub fn project_point(p: &Vector3<f64>, k: &Intrinsics) -> Option<Pixel> {
    if !(p.z > 0.0) {
        return None;
    }
    let u = k.fx * p.x / p.z + k.cx;
    let v = k.fy * p.y / p.z + k.cy;
    if u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64 {
        Some(Pixel { u, v })
    } else {
        None
    }
}

/// Inverse of [`project_point`] for a known z-depth. `None` for missing depth.
pub fn backproject(u: f64, v: f64, depth: f64, k: &Intrinsics) -> Option<Vector3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return None;
    }
    Some(Vector3::new((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    pub position: Vector3<f64>,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Local(usize),
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColoredPointCloud {
    pub points: Vec<ColoredPoint>,
    pub frame: Frame,
}

impl ColoredPointCloud {
    pub fn new(frame: Frame) -> Self {
        Self { points: Vec::new(), frame }
    }

    pub fn from_points(points: Vec<ColoredPoint>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vector3<f64>> + '_ {
        self.points.iter().map(|p| &p.position)
    }

    /// Keeps the points whose index passes `keep`, preserving order.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> ColoredPointCloud {
        let points = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, p)| *p)
            .collect();
        ColoredPointCloud { points, frame: self.frame }
    }
}

/// Applies `s` to every point. The frame tag is left to the caller.
pub fn transform_cloud(c: &ColoredPointCloud, s: &Pose) -> ColoredPointCloud {
    let points = c
        .points
        .iter()
        .map(|p| ColoredPoint { position: s.apply(&p.position), color: p.color })
        .collect();
    ColoredPointCloud { points, frame: c.frame }
}
