//! Deterministic synthetic keyframe sequences with ground truth.
//!
//! World frame: y points down, the nominal ground is `y = 0`, scenes are
//! laid out in the (x, z) ground coordinates.

mod clutter;
mod render;
mod suites;

pub use clutter::{noisy_plane_with_cylinders, LabeledCloud};
pub use render::{render_frame, render_sequence};
pub use suites::{standard_suites, standard_suites_seeded, suite, SUITE_NAMES};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geom::{Intrinsics, Pose};
use crate::raster::Grid;

pub type Albedo = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct TrailSpec {
    /// Piecewise-linear centreline in (x, z) ground coordinates.
    pub centerline: Vec<[f64; 2]>,
    pub width: f64,
    pub albedo: Albedo,
}

impl TrailSpec {
    /// Ground distance from `(x, z)` to the centreline.
    pub fn distance(&self, x: f64, z: f64) -> f64 {
        polyline_distance(&self.centerline, x, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Undulation {
    pub amplitude: f64,
    pub wavelength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSpec {
    pub albedo: Albedo,
    /// Relative albedo modulation of the value-noise texture.
    pub texture_amplitude: f64,
    /// Texture cell size, meters.
    pub texture_scale: f64,
    pub undulation: Option<Undulation>,
}

impl TerrainSpec {
    /// Ground surface height as a world y coordinate (negative = raised).
    pub fn ground_y(&self, x: f64, z: f64) -> f64 {
        match self.undulation {
            None => 0.0,
            Some(u) => {
                let k = std::f64::consts::TAU / u.wavelength;
                -u.amplitude * (k * z).sin() * (0.7 * k * x).cos()
            }
        }
    }
}

/// Vertical cylinder standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
    pub albedo: Albedo,
}

/// Axis-aligned box standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxShrub {
    pub center: [f64; 2],
    /// Half extents along x and z.
    pub half_size: [f64; 2],
    pub height: f64,
    pub albedo: Albedo,
}

/// High-contrast rectangular patch off the trail. With `height > 0` it is a
/// raised slab that protrudes from the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distractor {
    pub center: [f64; 2],
    pub half_size: [f64; 2],
    pub height: f64,
    pub albedo: Albedo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFrame {
    pub pose: Pose,
    pub pitch_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation of the additive Gaussian on inverse depth, 1/m.
    pub inverse_depth_sigma: f64,
    pub dropout: f64,
    /// Per-channel Gaussian image noise in 8-bit levels.
    pub image_sigma: f64,
    /// Depths beyond this are reported missing.
    pub max_depth: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { inverse_depth_sigma: 0.0005, dropout: 0.0, image_sigma: 3.0, max_depth: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub intrinsics: Intrinsics,
    pub detector_size: (usize, usize),
    pub trail: TrailSpec,
    pub terrain: TerrainSpec,
    pub sky: Albedo,
    pub obstacles: Vec<Cylinder>,
    pub shrubs: Vec<BoxShrub>,
    pub distractors: Vec<Distractor>,
    pub camera_path: Vec<CameraFrame>,
    pub noise: NoiseSpec,
    pub seed: u64,
}

/// Noise-free per-frame labels at detector resolution, plus the world plane
/// (`y = 0`, normal up) and the camera pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub trail: Grid<bool>,
    pub obstacles: Grid<bool>,
    pub plane: [f64; 4],
    pub pitch_deg: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("trail width must be positive")]
    TrailWidth,
    #[error("trail centreline needs at least two vertices")]
    Centerline,
    #[error("camera path is empty")]
    EmptyPath,
    #[error("depth dropout must lie in [0, 1)")]
    Dropout,
    #[error("camera {0} is not above the ground")]
    CameraBelowGround(usize),
    #[error("{0} intersects the trail corridor")]
    InCorridor(String),
    #[error("detector size must divide the image size evenly")]
    DetectorSize,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.trail.width > 0.0) {
            return Err(SpecError::TrailWidth);
        }
        if self.trail.centerline.len() < 2 {
            return Err(SpecError::Centerline);
        }
        if self.camera_path.is_empty() {
            return Err(SpecError::EmptyPath);
        }
        if !(0.0..1.0).contains(&self.noise.dropout) {
            return Err(SpecError::Dropout);
        }
        let (w, h) = (self.intrinsics.width as usize, self.intrinsics.height as usize);
        let (dw, dh) = self.detector_size;
        if dw == 0 || dh == 0 || w % dw != 0 || h % dh != 0 || w / dw != h / dh {
            return Err(SpecError::DetectorSize);
        }
        for (i, cam) in self.camera_path.iter().enumerate() {
            let t = cam.pose.translation();
            if !(t.y < self.terrain.ground_y(t.x, t.z)) {
                return Err(SpecError::CameraBelowGround(i));
            }
        }
        let half = self.trail.width / 2.0;
        for (i, c) in self.obstacles.iter().enumerate() {
            if self.trail.distance(c.center[0], c.center[1]) <= half + c.radius {
                return Err(SpecError::InCorridor(format!("cylinder {i}")));
            }
        }
        let rect_clear = |center: [f64; 2], hs: [f64; 2]| {
            let inside = |p: &[f64; 2]| (p[0] - center[0]).abs() <= hs[0] && (p[1] - center[1]).abs() <= hs[1];
            if self.trail.centerline.iter().any(inside) {
                return false;
            }
            // the corridor can only reach the rectangle through its boundary
            let steps = |len: f64| ((2.0 * len / 0.05).ceil() as usize).max(1);
            let (nx, nz) = (steps(hs[0]), steps(hs[1]));
            let edge_x = (0..=nx).map(|i| center[0] - hs[0] + 2.0 * hs[0] * i as f64 / nx as f64);
            let edge_z = (0..=nz).map(|i| center[1] - hs[1] + 2.0 * hs[1] * i as f64 / nz as f64);
            let clear = |x: f64, z: f64| self.trail.distance(x, z) > half;
            edge_x.clone().all(|x| clear(x, center[1] - hs[1]) && clear(x, center[1] + hs[1]))
                && edge_z.clone().all(|z| clear(center[0] - hs[0], z) && clear(center[0] + hs[0], z))
        };
        for (i, b) in self.shrubs.iter().enumerate() {
            if !rect_clear(b.center, b.half_size) {
                return Err(SpecError::InCorridor(format!("shrub {i}")));
            }
        }
        for (i, d) in self.distractors.iter().enumerate() {
            if !rect_clear(d.center, d.half_size) {
                return Err(SpecError::InCorridor(format!("distractor {i}")));
            }
        }
        Ok(())
    }
}

/// Camera-to-world pose at `position` looking along `yaw_deg` (0 = +z,
/// positive towards +x), pitched `pitch_deg` down.
pub fn camera_pose(position: Vector3<f64>, yaw_deg: f64, pitch_deg: f64) -> Pose {
    let (sy, cy) = yaw_deg.to_radians().sin_cos();
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    let z = Vector3::new(sy * cp, sp, cy * cp);
    let x = Vector3::new(cy, 0.0, -sy);
    let y = z.cross(&x);
    Pose::new(Matrix3::from_columns(&[x, y, z]), position).expect("constructed rotation is orthonormal")
}

/// Weber contrast of `albedo` against `background`, on mean luminance.
pub fn weber_contrast(albedo: Albedo, background: Albedo) -> f64 {
    let l = |a: Albedo| (a[0] + a[1] + a[2]) / 3.0;
    (l(albedo) - l(background)) / l(background)
}

fn polyline_distance(line: &[[f64; 2]], x: f64, z: f64) -> f64 {
    line.windows(2)
        .map(|s| {
            let (ax, az, bx, bz) = (s[0][0], s[0][1], s[1][0], s[1][1]);
            let (dx, dz) = (bx - ax, bz - az);
            let len2 = dx * dx + dz * dz;
            let t = if len2 > 0.0 { (((x - ax) * dx + (z - az) * dz) / len2).clamp(0.0, 1.0) } else { 0.0 };
            ((x - ax - t * dx).powi(2) + (z - az - t * dz).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}
