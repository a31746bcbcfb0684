//! Point-cloud stage: keyframe accumulation, outlier and normal-based
//! filtering, ground-plane fitting, obstacle segmentation and projection of
//! obstacles into the detector's mask.

mod index;
mod mask;
mod normals;
mod outliers;
mod plane;
mod window;

pub use index::PointIndex;
pub use mask::{build_obstacle_mask, MaskSizeError, ObstacleMask};
pub use normals::{don_and_up_filter, estimate_normals, DonSplit, Normal};
pub use outliers::{remove_outliers, OutlierReport};
pub use plane::{
    estimate_pitch, fit_ground_plane, fit_plane_ransac, point_plane_distance, segment_obstacles,
    GroundPlane, PlaneError,
};
pub use window::{CloudWindow, WindowError};

use serde::{Deserialize, Serialize};

/// Tunables of the point-cloud stage. Distances in meters, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub outlier_k: usize,
    pub outlier_stddev_mult: f64,
    pub normal_radius: f64,
    pub don_radius_small: f64,
    pub don_radius_large: f64,
    pub normal_up_max_angle: f64,
    pub don_magnitude_max: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_gamma: f64,
    pub obstacle_margin_upsilon: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            outlier_k: 10,
            outlier_stddev_mult: 1.0,
            normal_radius: 0.35,
            don_radius_small: 0.15,
            don_radius_large: 0.35,
            normal_up_max_angle: 30.0,
            don_magnitude_max: 0.25,
            ransac_iterations: 200,
            ransac_inlier_gamma: 0.06,
            obstacle_margin_upsilon: 0.15,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.outlier_k < 3 {
            return Err("outlier_k must be at least 3".into());
        }
        if !(self.don_radius_small > 0.0 && self.don_radius_small < self.don_radius_large) {
            return Err("don_radius_small must be positive and below don_radius_large".into());
        }
        if !(self.normal_radius > 0.0) {
            return Err("normal_radius must be positive".into());
        }
        if !(self.normal_up_max_angle > 0.0 && self.normal_up_max_angle < 90.0) {
            return Err("normal_up_max_angle must lie in (0, 90)".into());
        }
        if !(0.0..=2.0).contains(&self.don_magnitude_max) {
            return Err("don_magnitude_max must lie in [0, 2]".into());
        }
        if self.ransac_iterations < 1 {
            return Err("ransac_iterations must be at least 1".into());
        }
        if !(self.ransac_inlier_gamma > 0.0) {
            return Err("ransac_inlier_gamma must be positive".into());
        }
        if !(self.obstacle_margin_upsilon >= 0.0) {
            return Err("obstacle_margin_upsilon must be non-negative".into());
        }
        if !(self.outlier_stddev_mult >= 0.0) {
            return Err("outlier_stddev_mult must be non-negative".into());
        }
        Ok(())
    }
}
