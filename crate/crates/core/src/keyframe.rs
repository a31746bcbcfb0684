use crate::geom::{backproject, ColoredPoint, ColoredPointCloud, Frame, Intrinsics, Pose};
use crate::raster::{Grid, RgbImage};

/// One SLAM output unit: colour, z-depth in meters (non-positive or NaN =
/// missing) and the camera-to-world pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub index: usize,
    pub rgb: RgbImage,
    pub depth: Grid<f32>,
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

impl Keyframe {
    /// Camera-frame cloud from every `stride`-th pixel with valid depth,
    /// sampled at pixel centres.
    pub fn local_cloud(&self, stride: usize) -> ColoredPointCloud {
        let stride = stride.max(1);
        let (w, h) = self.depth.dims();
        let mut points = Vec::with_capacity((w / stride + 1) * (h / stride + 1));
        for y in (stride / 2..h).step_by(stride) {
            for x in (stride / 2..w).step_by(stride) {
                let d = *self.depth.get(x, y) as f64;
                if let Some(p) = backproject(x as f64 + 0.5, y as f64 + 0.5, d, &self.intrinsics) {
                    points.push(ColoredPoint { position: p, color: *self.rgb.get(x, y) });
                }
            }
        }
        ColoredPointCloud::from_points(points, Frame::Local(self.index))
    }
}
