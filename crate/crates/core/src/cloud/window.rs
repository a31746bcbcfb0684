use std::collections::VecDeque;

use thiserror::Error;

use crate::geom::{transform_cloud, ColoredPointCloud, Frame, Pose};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("keyframe {new} does not follow keyframe {last}")]
    OutOfOrder { last: usize, new: usize },
}

/// Sliding window over the world-frame clouds of the last `n + 1` keyframes.
#[derive(Debug, Clone)]
pub struct CloudWindow {
    window_size: usize,
    entries: VecDeque<(usize, ColoredPointCloud)>,
}

impl CloudWindow {
    pub fn new(window_size: usize) -> Self {
        Self { window_size, entries: VecDeque::with_capacity(window_size + 1) }
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn entries(&self) -> impl Iterator<Item = &(usize, ColoredPointCloud)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Moves the local cloud of keyframe `index` into the world frame with
    /// its pose, appends it, evicts the oldest entries beyond `n + 1`, and
    /// returns the union of the window in insertion order.
    pub fn accumulate(
        &mut self,
        index: usize,
        local: &ColoredPointCloud,
        pose: &Pose,
    ) -> Result<ColoredPointCloud, WindowError> {
        if let Some((last, _)) = self.entries.back() {
            if index <= *last {
                return Err(WindowError::OutOfOrder { last: *last, new: index });
            }
        }
        let mut world = transform_cloud(local, pose);
        world.frame = Frame::World;
        self.entries.push_back((index, world));
        while self.entries.len() > self.window_size + 1 {
            self.entries.pop_front();
        }
        let total = self.entries.iter().map(|(_, c)| c.len()).sum();
        let mut points = Vec::with_capacity(total);
        for (_, c) in &self.entries {
            points.extend_from_slice(&c.points);
        }
        Ok(ColoredPointCloud::from_points(points, Frame::World))
    }
}
