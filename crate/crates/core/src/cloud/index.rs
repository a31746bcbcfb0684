use std::num::NonZero;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use nalgebra::Vector3;

use crate::geom::ColoredPointCloud;

/// Static kd-tree over the positions of a cloud; query results are indices
/// into the cloud.
pub struct PointIndex {
    tree: ImmutableKdTree<f64, u32, 3, 32>,
    len: usize,
}

impl PointIndex {
    pub fn build(cloud: &ColoredPointCloud) -> Self {
        let coords: Vec<[f64; 3]> = cloud.positions().map(|p| [p.x, p.y, p.z]).collect();
        Self::from_coords(&coords)
    }

    pub fn from_coords(coords: &[[f64; 3]]) -> Self {
        Self { tree: ImmutableKdTree::new_from_slice(coords), len: coords.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Indices of the `k` nearest stored points (the query point itself
    /// included when it is stored).
    pub fn nearest(&self, q: &Vector3<f64>, k: usize) -> Vec<usize> {
        let Some(k) = NonZero::new(k.min(self.len)) else {
            return Vec::new();
        };
        self.tree
            .nearest_n::<SquaredEuclidean>(&[q.x, q.y, q.z], k)
            .into_iter()
            .map(|n| n.item as usize)
            .collect()
    }

    /// Indices of stored points within `radius` (inclusive), unordered.
    pub fn within(&self, q: &Vector3<f64>, radius: f64) -> Vec<usize> {
        if self.len == 0 {
            return Vec::new();
        }
        self.tree
            .within_unsorted::<SquaredEuclidean>(&[q.x, q.y, q.z], radius * radius)
            .into_iter()
            .map(|n| n.item as usize)
            .collect()
    }
}
