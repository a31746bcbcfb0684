use rayon::prelude::*;

use super::{FilterParams, PointIndex};
use crate::geom::ColoredPointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutlierReport {
    /// Set when the cloud was too small to evaluate and was returned as is.
    pub passed_through: bool,
    pub removed: usize,
}

/// Statistical outlier removal: a point survives when the mean distance to
/// its `outlier_k` nearest neighbours is at most `M + mult * σ` of that
/// statistic over the whole cloud (σ is the sample standard deviation).
pub fn remove_outliers(c: &ColoredPointCloud, params: &FilterParams) -> (ColoredPointCloud, OutlierReport) {
    let k = params.outlier_k;
    if c.len() < k + 1 {
        return (c.clone(), OutlierReport { passed_through: true, removed: 0 });
    }
    let index = PointIndex::build(c);
    let mean_dists: Vec<f64> = c
        .points
        .par_iter()
        .map(|p| {
            let mut d: Vec<f64> = index
                .nearest(&p.position, k + 1)
                .into_iter()
                .map(|j| (c.points[j].position - p.position).norm())
                .collect();
            d.sort_by(f64::total_cmp);
            // d[0] is the point itself (or an exact duplicate of it)
            d[1..=k].iter().sum::<f64>() / k as f64
        })
        .collect();

    let n = mean_dists.len() as f64;
    let mean = mean_dists.iter().sum::<f64>() / n;
    let var = mean_dists.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
    let limit = mean + params.outlier_stddev_mult * var.sqrt();

    let out = c.select(|i| mean_dists[i] <= limit);
    let removed = c.len() - out.len();
    (out, OutlierReport { passed_through: false, removed })
}
