use thiserror::Error;

use crate::geom::{project_point, ColoredPointCloud, Intrinsics};
use crate::raster::Grid;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("detector size {det_w}x{det_h} does not evenly divide projection size {full_w}x{full_h}")]
pub struct MaskSizeError {
    pub full_w: u32,
    pub full_h: u32,
    pub det_w: usize,
    pub det_h: usize,
}

/// Binary obstacle raster at detector resolution plus the per-pixel point
/// counts it was thresholded from.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMask {
    pub bits: Grid<bool>,
    pub counts: Grid<u32>,
}

impl ObstacleMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { bits: Grid::filled(width, height, false), counts: Grid::filled(width, height, 0) }
    }

    pub fn width(&self) -> usize {
        self.bits.width()
    }

    pub fn height(&self) -> usize {
        self.bits.height()
    }

    pub fn is_set(&self, x: usize, y: usize) -> bool {
        *self.bits.get(x, y)
    }

    pub fn count_set(&self) -> usize {
        self.bits.data().iter().filter(|&&b| b).count()
    }

    /// Builds a mask straight from a bit raster (counts mirror the bits).
    pub fn from_bits(bits: Grid<bool>) -> Self {
        let counts = bits.map(|&b| b as u32);
        Self { bits, counts }
    }
}

/// Projects local-frame obstacle points at full resolution, block-max
/// reduces the counts to detector size and dilates them with a square of
/// half-width `inflate_radius`. A bit is set wherever the dilated count is
/// at least one.
pub fn build_obstacle_mask(
    obstacles: &ColoredPointCloud,
    k: &Intrinsics,
    detector_size: (usize, usize),
    inflate_radius: usize,
) -> Result<ObstacleMask, MaskSizeError> {
    let (dw, dh) = detector_size;
    let err = MaskSizeError { full_w: k.width, full_h: k.height, det_w: dw, det_h: dh };
    if dw == 0 || dh == 0 || !(k.width as usize).is_multiple_of(dw) || !(k.height as usize).is_multiple_of(dh) {
        return Err(err);
    }
    let factor = k.width as usize / dw;
    if k.height as usize / dh != factor {
        return Err(err);
    }

    let mut full = Grid::filled(k.width as usize, k.height as usize, 0u32);
    for p in &obstacles.points {
        if let Some(px) = project_point(&p.position, k) {
            let (u, v) = px.index();
            *full.get_mut(u as usize, v as usize) += 1;
        }
    }
    let reduced = Grid::from_fn(dw, dh, |x, y| {
        let mut m = 0;
        for yy in y * factor..(y + 1) * factor {
            for xx in x * factor..(x + 1) * factor {
                m = m.max(*full.get(xx, yy));
            }
        }
        m
    });
    let counts = dilate_max(&reduced, inflate_radius);
    let bits = counts.map(|&c| c >= 1);
    Ok(ObstacleMask { bits, counts })
}

/// Separable square max filter.
fn dilate_max(g: &Grid<u32>, r: usize) -> Grid<u32> {
    if r == 0 {
        return g.clone();
    }
    let (w, h) = g.dims();
    let horiz = Grid::from_fn(w, h, |x, y| {
        (x.saturating_sub(r)..=(x + r).min(w - 1)).map(|xx| *g.get(xx, y)).max().unwrap_or(0)
    });
    Grid::from_fn(w, h, |x, y| {
        (y.saturating_sub(r)..=(y + r).min(h - 1)).map(|yy| *horiz.get(x, yy)).max().unwrap_or(0)
    })
}
