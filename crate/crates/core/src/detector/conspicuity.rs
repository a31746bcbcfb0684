use crate::raster::{downsample_rgb, Grid, RgbImage};

/// Intensity and colour conspicuity at detector resolution, each
/// max-normalised (or all-zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ConspicuityMaps {
    pub intensity: Grid<f32>,
    pub color: Grid<f32>,
}

const LEVELS: usize = 5;
const SCALE_PAIRS: [(usize, usize); 4] = [(0, 2), (0, 3), (1, 3), (1, 4)];

/// Centre-surround conspicuity over a 5-level Gaussian pyramid. `rgb` may be
/// an integer multiple of `detector_size`; it is box-averaged down first.
pub fn conspicuity(rgb: &RgbImage, detector_size: (usize, usize)) -> ConspicuityMaps {
    let factor = (rgb.width() / detector_size.0).max(1);
    let img = downsample_rgb(rgb, factor);
    let (w, h) = img.dims();

    let channel = |f: fn(f32, f32, f32) -> f32| {
        img.map(|p| f(p[0] as f32 / 255.0, p[1] as f32 / 255.0, p[2] as f32 / 255.0))
    };
    let intensity = channel(|r, g, b| (r + g + b) / 3.0);
    let rg = channel(|r, g, _| r - g);
    let by = channel(|r, g, b| b - (r + g) / 2.0);

    let i_map = feature_map(&intensity, (w, h));
    let rg_map = feature_map(&rg, (w, h));
    let by_map = feature_map(&by, (w, h));
    let color = add(&rg_map, &by_map).max_normalized();
    ConspicuityMaps { intensity: i_map, color }
}

fn feature_map(channel: &Grid<f32>, size: (usize, usize)) -> Grid<f32> {
    let pyramid = gaussian_pyramid(channel, LEVELS);
    let mut acc = Grid::filled(size.0, size.1, 0.0f32);
    for (c, s) in SCALE_PAIRS {
        let centre = &pyramid[c];
        let surround = resize_bilinear(&pyramid[s], centre.dims());
        let cs = Grid::from_fn(centre.width(), centre.height(), |x, y| (centre.get(x, y) - surround.get(x, y)).abs());
        let cs = resize_bilinear(&cs, size).max_normalized();
        acc = add(&acc, &cs);
    }
    acc.max_normalized()
}

fn add(a: &Grid<f32>, b: &Grid<f32>) -> Grid<f32> {
    Grid::from_fn(a.width(), a.height(), |x, y| a.get(x, y) + b.get(x, y))
}

pub(crate) fn gaussian_pyramid(base: &Grid<f32>, levels: usize) -> Vec<Grid<f32>> {
    let mut out = vec![base.clone()];
    for _ in 1..levels {
        let prev = out.last().unwrap();
        let blurred = blur5(prev);
        let (w, h) = (prev.width().div_ceil(2), prev.height().div_ceil(2));
        // 2x2 means keep each coarse sample centred on the pixels it covers
        let (pw, ph) = prev.dims();
        out.push(Grid::from_fn(w.max(1), h.max(1), |x, y| {
            let (x1, y1) = ((2 * x + 1).min(pw - 1), (2 * y + 1).min(ph - 1));
            (blurred.get(2 * x, 2 * y) + blurred.get(x1, 2 * y) + blurred.get(2 * x, y1) + blurred.get(x1, y1)) / 4.0
        }));
    }
    out
}

/// Separable binomial [1 4 6 4 1] / 16 blur with clamped borders.
fn blur5(g: &Grid<f32>) -> Grid<f32> {
    const K: [f32; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let (w, h) = g.dims();
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let horiz = Grid::from_fn(w, h, |x, y| {
        let mut s = 0.0;
        for (i, k) in K.iter().enumerate() {
            s += k * g.get(clamp(x as i64 + i as i64 - 2, w), y);
        }
        s / 16.0
    });
    Grid::from_fn(w, h, |x, y| {
        let mut s = 0.0;
        for (i, k) in K.iter().enumerate() {
            s += k * horiz.get(x, clamp(y as i64 + i as i64 - 2, h));
        }
        s / 16.0
    })
}

/// Bilinear resize with pixel-centre alignment and clamped borders.
pub(crate) fn resize_bilinear(g: &Grid<f32>, size: (usize, usize)) -> Grid<f32> {
    if g.dims() == size {
        return g.clone();
    }
    let (sw, sh) = g.dims();
    let (dw, dh) = size;
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    Grid::from_fn(dw, dh, |x, y| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
        let (tx, ty) = ((fx - x0 as f64) as f32, (fy - y0 as f64) as f32);
        let top = g.get(x0, y0) * (1.0 - tx) + g.get(x1, y0) * tx;
        let bot = g.get(x0, y1) * (1.0 - tx) + g.get(x1, y1) * tx;
        top * (1.0 - ty) + bot * ty
    })
}
