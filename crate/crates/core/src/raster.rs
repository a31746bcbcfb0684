//! Row-major rasters shared by the detector, dataset and renderer.

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type Rgb = [u8; 3];
pub type RgbImage = Grid<Rgb>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "raster data length mismatch");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

impl Grid<f32> {
    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    pub fn mean(&self) -> f32 {
        if self.data.is_empty() {
            return 0.0;
        }
        (self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64) as f32
    }

    /// Divides by the peak; rasters whose peak is below `1e-6` become all-zero.
    pub fn max_normalized(&self) -> Grid<f32> {
        let m = self.max_value();
        if m < 1e-6 {
            return Grid::filled(self.width, self.height, 0.0);
        }
        self.map(|&v| v / m)
    }

    /// Bilinear sample at continuous index coordinates; reads outside the
    /// raster contribute zero.
    pub fn sample_bilinear_zero(&self, x: f64, y: f64) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let at = |xi: i64, yi: i64| -> f32 {
            if xi < 0 || yi < 0 || xi >= self.width as i64 || yi >= self.height as i64 {
                0.0
            } else {
                self.data[yi as usize * self.width + xi as usize]
            }
        };
        let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
        let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Box-averages an RGB image down by an integer factor.
pub fn downsample_rgb(img: &RgbImage, factor: usize) -> RgbImage {
    if factor == 1 {
        return img.clone();
    }
    let w = img.width() / factor;
    let h = img.height() / factor;
    let n = (factor * factor) as u32;
    Grid::from_fn(w, h, |x, y| {
        let mut acc = [0u32; 3];
        for dy in 0..factor {
            for dx in 0..factor {
                let p = img.get(x * factor + dx, y * factor + dy);
                for c in 0..3 {
                    acc[c] += p[c] as u32;
                }
            }
        }
        [
            ((acc[0] + n / 2) / n) as u8,
            ((acc[1] + n / 2) / n) as u8,
            ((acc[2] + n / 2) / n) as u8,
        ]
    })
}

/// Horizontal runs `(row, start_col, len)` of set cells.
pub fn encode_runs(bits: &Grid<bool>) -> Vec<[u32; 3]> {
    let mut runs = Vec::new();
    for y in 0..bits.height() {
        let row = bits.row(y);
        let mut x = 0;
        while x < row.len() {
            if row[x] {
                let start = x;
                while x < row.len() && row[x] {
                    x += 1;
                }
                runs.push([y as u32, start as u32, (x - start) as u32]);
            } else {
                x += 1;
            }
        }
    }
    runs
}

pub fn decode_runs(width: usize, height: usize, runs: &[[u32; 3]]) -> Grid<bool> {
    let mut g = Grid::filled(width, height, false);
    for &[y, x0, len] in runs {
        for x in x0..x0 + len {
            if (x as usize) < width && (y as usize) < height {
                g.set(x as usize, y as usize, true);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bilinear_identity_at_integer_coords() {
        let g = Grid::from_fn(4, 3, |x, y| (x * 10 + y) as f32 * 0.1);
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(g.sample_bilinear_zero(x as f64, y as f64), *g.get(x, y));
            }
        }
        assert_eq!(g.sample_bilinear_zero(-2.0, 0.0), 0.0);
        assert!((g.sample_bilinear_zero(0.5, 0.0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn downsample_averages_blocks() {
        let img = Grid::from_fn(4, 2, |x, _| if x < 2 { [10, 20, 30] } else { [0, 0, 255] });
        let d = downsample_rgb(&img, 2);
        assert_eq!(d.dims(), (2, 1));
        assert_eq!(*d.get(0, 0), [10, 20, 30]);
        assert_eq!(*d.get(1, 0), [0, 0, 255]);
    }

    proptest! {
        #[test]
        fn runs_round_trip(bits in proptest::collection::vec(any::<bool>(), 48)) {
            let g = Grid::from_vec(8, 6, bits);
            let runs = encode_runs(&g);
            prop_assert_eq!(decode_runs(8, 6, &runs), g);
        }
    }
}
