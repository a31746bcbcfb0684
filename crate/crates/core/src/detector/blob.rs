use crate::raster::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// Pixels in scan order.
    pub pixels: Vec<(usize, usize)>,
    pub peak: f32,
    /// (column, row) mean.
    pub centroid: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub blob: Vec<(usize, usize)>,
    pub centroid: Option<(f64, f64)>,
    pub present: bool,
}

impl Detection {
    pub fn absent() -> Self {
        Self { blob: Vec::new(), centroid: None, present: false }
    }

    pub fn to_grid(&self, width: usize, height: usize) -> Grid<bool> {
        let mut g = Grid::filled(width, height, false);
        for &(x, y) in &self.blob {
            g.set(x, y, true);
        }
        g
    }
}

/// 4-connected components of pixels with value strictly above `threshold`.
pub fn components(field: &Grid<f32>, threshold: f32) -> Vec<Component> {
    let (w, h) = field.dims();
    let mut label = vec![usize::MAX; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if label[start] != usize::MAX || !(field.data()[start] > threshold) {
            continue;
        }
        let id = out.len();
        label[start] = id;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            let mut visit = |j: usize| {
                if label[j] == usize::MAX && field.data()[j] > threshold {
                    label[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        let n = pixels.len() as f64;
        let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let peak = pixels.iter().map(|&(x, y)| *field.get(x, y)).fold(f32::MIN, f32::max);
        out.push(Component { pixels, peak, centroid: (cx, cy) });
    }
    out
}

/// Largest component; ties go to the smaller centroid row, then column.
pub fn extract_path(field: &Grid<f32>, threshold: f64) -> Detection {
    let best = components(field, threshold as f32).into_iter().min_by(|a, b| {
        b.pixels
            .len()
            .cmp(&a.pixels.len())
            .then(a.centroid.1.total_cmp(&b.centroid.1))
            .then(a.centroid.0.total_cmp(&b.centroid.0))
    });
    match best {
        Some(c) => Detection { blob: c.pixels, centroid: Some(c.centroid), present: true },
        None => Detection::absent(),
    }
}
