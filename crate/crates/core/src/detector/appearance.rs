use super::Detection;
use crate::raster::{Rgb, RgbImage};

/// RGB histogram of the trail's appearance, learned from past detections.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceModel {
    pub bins: usize,
    pub histogram: Vec<f64>,
    pub valid: bool,
}

const BLEND_OLD: f64 = 0.7;

impl AppearanceModel {
    pub fn new(bins: usize) -> Self {
        assert!((1..=256).contains(&bins));
        Self { bins, histogram: vec![0.0; bins * bins * bins], valid: false }
    }

    fn cell(&self, c: Rgb) -> usize {
        let b = |v: u8| v as usize * self.bins / 256;
        (b(c[0]) * self.bins + b(c[1])) * self.bins + b(c[2])
    }

    /// Probability mass of `c`'s cell; zero while the model is invalid.
    pub fn likelihood(&self, c: Rgb) -> f64 {
        if !self.valid {
            return 0.0;
        }
        self.histogram[self.cell(c)]
    }

    /// Blends in the histogram of the detected blob. `rgb` is at detector
    /// resolution.
    pub fn update(&self, rgb: &RgbImage, detection: &Detection) -> AppearanceModel {
        if !detection.present || detection.blob.is_empty() {
            return self.clone();
        }
        let mut fresh = vec![0.0; self.histogram.len()];
        for &(x, y) in &detection.blob {
            fresh[self.cell(*rgb.get(x, y))] += 1.0;
        }
        let n = detection.blob.len() as f64;
        fresh.iter_mut().for_each(|v| *v /= n);
        let histogram = if self.valid {
            let mut h: Vec<f64> =
                self.histogram.iter().zip(&fresh).map(|(o, f)| BLEND_OLD * o + (1.0 - BLEND_OLD) * f).collect();
            let s: f64 = h.iter().sum();
            h.iter_mut().for_each(|v| *v /= s);
            h
        } else {
            fresh
        };
        AppearanceModel { bins: self.bins, histogram, valid: true }
    }
}
