use super::{Homography, SwarmParams};
use crate::cloud::ObstacleMask;
use crate::raster::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralField {
    pub activity: Grid<f32>,
    pub frame: usize,
}

impl NeuralField {
    pub fn new(width: usize, height: usize) -> Self {
        Self { activity: Grid::filled(width, height, 0.0), frame: 0 }
    }
}

/// Warps `f` so that each current pixel centre reads the previous field at
/// `h⁻¹` of itself; reads outside the raster are zero.
fn warp(f: &Grid<f32>, h: &Homography) -> Grid<f32> {
    if h.matrix == nalgebra::Matrix3::identity() {
        return f.clone();
    }
    let Some(inv) = h.inverse() else {
        return Grid::filled(f.width(), f.height(), 0.0);
    };
    Grid::from_fn(f.width(), f.height(), |x, y| match inv.apply(x as f64 + 0.5, y as f64 + 0.5) {
        Some((u, v)) if u.is_finite() && v.is_finite() => f.sample_bilinear_zero(u - 0.5, v - 0.5),
        _ => 0.0,
    })
}

/// One field step: motion compensation, evaporation plus input, global
/// inhibition with clamping, then attenuation on obstacle pixels.
///
/// `h` must be expressed at detector resolution.
pub fn update_field(
    field: &NeuralField,
    saliency: &Grid<f32>,
    h: &Homography,
    mask: &ObstacleMask,
    params: &SwarmParams,
) -> NeuralField {
    assert_eq!(field.activity.dims(), saliency.dims());
    assert_eq!((mask.width(), mask.height()), saliency.dims());
    let rho = params.evaporation_rho as f32;
    let beta = params.field_gain_beta as f32;
    let kappa = params.inhibition_kappa as f32;
    let gamma = params.attenuation_gamma as f32;

    let warped = warp(&field.activity, h);
    let (w, hgt) = warped.dims();
    let mut f = Grid::from_fn(w, hgt, |x, y| (1.0 - rho) * warped.get(x, y) + beta * saliency.get(x, y));
    let inhibition = kappa * f.mean();
    for v in f.data_mut() {
        *v = (*v - inhibition).clamp(0.0, 1.0);
    }
    for y in 0..hgt {
        for x in 0..w {
            if mask.is_set(x, y) {
                *f.get_mut(x, y) *= gamma;
            }
        }
    }
    NeuralField { activity: f, frame: field.frame + 1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn quiet(rho: f64, beta: f64, kappa: f64, gamma: f64) -> SwarmParams {
        SwarmParams {
            evaporation_rho: rho,
            field_gain_beta: beta,
            inhibition_kappa: kappa,
            attenuation_gamma: gamma,
            ..SwarmParams::default()
        }
    }

    #[test]
    fn attenuation_example() {
        let field = NeuralField { activity: Grid::filled(4, 4, 0.6), frame: 0 };
        let mut bits = Grid::filled(4, 4, false);
        bits.set(2, 1, true);
        let out = update_field(
            &field,
            &Grid::filled(4, 4, 0.0),
            &Homography::identity(),
            &ObstacleMask::from_bits(bits),
            &quiet(0.0, 0.0, 0.0, 0.5),
        );
        assert!((out.activity.get(2, 1) - 0.3).abs() < 1e-7);
        assert_eq!(*out.activity.get(0, 0), 0.6);
        assert_eq!(out.frame, 1);
    }

    #[test]
    fn pure_evaporation() {
        let rho = 0.2;
        let mut field = NeuralField { activity: Grid::from_fn(5, 5, |x, y| (x + y) as f32 / 8.0), frame: 0 };
        let start = field.activity.clone();
        let zero = Grid::filled(5, 5, 0.0);
        let mask = ObstacleMask::empty(5, 5);
        for n in 1..=5 {
            field = update_field(&field, &zero, &Homography::identity(), &mask, &quiet(rho, 0.3, 0.0, 0.5));
            for (a, b) in field.activity.data().iter().zip(start.data()) {
                assert!((a - b * (0.8f32).powi(n)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn converges_to_fixed_point() {
        for (rho, beta, s) in [(0.25f64, 0.25, 0.6), (0.1, 0.5, 0.1), (0.5, 2.0, 0.9)] {
            let mut field = NeuralField::new(6, 6);
            let sal = Grid::filled(6, 6, s as f32);
            let mask = ObstacleMask::empty(6, 6);
            let frames = (5.0 / rho).ceil() as usize;
            for _ in 0..frames {
                field = update_field(&field, &sal, &Homography::identity(), &mask, &quiet(rho, beta, 0.0, 1.0));
            }
            let expected = (beta * s / rho).min(1.0) as f32;
            // (1 - ρ)^(5/ρ) ≤ e⁻⁵ ≈ 6.7e-3 of the gap remains
            let gap = expected * (1.0 - rho as f32).powi(frames as i32);
            for &v in field.activity.data() {
                assert!((v - expected).abs() <= gap + 1e-3, "rho {rho}: {v} vs {expected}");
            }
        }
    }

    #[test]
    fn translation_shifts_activity() {
        let mut act = Grid::filled(10, 10, 0.0);
        act.set(4, 4, 1.0);
        let field = NeuralField { activity: act, frame: 0 };
        let h = Homography { matrix: Matrix3::new(1.0, 0.0, 2.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0), degenerate: false };
        let out = update_field(&field, &Grid::filled(10, 10, 0.0), &h, &ObstacleMask::empty(10, 10), &quiet(0.0, 0.0, 0.0, 1.0));
        assert_eq!(*out.activity.get(6, 5), 1.0);
        assert_eq!(out.activity.data().iter().filter(|&&v| v > 0.0).count(), 1);
    }
}
