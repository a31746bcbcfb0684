use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{ColoredPoint, ColoredPointCloud, Frame};

/// A camera-frame cloud with per-point ground labels.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub cloud: ColoredPointCloud,
    /// `true` for ground samples.
    pub labels: Vec<bool>,
    /// True up-pointing unit normal and offset (`n·x + d = 0`).
    pub normal: Vector3<f64>,
    pub d: f64,
}

/// Noisy samples of a randomly tilted ground plane in front of the camera
/// plus vertical cylinders standing on it. Cylinder samples start 0.2 m above
/// the ground so none of them is plausibly a ground point.
pub fn noisy_plane_with_cylinders(seed: u64, n_plane: usize, n_clutter: usize, sigma: f64) -> LabeledCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tilt_x = rng.random_range(-15f64..15.0).to_radians();
    let tilt_z = rng.random_range(-10f64..10.0).to_radians();
    let rot = Rotation3::from_euler_angles(tilt_x, 0.0, tilt_z);
    let normal = rot * Vector3::new(0.0, -1.0, 0.0);
    let u = rot * Vector3::x();
    let v = rot * Vector3::z();
    let origin = Vector3::new(0.0, rng.random_range(1.0..2.0), 3.5);
    let d = -normal.dot(&origin);
    let noise = Normal::new(0.0, sigma.max(0.0)).unwrap();

    let mut points = Vec::with_capacity(n_plane + n_clutter);
    let mut labels = Vec::with_capacity(n_plane + n_clutter);
    for _ in 0..n_plane {
        let p = origin + u * rng.random_range(-2.0..2.0) + v * rng.random_range(-2.0..2.0) + normal * noise.sample(&mut rng);
        points.push(ColoredPoint { position: p, color: [120, 110, 90] });
        labels.push(true);
    }

    let n_cyl = rng.random_range(3..=5usize);
    let cylinders: Vec<(Vector3<f64>, f64, f64)> = (0..n_cyl)
        .map(|_| {
            let base = origin + u * rng.random_range(-1.7..1.7) + v * rng.random_range(-1.7..1.7);
            (base, rng.random_range(0.15..0.3), rng.random_range(0.9..1.6))
        })
        .collect();
    for i in 0..n_clutter {
        let (base, r, top) = cylinders[i % n_cyl];
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let radial = u * phi.cos() + v * phi.sin();
        let height = rng.random_range(0.2..top);
        let p = base + radial * (r + noise.sample(&mut rng)) + normal * height;
        points.push(ColoredPoint { position: p, color: [70, 50, 30] });
        labels.push(false);
    }
    LabeledCloud { cloud: ColoredPointCloud::from_points(points, Frame::Local(0)), labels, normal, d }
}
