use nalgebra::{Matrix3, Vector3};

pub use crate::synth::noisy_plane_with_cylinders;

/// Plane through `pts` by ordinary regression of the coordinate along the
/// dominant normal axis on the other two, solved with normal equations.
/// Independent of the eigen-decomposition used by the fitter.
pub fn lsq_plane_oracle(pts: &[Vector3<f64>]) -> (Vector3<f64>, f64) {
    let n = pts.len() as f64;
    let mean = pts.iter().sum::<Vector3<f64>>() / n;
    // pick the axis with the least spread as the dependent variable
    let spread = |i: usize| pts.iter().map(|p| (p[i] - mean[i]).powi(2)).sum::<f64>();
    let dep = (0..3).min_by(|&a, &b| spread(a).total_cmp(&spread(b))).unwrap();
    let (i, j) = match dep {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    // dep = α·x_i + β·x_j + c
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for p in pts {
        let row = Vector3::new(p[i], p[j], 1.0);
        ata += row * row.transpose();
        atb += row * p[dep];
    }
    let sol = ata.try_inverse().expect("well-posed regression") * atb;
    let mut normal = Vector3::zeros();
    normal[i] = sol[0];
    normal[j] = sol[1];
    normal[dep] = -1.0;
    let mut d = sol[2];
    let len = normal.norm();
    normal /= len;
    d /= len;
    if normal.y > 0.0 {
        normal = -normal;
        d = -d;
    }
    (normal, d)
}
