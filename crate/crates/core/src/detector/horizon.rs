use crate::geom::Intrinsics;

/// Detector row of the ground plane's horizon for a camera pitched `theta`
/// degrees down (negative = up), clamped to `[1, detector_height - 2]`.
pub fn horizon_row(theta_deg: f64, k: &Intrinsics, detector_size: (usize, usize)) -> usize {
    let det_h = detector_size.1;
    let factor = k.height as f64 / det_h as f64;
    let v = k.cy - k.fy * theta_deg.to_radians().tan();
    let row = (v / factor).floor();
    let hi = det_h.saturating_sub(2).max(1) as f64;
    if row.is_nan() {
        return hi as usize;
    }
    row.clamp(1.0, hi) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vga() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn level_camera_uses_principal_row() {
        assert_eq!(horizon_row(0.0, &vga(), (80, 60)), 30);
    }

    #[test]
    fn pitched_down_raises_horizon() {
        // 240 - 500 tan 10° = 151.8 px, i.e. detector row 18
        assert_eq!(horizon_row(10.0, &vga(), (80, 60)), 18);
    }

    #[test]
    fn extreme_pitch_clamps() {
        assert_eq!(horizon_row(75.0, &vga(), (80, 60)), 1);
        assert_eq!(horizon_row(-75.0, &vga(), (80, 60)), 58);
    }
}
