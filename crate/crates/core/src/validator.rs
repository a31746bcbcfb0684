//! Flags frames whose detected path overlaps the obstacle mask.

use serde::{Deserialize, Serialize};

use crate::cloud::ObstacleMask;
use crate::detector::{Detection, NeuralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Suspect,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauseHint {
    None,
    PathOnObstacle,
    NoDetection,
    NoPlane,
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub overlap_pixels: usize,
    pub overlap_fraction: f64,
    pub bounding_rect: Option<Rect>,
    pub verdict: Verdict,
    pub cause_hint: CauseHint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatorParams {
    pub nu: f64,
    pub suspect_frac: f64,
    pub invalid_frac: f64,
}

impl Default for ValidatorParams {
    fn default() -> Self {
        Self { nu: 0.35, suspect_frac: 0.1, invalid_frac: 0.4 }
    }
}

impl ValidatorParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 <= self.suspect_frac && self.suspect_frac <= self.invalid_frac && self.invalid_frac <= 1.0) {
            return Err("validator thresholds must satisfy 0 <= suspect_frac <= invalid_frac <= 1".into());
        }
        if !self.nu.is_finite() {
            return Err("validator_nu must be finite".into());
        }
        Ok(())
    }
}

/// Counts active field pixels (`F > nu`) on the mask and grades them
/// against the blob size. `plane_failed` marks frames whose mask could not
/// be built.
pub fn validate(
    field: &NeuralField,
    mask: &ObstacleMask,
    detection: &Detection,
    params: &ValidatorParams,
    plane_failed: bool,
) -> ValidationReport {
    let (w, h) = field.activity.dims();
    assert_eq!((mask.width(), mask.height()), (w, h));
    let nu = params.nu as f32;
    let mut count = 0usize;
    let mut rect: Option<Rect> = None;
    for y in 0..h {
        for x in 0..w {
            if *field.activity.get(x, y) > nu && mask.is_set(x, y) {
                count += 1;
                rect = Some(match rect {
                    None => Rect { x_min: x, y_min: y, x_max: x, y_max: y },
                    Some(r) => Rect {
                        x_min: r.x_min.min(x),
                        y_min: r.y_min.min(y),
                        x_max: r.x_max.max(x),
                        y_max: r.y_max.max(y),
                    },
                });
            }
        }
    }
    let fraction = if detection.blob.is_empty() { 0.0 } else { (count as f64 / detection.blob.len() as f64).min(1.0) };

    let (verdict, cause_hint) = if plane_failed {
        (Verdict::Suspect, CauseHint::NoPlane)
    } else if !detection.present {
        (Verdict::Suspect, CauseHint::NoDetection)
    } else if fraction >= params.invalid_frac {
        (Verdict::Invalid, CauseHint::PathOnObstacle)
    } else if fraction >= params.suspect_frac {
        (Verdict::Suspect, CauseHint::PathOnObstacle)
    } else {
        (Verdict::Valid, CauseHint::None)
    };
    ValidationReport { overlap_pixels: count, overlap_fraction: fraction, bounding_rect: rect, verdict, cause_hint }
}
