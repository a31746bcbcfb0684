//! Per-frame success rule and sequence summaries.
//!
//! A frame succeeds when the hottest field pixels (`F ≥ peak_fraction·max F`)
//! lie inside the ground-truth trail and the evaluated blob's principal axis
//! agrees with the trail's.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::components;
use crate::raster::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub peak_fraction: f64,
    pub containment: f64,
    pub max_angle_deg: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { peak_fraction: 0.8, containment: 0.9, max_angle_deg: 30.0 }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.peak_fraction) || !(0.0..=1.0).contains(&self.containment) {
            return Err("eval_peak_fraction and eval_containment must lie in [0, 1]".into());
        }
        if !(0.0..=90.0).contains(&self.max_angle_deg) {
            return Err("eval_max_angle_deg must lie in [0, 90]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "success")]
    Success,
    #[serde(rename = "failure")]
    Failure,
    #[serde(rename = "n/a")]
    NotApplicable,
}

/// The field-derived pixel sets the success rule needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalInputs {
    pub hot: Vec<(usize, usize)>,
    pub blob: Vec<(usize, usize)>,
}

/// Hot pixels and the evaluated blob: the largest component above
/// `blob_threshold`, ties going to the larger peak.
pub fn eval_inputs(field: &Grid<f32>, blob_threshold: f64, params: &EvalParams) -> EvalInputs {
    let max = field.max_value();
    let mut hot = Vec::new();
    if max > 0.0 {
        let cut = params.peak_fraction as f32 * max;
        for y in 0..field.height() {
            for x in 0..field.width() {
                if *field.get(x, y) >= cut {
                    hot.push((x, y));
                }
            }
        }
    }
    let blob = components(field, blob_threshold as f32)
        .into_iter()
        .max_by(|a, b| a.pixels.len().cmp(&b.pixels.len()).then(a.peak.total_cmp(&b.peak)).then(b.centroid.1.total_cmp(&a.centroid.1)))
        .map(|c| c.pixels)
        .unwrap_or_default();
    EvalInputs { hot, blob }
}

/// Orientation in degrees in [0, 180) of the principal axis, `None` when
/// the pixel spread is isotropic or empty.
pub fn principal_axis_deg(pixels: &[(usize, usize)]) -> Option<f64> {
    if pixels.len() < 2 {
        return None;
    }
    let n = pixels.len() as f64;
    let mx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let (dx, dy) = (x as f64 - mx, y as f64 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let anisotropy = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
    if anisotropy <= 1e-9 * (sxx + syy).max(1e-12) {
        return None;
    }
    Some((0.5 * (2.0 * sxy).atan2(sxx - syy)).to_degrees().rem_euclid(180.0))
}

fn axis_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 180.0;
    d.min(180.0 - d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub outcome: Outcome,
    pub containment: f64,
    pub axis_gap_deg: Option<f64>,
}

pub fn evaluate_frame(inputs: &EvalInputs, trail: &Grid<bool>, params: &EvalParams) -> FrameEval {
    if inputs.hot.is_empty() || inputs.blob.is_empty() {
        return FrameEval { outcome: Outcome::Failure, containment: 0.0, axis_gap_deg: None };
    }
    let inside = inputs.hot.iter().filter(|&&(x, y)| *trail.get(x, y)).count();
    let containment = inside as f64 / inputs.hot.len() as f64;
    let trail_pixels: Vec<(usize, usize)> = (0..trail.height())
        .flat_map(|y| (0..trail.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| *trail.get(x, y))
        .collect();
    let gap = match (principal_axis_deg(&inputs.blob), principal_axis_deg(&trail_pixels)) {
        (Some(a), Some(b)) => Some(axis_gap(a, b)),
        _ => None,
    };
    let ok = containment >= params.containment && gap.is_some_and(|g| g <= params.max_angle_deg);
    FrameEval { outcome: if ok { Outcome::Success } else { Outcome::Failure }, containment, axis_gap_deg: gap }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub frames: usize,
    pub evaluated: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_overlap_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(flatten)]
    pub overall: SuiteSummary,
    pub per_suite: BTreeMap<String, SuiteSummary>,
}

/// One frame's contribution to a summary.
#[derive(Debug, Clone, Copy)]
pub struct FrameRecord {
    pub outcome: Outcome,
    pub overlap_fraction: f64,
}

pub fn summarize_frames(frames: &[FrameRecord]) -> SuiteSummary {
    let evaluated = frames.iter().filter(|f| f.outcome != Outcome::NotApplicable).count();
    let successes = frames.iter().filter(|f| f.outcome == Outcome::Success).count();
    let mean = if frames.is_empty() {
        0.0
    } else {
        frames.iter().map(|f| f.overlap_fraction).sum::<f64>() / frames.len() as f64
    };
    SuiteSummary {
        frames: frames.len(),
        evaluated,
        successes,
        success_rate: if evaluated == 0 { 0.0 } else { successes as f64 / evaluated as f64 },
        mean_overlap_fraction: mean,
    }
}

pub fn summarize(suites: &[(String, Vec<FrameRecord>)]) -> Summary {
    let all: Vec<FrameRecord> = suites.iter().flat_map(|(_, f)| f.iter().copied()).collect();
    Summary {
        overall: summarize_frames(&all),
        per_suite: suites.iter().map(|(n, f)| (n.clone(), summarize_frames(f))).collect(),
    }
}
