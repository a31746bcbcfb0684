//! Per-keyframe orchestration of the cloud stage and the detector.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{
    build_obstacle_mask, don_and_up_filter, estimate_pitch, fit_ground_plane, fit_plane_ransac, remove_outliers,
    segment_obstacles, CloudWindow, GroundPlane, MaskSizeError, ObstacleMask, WindowError,
};
use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::detector::{
    combine_pheromone, conspicuity, extract_path, horizon_row, pose_homography, run_swarm, scale_homography,
    AppearanceModel, Detection, Homography, NeuralField, PheromonePair, SwarmParams,
};
use crate::eval::{eval_inputs, evaluate_frame, EvalParams, Outcome};
use crate::geom::{transform_cloud, Frame, Pose};
use crate::keyframe::Keyframe;
use crate::raster::{downsample_rgb, encode_runs, Grid, RgbImage};
use crate::synth::GroundTruth;
use crate::validator::{validate, CauseHint, Rect, ValidatorParams, Verdict};

/// `Original` bypasses the 3-D stage: empty mask, no attenuation, default
/// horizon row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    Original,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    MaskSize(#[from] MaskSizeError),
    #[error("keyframe {index} is {got:?}, expected {expected:?}")]
    FrameSize { index: usize, got: (usize, usize), expected: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub index: usize,
    pub plane: Option<[f64; 4]>,
    pub pitch_deg: Option<f64>,
    pub h_max: usize,
    pub obstacle_pixels: usize,
    /// Detector-resolution (column, row).
    pub centroid: Option<[f64; 2]>,
    pub blob_size: usize,
    pub verdict: Verdict,
    pub cause_hint: CauseHint,
    pub overlap_fraction: f64,
    pub overlap_pixels: usize,
    pub bounding_rect: Option<Rect>,
    pub eval: Outcome,
    pub containment: Option<f64>,
    pub axis_gap_deg: Option<f64>,
    /// Row-run encodings `[row, start, len]` at detector resolution.
    pub blob_runs: Vec<[u32; 3]>,
    pub mask_runs: Vec<[u32; 3]>,
    pub hot_runs: Vec<[u32; 3]>,
    pub eval_blob_runs: Vec<[u32; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl FrameReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Everything one step produces; the report plus the rasters behind it.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub report: FrameReport,
    pub field: Grid<f32>,
    pub detection: Detection,
    pub mask: ObstacleMask,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub mode: Mode,
    /// Adds wall-clock stage timings to every report; they make the stream
    /// non-deterministic.
    pub timings: bool,
}

/// Stride, iteration count and inlier band of the motion-plane fit that
/// drives field compensation. Fixed, so both modes warp identically.
const MOTION_STRIDE: usize = 16;
const MOTION_ITERATIONS: usize = 64;
const MOTION_GAMMA: f64 = 0.05;

struct Timer {
    enabled: bool,
    last: Instant,
    stages: BTreeMap<String, f64>,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Self { enabled, last: Instant::now(), stages: BTreeMap::new() }
    }

    fn lap(&mut self, stage: &str) {
        if self.enabled {
            let now = Instant::now();
            self.stages.insert(stage.into(), (now - self.last).as_secs_f64() * 1e3);
            self.last = now;
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.stages)
    }
}

/// Stateful sequence processor; feed keyframes in index order.
pub struct Pipeline {
    options: RunOptions,
    swarm: SwarmParams,
    filter: crate::cloud::FilterParams,
    validator: ValidatorParams,
    eval: EvalParams,
    depth_stride: usize,
    inflate: usize,
    detector_size: (usize, usize),
    window: CloudWindow,
    field: NeuralField,
    pheromone: PheromonePair,
    appearance: AppearanceModel,
    previous: Option<(Pose, Option<GroundPlane>)>,
}

impl Pipeline {
    pub fn new(config: &RunConfig, options: RunOptions) -> Self {
        let mut swarm = config.swarm_params();
        if options.mode == Mode::Original {
            swarm.attenuation_gamma = 1.0;
        }
        let (w, h) = config.detector_size();
        Self {
            options,
            filter: config.filter_params(),
            validator: config.validator_params(),
            eval: config.eval_params(),
            depth_stride: config.depth_stride,
            inflate: config.mask_inflate_radius,
            detector_size: (w, h),
            window: CloudWindow::new(config.window_size),
            field: NeuralField::new(w, h),
            pheromone: PheromonePair::zeros(w, h),
            appearance: AppearanceModel::new(swarm.appearance_bins),
            swarm,
            previous: None,
        }
    }

    pub fn process(&mut self, kf: &Keyframe, gt: Option<&GroundTruth>) -> Result<FrameOutput, PipelineError> {
        let k = &kf.intrinsics;
        let (dw, dh) = self.detector_size;
        let expected = (k.width as usize, k.height as usize);
        if kf.rgb.dims() != expected || kf.depth.dims() != expected {
            return Err(PipelineError::FrameSize { index: kf.index, got: kf.rgb.dims(), expected });
        }
        let factor = expected.0 / dw;
        if factor == 0 || !expected.0.is_multiple_of(dw) || expected.1 != factor * dh {
            return Err(MaskSizeError { full_w: k.width, full_h: k.height, det_w: dw, det_h: dh }.into());
        }
        let mut timer = Timer::new(self.options.timings);

        let (plane, mask) = match self.options.mode {
            Mode::Original => (None, ObstacleMask::empty(dw, dh)),
            Mode::Full => self.cloud_stage(kf, &mut timer)?,
        };
        let pitch = plane.as_ref().map(estimate_pitch);
        let h_max = match pitch {
            Some(p) => horizon_row(p, k, self.detector_size),
            None => self.swarm.h_max_default,
        };
        timer.lap("horizon");

        let rgb_det = downsample_rgb(&kf.rgb, factor);
        let maps = conspicuity(&kf.rgb, self.detector_size);
        timer.lap("conspicuity");
        let swarm = run_swarm(&maps, &rgb_det, &mask, &self.appearance, &self.pheromone, &self.swarm, h_max);
        self.pheromone = swarm.pheromone;
        let saliency = combine_pheromone(&self.pheromone.color, &self.pheromone.intensity);
        timer.lap("swarm");

        let motion = motion_plane(kf);
        let h = match &self.previous {
            Some((prev_pose, Some(prev_plane))) => {
                scale_homography(&pose_homography(prev_pose, &kf.pose, prev_plane, k), factor as f64)
            }
            _ => Homography::identity(),
        };
        self.field = crate::detector::update_field(&self.field, &saliency, &h, &mask, &self.swarm);
        self.previous = Some((kf.pose, motion));
        timer.lap("field");

        let detection = extract_path(&self.field.activity, self.swarm.blob_threshold);
        self.appearance = self.appearance.update(&rgb_det, &detection);
        let validation = validate(&self.field, &mask, &detection, &self.validator, plane.is_none() && self.options.mode == Mode::Full);
        timer.lap("validate");

        let inputs = eval_inputs(&self.field.activity, self.swarm.blob_threshold, &self.eval);
        let frame_eval = gt.map(|g| evaluate_frame(&inputs, &g.trail, &self.eval));
        let runs_of = |pixels: &[(usize, usize)]| {
            let mut g = Grid::filled(dw, dh, false);
            for &(x, y) in pixels {
                g.set(x, y, true);
            }
            encode_runs(&g)
        };
        timer.lap("eval");

        let report = FrameReport {
            index: kf.index,
            plane: plane.as_ref().map(|p| p.coefficients()),
            pitch_deg: pitch,
            h_max,
            obstacle_pixels: mask.count_set(),
            centroid: detection.centroid.map(|(c, r)| [c, r]),
            blob_size: detection.blob.len(),
            verdict: validation.verdict,
            cause_hint: validation.cause_hint,
            overlap_fraction: validation.overlap_fraction,
            overlap_pixels: validation.overlap_pixels,
            bounding_rect: validation.bounding_rect,
            eval: frame_eval.as_ref().map_or(Outcome::NotApplicable, |e| e.outcome),
            containment: frame_eval.as_ref().map(|e| e.containment),
            axis_gap_deg: frame_eval.as_ref().and_then(|e| e.axis_gap_deg),
            blob_runs: encode_runs(&detection.to_grid(dw, dh)),
            mask_runs: encode_runs(&mask.bits),
            hot_runs: runs_of(&inputs.hot),
            eval_blob_runs: runs_of(&inputs.blob),
            timings_ms: timer.finish(),
        };
        Ok(FrameOutput { report, field: self.field.activity.clone(), detection, mask })
    }

    /// Window accumulation through mask construction. A failed plane fit
    /// yields an empty mask.
    fn cloud_stage(
        &mut self,
        kf: &Keyframe,
        timer: &mut Timer,
    ) -> Result<(Option<GroundPlane>, ObstacleMask), PipelineError> {
        let (dw, dh) = self.detector_size;
        let local = kf.local_cloud(self.depth_stride);
        let world = self.window.accumulate(kf.index, &local, &kf.pose)?;
        let mut merged = transform_cloud(&world, &kf.pose.inverse());
        merged.frame = Frame::Local(kf.index);
        timer.lap("accumulate");
        let (clean, _) = remove_outliers(&merged, &self.filter);
        timer.lap("outliers");
        let split = don_and_up_filter(&clean, &self.filter);
        timer.lap("normals");
        let seed = self.swarm.rng_seed.wrapping_add(kf.index as u64);
        let plane = fit_ground_plane(&split.plane_candidates, &split.plane_normals, &self.filter, seed).ok();
        timer.lap("plane");
        let mask = match &plane {
            Some(p) => {
                let obstacles = segment_obstacles(&split.obstacle_candidates, p, &self.filter);
                build_obstacle_mask(&obstacles, &kf.intrinsics, (dw, dh), self.inflate)?
            }
            None => ObstacleMask::empty(dw, dh),
        };
        timer.lap("mask");
        Ok((plane, mask))
    }
}

/// Dominant plane of one keyframe's coarse depth, used only for motion
/// compensation of the field.
fn motion_plane(kf: &Keyframe) -> Option<GroundPlane> {
    let pts: Vec<Vector3<f64>> = kf.local_cloud(MOTION_STRIDE).positions().copied().collect();
    fit_plane_ransac(&pts, None, MOTION_ITERATIONS, MOTION_GAMMA, 90.0, kf.index as u64).ok()
}

/// Runs a whole dataset, handing each frame's output to `sink` in order.
pub fn run_pipeline<E: From<PipelineError>>(
    dataset: &Dataset,
    config: &RunConfig,
    options: RunOptions,
    mut sink: impl FnMut(&Keyframe, FrameOutput) -> Result<(), E>,
) -> Result<(), E> {
    let mut pipeline = Pipeline::new(config, options);
    for (i, kf) in dataset.frames.iter().enumerate() {
        let gt = dataset.ground_truth.as_ref().map(|g| &g[i]);
        let out = pipeline.process(kf, gt)?;
        sink(kf, out)?;
    }
    Ok(())
}

/// Collects the report stream of a dataset.
pub fn run_reports(dataset: &Dataset, config: &RunConfig, options: RunOptions) -> Result<Vec<FrameOutput>, PipelineError> {
    let mut out = Vec::with_capacity(dataset.frames.len());
    run_pipeline(dataset, config, options, |_, o| {
        out.push(o);
        Ok::<_, PipelineError>(())
    })?;
    Ok(out)
}

/// Full-resolution overlay: obstacle mask tinted blue, detection blob red,
/// horizon row drawn in yellow.
pub fn annotate(rgb: &RgbImage, blob: &Grid<bool>, mask: &Grid<bool>, h_max: usize) -> RgbImage {
    let (w, h) = rgb.dims();
    let factor = (w / blob.width()).max(1);
    let horizon = h_max * factor + factor / 2;
    Grid::from_fn(w, h, |x, y| {
        if y == horizon {
            return [255, 220, 0];
        }
        let (dx, dy) = ((x / factor).min(blob.width() - 1), (y / factor).min(blob.height() - 1));
        let p = *rgb.get(x, y);
        if *blob.get(dx, dy) {
            [255, p[1] / 3, p[2] / 3]
        } else if *mask.get(dx, dy) {
            [p[0] / 2, p[1] / 2, ((p[2] as u16 + 255) / 2) as u8]
        } else {
            p
        }
    })
}
