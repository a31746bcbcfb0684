use proptest::prelude::*;

use trailscan::config::RunConfig;
use trailscan::dataset::Dataset;
use trailscan::pipeline::{annotate, run_reports, FrameReport, Mode, Pipeline, RunOptions};
use trailscan::raster::{decode_runs, Grid};
use trailscan::synth::{render_sequence, suite};
use trailscan::validator::{CauseHint, Verdict};

fn dataset(name: &str, frames: usize) -> Dataset {
    let mut spec = suite(name, 0).unwrap();
    spec.camera_path.truncate(frames);
    let (frames, gt) = render_sequence(&spec).unwrap().into_iter().unzip();
    Dataset { name: Some(spec.name), intrinsics: spec.intrinsics, frames, ground_truth: Some(gt) }
}

fn stream(ds: &Dataset, cfg: &RunConfig, mode: Mode) -> String {
    run_reports(ds, cfg, RunOptions { mode, timings: false })
        .unwrap()
        .iter()
        .map(|o| o.report.to_json_line() + "\n")
        .collect()
}

#[test]
fn obstacle_free_suite_is_valid_throughout() {
    let ds = dataset("S1", 60);
    for o in run_reports(&ds, &RunConfig::default(), RunOptions::default()).unwrap() {
        assert_eq!(o.report.obstacle_pixels, 0, "frame {}", o.report.index);
        assert_eq!(o.report.verdict, Verdict::Valid, "frame {}", o.report.index);
    }
}

#[test]
fn full_mode_beats_original_on_distractor_suite() {
    let ds = dataset("S3", 40);
    let rate = |mode| {
        let out = run_reports(&ds, &RunConfig::default(), RunOptions { mode, timings: false }).unwrap();
        out.iter().filter(|o| o.report.eval == trailscan::eval::Outcome::Success).count()
    };
    assert!(rate(Mode::Full) >= rate(Mode::Original));
}

#[test]
fn report_lines_round_trip() {
    let ds = dataset("S2", 6);
    let text = stream(&ds, &RunConfig::default(), Mode::Full);
    let reports: Vec<FrameReport> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(reports.len(), 6);
    let again: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
    assert_eq!(again, text);
    assert!(reports.iter().all(|r| r.timings_ms.is_none()));
}

#[test]
fn timings_are_opt_in() {
    let ds = dataset("S1", 2);
    let out = run_reports(&ds, &RunConfig::default(), RunOptions { mode: Mode::Full, timings: true }).unwrap();
    let t = out[1].report.timings_ms.as_ref().unwrap();
    assert!(t.contains_key("swarm") && t.contains_key("plane"));
    assert!(t.values().all(|&ms| ms >= 0.0));
}

#[test]
fn missing_depth_means_no_plane() {
    let mut ds = dataset("S2", 3);
    for kf in &mut ds.frames[1..] {
        kf.depth = Grid::filled(640, 480, 0.0);
    }
    let cfg = RunConfig { window_size: 0, ..Default::default() };
    let out = run_reports(&ds, &cfg, RunOptions::default()).unwrap();
    assert!(out[0].report.plane.is_some());
    for o in &out[1..] {
        assert_eq!(o.report.plane, None);
        assert_eq!(o.report.obstacle_pixels, 0);
        assert_eq!((o.report.verdict, o.report.cause_hint), (Verdict::Suspect, CauseHint::NoPlane));
        assert_eq!(o.report.h_max, cfg.h_max_default);
    }
}

#[test]
fn original_mode_bypasses_cloud() {
    let ds = dataset("S2", 5);
    let out = run_reports(&ds, &RunConfig::default(), RunOptions { mode: Mode::Original, timings: false }).unwrap();
    for o in &out {
        assert_eq!(o.report.plane, None);
        assert_eq!(o.report.obstacle_pixels, 0);
        assert_ne!(o.report.cause_hint, CauseHint::NoPlane);
    }
}

#[test]
fn runs_encode_the_detection() {
    let ds = dataset("S2", 8);
    let mut p = Pipeline::new(&RunConfig::default(), RunOptions::default());
    for (kf, gt) in ds.frames.iter().zip(ds.ground_truth.as_ref().unwrap()) {
        let o = p.process(kf, Some(gt)).unwrap();
        assert_eq!(decode_runs(80, 60, &o.report.blob_runs), o.detection.to_grid(80, 60));
        assert_eq!(decode_runs(80, 60, &o.report.mask_runs), o.mask.bits);
        assert_eq!(o.report.blob_size, o.detection.blob.len());
    }
}

#[test]
fn annotation_colours() {
    let rgb = Grid::filled(16, 12, [10u8, 20, 30]);
    let blob = Grid::from_fn(4, 3, |x, y| x == 0 && y == 2);
    let mask = Grid::from_fn(4, 3, |x, y| x == 3 && y == 2);
    let out = annotate(&rgb, &blob, &mask, 0);
    assert_eq!(*out.get(0, 2), [255, 220, 0]);
    assert_eq!(*out.get(1, 9), [255, 6, 10]);
    assert_eq!(*out.get(13, 9), [5, 10, 142]);
    assert_eq!(*out.get(6, 6), [10, 20, 30]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn original_mode_ignores_cloud_parameters(
        k in 3usize..20,
        mult in 0.2f64..3.0,
        upsilon in 0.0f64..0.5,
        gamma in 0.01f64..0.2,
        window in 0usize..4,
        stride in 1usize..16,
    ) {
        let ds = dataset("S3", 4);
        let base = stream(&ds, &RunConfig::default(), Mode::Original);
        let cfg = RunConfig {
            outlier_k: k,
            outlier_stddev_mult: mult,
            obstacle_margin_upsilon: upsilon,
            ransac_inlier_gamma: gamma,
            window_size: window,
            depth_stride: stride,
            ..RunConfig::default()
        };
        prop_assert_eq!(stream(&ds, &cfg, Mode::Original), base);
    }
}
