use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use trailscan::config::RunConfig;
use trailscan::dataset::{load_dataset, write_dataset, write_ppm, Dataset};
use trailscan::eval::{evaluate_frame, summarize, EvalInputs, FrameRecord, Outcome};
use trailscan::pipeline::{annotate, run_pipeline, FrameReport, Mode, RunOptions};
use trailscan::raster::decode_runs;
use trailscan::synth::{render_sequence, suite, SUITE_NAMES};

#[derive(Parser)]
#[command(name = "trailscan", version, about = "Obstacle-aware trail detection over RGB-D keyframes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Original,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic datasets with ground truth.
    Gen {
        /// Suite name (S1..S5) or `all`.
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the detector over a dataset and write a JSON-Lines report.
    Run {
        #[arg(long)]
        data: PathBuf,
        /// Run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Write annotated frames into this directory.
        #[arg(long)]
        annotate: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Record per-stage timings in the report (breaks byte-identical reruns).
        #[arg(long)]
        timings: bool,
    },
    /// Score reports against ground truth and print summary metrics as JSON.
    Eval {
        /// Report file; repeat together with --data for several datasets.
        #[arg(long, required = true)]
        report: Vec<PathBuf>,
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-render overlays from a saved report.
    Annotate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Configuration used for the run; supplies the detector resolution.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn data(e: impl std::fmt::Display) -> Self {
        Failure::Data(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_reports(path: &Path) -> Result<Vec<FrameReport>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| Failure::Data(format!("{}: line {}: {e}", path.display(), n + 1)))?;
        out.push(r);
    }
    Ok(out)
}

fn gen(name: &str, out: &Path, seed: u64) -> Result<(), Failure> {
    let names: Vec<&str> = if name == "all" { SUITE_NAMES.to_vec() } else { vec![name] };
    for n in &names {
        let spec = suite(n, seed)
            .ok_or_else(|| Failure::Usage(format!("unknown suite {n:?}; expected one of {SUITE_NAMES:?} or \"all\"")))?;
        let seq = render_sequence(&spec).map_err(|e| Failure::Usage(format!("suite {n}: {e}")))?;
        let (frames, gt) = seq.into_iter().unzip();
        let ds = Dataset { name: Some(spec.name.clone()), intrinsics: spec.intrinsics, frames, ground_truth: Some(gt) };
        let dir = if names.len() > 1 { out.join(n) } else { out.to_path_buf() };
        write_dataset(&dir, &ds).map_err(Failure::data)?;
        eprintln!("wrote {} frames of {n} to {}", ds.frames.len(), dir.display());
    }
    Ok(())
}

fn run(
    data: &Path,
    config: Option<&Path>,
    report: &Path,
    annotate_dir: Option<&Path>,
    mode: Mode,
    timings: bool,
) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let ds = load_dataset(data).map_err(Failure::data)?;
    if let Some(dir) = annotate_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    let file = File::create(report).map_err(|e| Failure::Data(format!("{}: {e}", report.display())))?;
    let mut out = BufWriter::new(file);
    let (dw, dh) = cfg.detector_size();
    run_pipeline(&ds, &cfg, RunOptions { mode, timings }, |kf, frame| {
        writeln!(out, "{}", frame.report.to_json_line()).map_err(|e| Failure::Data(format!("{}: {e}", report.display())))?;
        if let Some(dir) = annotate_dir {
            let img = annotate(&kf.rgb, &frame.detection.to_grid(dw, dh), &frame.mask.bits, frame.report.h_max);
            write_ppm(&dir.join(format!("{:06}.ppm", kf.index)), &img).map_err(Failure::data)?;
        }
        Ok::<_, Failure>(())
    })?;
    out.flush().map_err(|e| Failure::Data(format!("{}: {e}", report.display())))?;
    Ok(())
}

impl From<trailscan::pipeline::PipelineError> for Failure {
    fn from(e: trailscan::pipeline::PipelineError) -> Self {
        Failure::data(e)
    }
}

fn eval(reports: &[PathBuf], data: &[PathBuf], config: Option<&Path>) -> Result<(), Failure> {
    if reports.len() != data.len() {
        return Err(Failure::Usage("give one --data directory per --report file".into()));
    }
    let params = load_config(config)?.eval_params();
    let mut suites = Vec::new();
    for (report_path, dir) in reports.iter().zip(data) {
        let ds = load_dataset(dir).map_err(Failure::data)?;
        let gts = ds.ground_truth.as_ref();
        let reports = read_reports(report_path)?;
        let mut records = Vec::with_capacity(reports.len());
        for r in &reports {
            let pos = ds.frames.iter().position(|f| f.index == r.index).ok_or_else(|| {
                Failure::Data(format!("{}: frame {} is not in {}", report_path.display(), r.index, dir.display()))
            })?;
            let outcome = match gts {
                Some(g) => {
                    let trail = &g[pos].trail;
                    let (w, h) = trail.dims();
                    let pixels = |runs: &[[u32; 3]]| {
                        let grid = decode_runs(w, h, runs);
                        (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| *grid.get(x, y)).collect()
                    };
                    let inputs = EvalInputs { hot: pixels(&r.hot_runs), blob: pixels(&r.eval_blob_runs) };
                    evaluate_frame(&inputs, trail, &params).outcome
                }
                None => Outcome::NotApplicable,
            };
            records.push(FrameRecord { outcome, overlap_fraction: r.overlap_fraction });
        }
        let name = ds.name.clone().unwrap_or_else(|| dir.display().to_string());
        suites.push((name, records));
    }
    let summary = summarize(&suites);
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn annotate_cmd(report: &Path, data: &Path, out: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let (w, h) = load_config(config)?.detector_size();
    let ds = load_dataset(data).map_err(Failure::data)?;
    let reports = read_reports(report)?;
    fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    for r in &reports {
        let kf = ds.frames.iter().find(|f| f.index == r.index).ok_or_else(|| {
            Failure::Data(format!("{}: frame {} is not in {}", report.display(), r.index, data.display()))
        })?;
        let img = annotate(&kf.rgb, &decode_runs(w, h, &r.blob_runs), &decode_runs(w, h, &r.mask_runs), r.h_max);
        write_ppm(&out.join(format!("{:06}.ppm", r.index)), &img).map_err(Failure::data)?;
    }
    eprintln!("wrote {} annotated frames to {}", reports.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen { suite, out, seed } => gen(suite, out, *seed),
        Command::Run { data, config, report, annotate, mode, timings } => {
            let mode = match mode {
                ModeArg::Full => Mode::Full,
                ModeArg::Original => Mode::Original,
            };
            run(data, config.as_deref(), report, annotate.as_deref(), mode, *timings)
        }
        Command::Eval { report, data, config } => eval(report, data, config.as_deref()),
        Command::Annotate { report, data, out, config } => annotate_cmd(report, data, out, config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
