//! On-disk keyframe datasets.
//!
//! ```text
//! intrinsics.json            {fx, fy, cx, cy, width, height}
//! poses.jsonl                {index, matrix: [16 numbers, row-major camera-to-world]}
//! frames/NNNNNN.ppm / .pfm   colour (P6) and z-depth in meters (Pf, little-endian)
//! gt/NNNNNN.trail.pgm        optional ground truth (P5, 255 = inside)
//! gt/NNNNNN.obst.pgm
//! gt/plane.json              {a, b, c, d, pitch_per_frame}
//! meta.json                  optional {name}
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GeomError, Intrinsics, Pose};
use crate::keyframe::Keyframe;
use crate::raster::{Grid, RgbImage};
use crate::synth::GroundTruth;

/// Orthonormality tolerance applied to poses read from disk.
pub const POSE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{dir}: frame index gap, {missing:06} missing between {before:06} and {after:06}")]
    Gap { dir: PathBuf, missing: usize, before: usize, after: usize },
    #[error("{0}: dataset has no frames")]
    Empty(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, reason: impl Into<String>) -> DatasetError {
    DatasetError::Format { path: path.to_path_buf(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: Option<String>,
    pub intrinsics: Intrinsics,
    pub frames: Vec<Keyframe>,
    pub ground_truth: Option<Vec<GroundTruth>>,
}

#[derive(Serialize, Deserialize)]
struct PoseLine {
    index: usize,
    matrix: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PlaneFile {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    pitch_per_frame: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    name: String,
}

pub fn frame_path(dir: &Path, index: usize, ext: &str) -> PathBuf {
    dir.join("frames").join(format!("{index:06}.{ext}"))
}

fn gt_path(dir: &Path, index: usize, kind: &str) -> PathBuf {
    dir.join("gt").join(format!("{index:06}.{kind}.pgm"))
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let bytes: Vec<u8> = img.data().iter().flatten().copied().collect();
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(&bytes, img.width() as u32, img.height() as u32, ExtendedColorType::Rgb8)
        .map_err(|e| format_err(path, e.to_string()))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage, DatasetError> {
    let img = decode(path)?;
    let rgb = img.as_rgb8().ok_or_else(|| format_err(path, "expected 8-bit RGB (P6)"))?;
    let (w, h) = rgb.dimensions();
    let data = rgb.pixels().map(|p| p.0).collect();
    Ok(Grid::from_vec(w as usize, h as usize, data))
}

pub fn write_pgm_mask(path: &Path, mask: &Grid<bool>) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let bytes: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&bytes, mask.width() as u32, mask.height() as u32, ExtendedColorType::L8)
        .map_err(|e| format_err(path, e.to_string()))
}

pub fn read_pgm_mask(path: &Path) -> Result<Grid<bool>, DatasetError> {
    let img = decode(path)?;
    let g = img.as_luma8().ok_or_else(|| format_err(path, "expected 8-bit greyscale (P5)"))?;
    let (w, h) = g.dimensions();
    Ok(Grid::from_vec(w as usize, h as usize, g.pixels().map(|p| p.0[0] >= 128).collect()))
}

fn decode(path: &Path) -> Result<image::DynamicImage, DatasetError> {
    let reader = ImageReader::open(path).map_err(io_err(path))?.with_guessed_format().map_err(io_err(path))?;
    reader.decode().map_err(|e| format_err(path, e.to_string()))
}

/// PFM rows run bottom to top.
pub fn write_pfm(path: &Path, depth: &Grid<f32>) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let (width, height) = depth.dims();
    let mut buf = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    buf.reserve(width * height * 4);
    for y in (0..height).rev() {
        for v in depth.row(y) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn read_pfm(path: &Path) -> Result<Grid<f32>, DatasetError> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
    // magic, width, height and scale, each terminated by whitespace
    let mut tokens = Vec::with_capacity(4);
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos || start > 64 {
            return Err(format_err(path, "truncated or malformed PFM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "Pf" {
        return Err(format_err(path, format!("expected single-channel PFM magic 'Pf', found '{}'", tokens[0])));
    }
    let parse_dim = |t: &str| t.parse::<usize>().ok().filter(|&v| v > 0);
    let (Some(width), Some(height)) = (parse_dim(&tokens[1]), parse_dim(&tokens[2])) else {
        return Err(format_err(path, "malformed PFM dimensions"));
    };
    let scale: f64 = tokens[3].parse().map_err(|_| format_err(path, "malformed PFM scale"))?;
    if scale >= 0.0 {
        return Err(format_err(path, "big-endian PFM is not supported (scale must be negative)"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * 4;
    if bytes.len() < pos + need {
        return Err(format_err(path, format!("PFM raster too short: {} of {need} bytes", bytes.len().saturating_sub(pos))));
    }
    let raw = &bytes[pos..pos + need];
    let mut data = vec![0f32; width * height];
    for (i, chunk) in raw.chunks_exact(4).enumerate() {
        let (row_from_bottom, x) = (i / width, i % width);
        let y = height - 1 - row_from_bottom;
        data[y * width + x] = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
    }
    Ok(Grid::from_vec(width, height, data))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<(), DatasetError> {
    fs::create_dir_all(dir.join("frames")).map_err(io_err(dir))?;
    write_json(&dir.join("intrinsics.json"), &dataset.intrinsics)?;
    if let Some(name) = &dataset.name {
        write_json(&dir.join("meta.json"), &Meta { name: name.clone() })?;
    }
    let poses_path = dir.join("poses.jsonl");
    let mut poses = String::new();
    for kf in &dataset.frames {
        let line = PoseLine { index: kf.index, matrix: kf.pose.to_row_major().to_vec() };
        poses += &serde_json::to_string(&line).expect("pose serializes");
        poses.push('\n');
        write_ppm(&frame_path(dir, kf.index, "ppm"), &kf.rgb)?;
        write_pfm(&frame_path(dir, kf.index, "pfm"), &kf.depth)?;
    }
    fs::write(&poses_path, poses).map_err(io_err(&poses_path))?;
    if let Some(gts) = &dataset.ground_truth {
        fs::create_dir_all(dir.join("gt")).map_err(io_err(dir))?;
        for (kf, gt) in dataset.frames.iter().zip(gts) {
            write_pgm_mask(&gt_path(dir, kf.index, "trail"), &gt.trail)?;
            write_pgm_mask(&gt_path(dir, kf.index, "obst"), &gt.obstacles)?;
        }
        let plane = gts.first().map_or([0.0, -1.0, 0.0, 0.0], |g| g.plane);
        write_json(
            &dir.join("gt").join("plane.json"),
            &PlaneFile {
                a: plane[0],
                b: plane[1],
                c: plane[2],
                d: plane[3],
                pitch_per_frame: gts.iter().map(|g| g.pitch_deg).collect(),
            },
        )?;
    }
    Ok(())
}

/// Frame indices present in `frames/` with the given extension.
fn indices(dir: &Path, ext: &str) -> Result<Vec<usize>, DatasetError> {
    let frames = dir.join("frames");
    let mut out = Vec::new();
    for entry in fs::read_dir(&frames).map_err(io_err(&frames))? {
        let entry = entry.map_err(io_err(&frames))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(&format!(".{ext}")) {
            let idx = stem.parse::<usize>().map_err(|_| format_err(&entry.path(), "frame file name is not a number"))?;
            out.push(idx);
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn read_poses(path: &Path) -> Result<BTreeMap<usize, Pose>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |reason: String| format_err(path, format!("line {}: {reason}", n + 1));
        let parsed: PoseLine = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let m: [f64; 16] =
            parsed.matrix.as_slice().try_into().map_err(|_| at(format!("matrix has {} entries, expected 16", parsed.matrix.len())))?;
        let pose = Pose::from_row_major(&m, POSE_TOLERANCE).map_err(|e| {
            at(match e {
                GeomError::ImproperRotation(det) => format!("improper rotation (determinant {det:.6}) for index {}", parsed.index),
                other => format!("{other} for index {}", parsed.index),
            })
        })?;
        if out.insert(parsed.index, pose).is_some() {
            return Err(at(format!("duplicate pose for index {}", parsed.index)));
        }
    }
    Ok(out)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let k_path = dir.join("intrinsics.json");
    let intrinsics: Intrinsics = read_json(&k_path)?;
    intrinsics.validate().map_err(|e| format_err(&k_path, e.to_string()))?;
    let meta_path = dir.join("meta.json");
    let name = if meta_path.exists() { Some(read_json::<Meta>(&meta_path)?.name) } else { None };

    let ppm = indices(dir, "ppm")?;
    let pfm = indices(dir, "pfm")?;
    if ppm.is_empty() {
        return Err(DatasetError::Empty(dir.to_path_buf()));
    }
    for pair in ppm.windows(2) {
        if pair[1] != pair[0] + 1 {
            return Err(DatasetError::Gap { dir: dir.join("frames"), missing: pair[0] + 1, before: pair[0], after: pair[1] });
        }
    }
    for &i in &ppm {
        if pfm.binary_search(&i).is_err() {
            return Err(format_err(&frame_path(dir, i, "pfm"), "missing depth for frame"));
        }
    }
    let poses_path = dir.join("poses.jsonl");
    let poses = read_poses(&poses_path)?;
    let (w, h) = (intrinsics.width as usize, intrinsics.height as usize);

    let mut frames = Vec::with_capacity(ppm.len());
    for &i in &ppm {
        let rgb_path = frame_path(dir, i, "ppm");
        let rgb = read_ppm(&rgb_path)?;
        if rgb.dims() != (w, h) {
            return Err(format_err(&rgb_path, format!("image is {}x{}, intrinsics say {w}x{h}", rgb.width(), rgb.height())));
        }
        let depth_path = frame_path(dir, i, "pfm");
        let depth = read_pfm(&depth_path)?;
        if depth.dims() != (w, h) {
            return Err(format_err(&depth_path, format!("depth is {}x{}, colour is {w}x{h}", depth.width(), depth.height())));
        }
        let pose = *poses.get(&i).ok_or_else(|| format_err(&poses_path, format!("missing pose for frame {i:06}")))?;
        frames.push(Keyframe { index: i, rgb, depth, pose, intrinsics });
    }

    let ground_truth = load_ground_truth(dir, &ppm, (w, h))?;
    Ok(Dataset { name, intrinsics, frames, ground_truth })
}

fn load_ground_truth(dir: &Path, idx: &[usize], full: (usize, usize)) -> Result<Option<Vec<GroundTruth>>, DatasetError> {
    let gt_dir = dir.join("gt");
    let plane_path = gt_dir.join("plane.json");
    let any_mask = idx.iter().any(|&i| gt_path(dir, i, "trail").exists() || gt_path(dir, i, "obst").exists());
    if !plane_path.exists() && !any_mask {
        return Ok(None);
    }
    if !plane_path.exists() {
        return Err(format_err(&plane_path, "ground truth is incomplete: plane file missing"));
    }
    let plane: PlaneFile = read_json(&plane_path)?;
    if plane.pitch_per_frame.len() != idx.len() {
        return Err(format_err(
            &plane_path,
            format!("pitch_per_frame has {} entries for {} frames", plane.pitch_per_frame.len(), idx.len()),
        ));
    }
    let mut out = Vec::with_capacity(idx.len());
    let mut size: Option<(usize, usize)> = None;
    for (n, &i) in idx.iter().enumerate() {
        let mut masks = Vec::with_capacity(2);
        for kind in ["trail", "obst"] {
            let p = gt_path(dir, i, kind);
            if !p.exists() {
                return Err(format_err(&p, "ground truth is incomplete: mask missing"));
            }
            let m = read_pgm_mask(&p)?;
            let dims = m.dims();
            let fits = dims.0 > 0 && full.0.is_multiple_of(dims.0) && full.1.is_multiple_of(dims.1) && full.0 / dims.0 == full.1 / dims.1;
            if !fits || size.is_some_and(|s| s != dims) {
                return Err(format_err(&p, format!("mask is {}x{}, incompatible with {}x{} frames", dims.0, dims.1, full.0, full.1)));
            }
            size = Some(dims);
            masks.push(m);
        }
        let obstacles = masks.pop().expect("two masks");
        let trail = masks.pop().expect("two masks");
        out.push(GroundTruth {
            trail,
            obstacles,
            plane: [plane.a, plane.b, plane.c, plane.d],
            pitch_deg: plane.pitch_per_frame[n],
        });
    }
    Ok(Some(out))
}
