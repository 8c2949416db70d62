//! Clip discovery, fixed-interval frame sampling and frame normalization.
//!
//! Every clip is sampled on the closed grid `t = k * interval` for
//! `k = 0..=floor(duration / interval)`, and each decoded raster is
//! center-cropped to a square and scaled to 224x224 (50,176 pixels).

mod decoder;
mod manifest;

use std::io;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provenance::Provenance;

pub use decoder::{DecodeResult, FfmpegDecoder, FrameDecoder, FrameDirDecoder, SyntheticDecoder};
pub(crate) use decoder::clip_seed;
pub use manifest::{parse_manifest, scan_manifest, scan_manifest_lenient, write_manifest, ManifestIssue, VideoClip};

pub const FRAME_SIDE: u32 = 224;
pub const PIXEL_BUDGET: u32 = 50_176;
pub const DEFAULT_INTERVAL_S: f64 = 0.5;
pub const MIN_DURATION_S: f64 = 1.0;
pub const MAX_DURATION_S: f64 = 60.0;

const FRAME_META_FILE: &str = "frames.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read manifest {}: {source}", path.display())]
    ManifestIo { path: PathBuf, source: io::Error },
    #[error("manifest {} rejected: {}", path.display(), join_issues(issues))]
    Manifest { path: PathBuf, issues: Vec<ManifestIssue> },
    #[error("sampling interval must be positive and finite, got {0}")]
    InvalidInterval(f64),
    #[error("clip {clip_id} lasts {duration_s} s, shorter than one {interval_s} s interval")]
    ClipTooShort { clip_id: String, duration_s: f64, interval_s: f64 },
    #[error("decode failed for clip {clip_id} at t={timestamp:.3}s: {reason}")]
    Decode { clip_id: String, timestamp: f64, reason: String },
    #[error("raster has a zero dimension ({width}x{height})")]
    EmptyRaster { width: u32, height: u32 },
    #[error("invalid frame sequence for {clip_id}: {reason}")]
    InvalidSequence { clip_id: String, reason: String },
    #[error("frame store {}: {source}", path.display())]
    FrameIo { path: PathBuf, source: io::Error },
    #[error("image {}: {source}", path.display())]
    Image { path: PathBuf, source: image::ImageError },
}

fn join_issues(issues: &[ManifestIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Sampled, normalized frames of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    clip_id: String,
    interval_s: f64,
    frames: Vec<RgbImage>,
    frame_times: Vec<f64>,
}

impl FrameSequence {
    pub fn new(
        clip_id: impl Into<String>,
        interval_s: f64,
        frames: Vec<RgbImage>,
        frame_times: Vec<f64>,
    ) -> Result<Self, IngestError> {
        let clip_id = clip_id.into();
        let bad = |reason: String| IngestError::InvalidSequence { clip_id: clip_id.clone(), reason };
        if !(interval_s.is_finite() && interval_s > 0.0) {
            return Err(IngestError::InvalidInterval(interval_s));
        }
        if frames.len() != frame_times.len() {
            return Err(bad(format!("{} frames but {} timestamps", frames.len(), frame_times.len())));
        }
        if frames.len() < 2 {
            return Err(bad(format!("need at least 2 frames, got {}", frames.len())));
        }
        for (k, (frame, &t)) in frames.iter().zip(&frame_times).enumerate() {
            if frame.width() * frame.height() != PIXEL_BUDGET || frame.width() != FRAME_SIDE {
                return Err(bad(format!("frame {k} is {}x{}", frame.width(), frame.height())));
            }
            if (t - k as f64 * interval_s).abs() > 1e-6 {
                return Err(bad(format!("frame {k} at {t} s is off the {interval_s} s grid")));
            }
        }
        Ok(Self { clip_id, interval_s, frames, frame_times })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn interval_s(&self) -> f64 {
        self.interval_s
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// SHA-256 over all frame bytes, in order.
    pub fn content_digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for frame in &self.frames {
            hasher.update(frame.as_raw());
        }
        hex::encode(hasher.finalize())
    }
}

/// Number of samples on the closed grid `0, i, 2i, ... <= d`.
pub fn frame_count(duration_s: f64, interval_s: f64) -> usize {
    (duration_s / interval_s + 1e-9).floor() as usize + 1
}

/// Samples `clip` every `interval_s` seconds starting at 0 and normalizes each frame.
pub fn sample_frames(
    clip: &VideoClip,
    interval_s: f64,
    decoder: &dyn FrameDecoder,
) -> Result<FrameSequence, IngestError> {
    if !(interval_s.is_finite() && interval_s > 0.0) {
        return Err(IngestError::InvalidInterval(interval_s));
    }
    if clip.duration_s < interval_s {
        return Err(IngestError::ClipTooShort {
            clip_id: clip.clip_id.clone(),
            duration_s: clip.duration_s,
            interval_s,
        });
    }
    let count = frame_count(clip.duration_s, interval_s);
    let mut frames = Vec::with_capacity(count);
    let mut times = Vec::with_capacity(count);
    for k in 0..count {
        let t = k as f64 * interval_s;
        let raw = decoder.decode_at(clip, t).map_err(|e| IngestError::Decode {
            clip_id: clip.clip_id.clone(),
            timestamp: t,
            reason: e.to_string(),
        })?;
        frames.push(normalize_frame(&raw).map_err(|e| IngestError::Decode {
            clip_id: clip.clip_id.clone(),
            timestamp: t,
            reason: e.to_string(),
        })?);
        times.push(t);
    }
    FrameSequence::new(clip.clip_id.clone(), interval_s, frames, times)
}

/// Largest centered square inside a `width x height` raster, as `(x, y, side)`.
pub fn center_crop_window(width: u32, height: u32) -> (u32, u32, u32) {
    let side = width.min(height);
    ((width - side) / 2, (height - side) / 2, side)
}

/// Center-crops to a square and scales to 224x224 with a bilinear kernel. A 224x224 input is returned unchanged.
pub fn normalize_frame(raster: &RgbImage) -> Result<RgbImage, IngestError> {
    use fast_image_resize::{images::Image, FilterType, PixelType, ResizeAlg, ResizeOptions, Resizer};

    let (width, height) = raster.dimensions();
    if width == 0 || height == 0 {
        return Err(IngestError::EmptyRaster { width, height });
    }
    if width == FRAME_SIDE && height == FRAME_SIDE {
        return Ok(raster.clone());
    }
    let (x, y, side) = center_crop_window(width, height);
    let resize_err = |reason: String| IngestError::InvalidSequence { clip_id: String::new(), reason };
    let square = image::imageops::crop_imm(raster, x, y, side, side).to_image();
    let src = Image::from_vec_u8(side, side, square.into_raw(), PixelType::U8x3)
        .map_err(|e| resize_err(e.to_string()))?;
    let mut dst = Image::new(FRAME_SIDE, FRAME_SIDE, PixelType::U8x3);
    let options = ResizeOptions::new().resize_alg(ResizeAlg::Convolution(FilterType::Bilinear));
    Resizer::new().resize(&src, &mut dst, &options).map_err(|e| resize_err(e.to_string()))?;
    Ok(RgbImage::from_raw(FRAME_SIDE, FRAME_SIDE, dst.into_vec()).expect("buffer sized for 224x224 RGB"))
}

/// `<root>/<clip_id>/frame_<k>.png` with `k` zero-padded to four digits.
pub fn frame_path(root: &Path, clip_id: &str, k: usize) -> PathBuf {
    root.join(clip_id).join(format!("frame_{k:04}.png"))
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameDirMeta {
    clip_id: String,
    interval_s: f64,
    frame_times: Vec<f64>,
    frame_files: Vec<String>,
    provenance: Option<Provenance>,
}

/// Writes the sequence as PNG files plus a `frames.json` index.
pub fn write_frame_dir(root: &Path, seq: &FrameSequence, provenance: Option<&Provenance>) -> Result<Vec<PathBuf>, IngestError> {
    let dir = root.join(seq.clip_id());
    std::fs::create_dir_all(&dir).map_err(|source| IngestError::FrameIo { path: dir.clone(), source })?;
    let mut paths = Vec::with_capacity(seq.len());
    for (k, frame) in seq.frames().iter().enumerate() {
        let path = frame_path(root, seq.clip_id(), k);
        frame.save(&path).map_err(|source| IngestError::Image { path: path.clone(), source })?;
        paths.push(path);
    }
    let meta = FrameDirMeta {
        clip_id: seq.clip_id().to_string(),
        interval_s: seq.interval_s(),
        frame_times: seq.frame_times().to_vec(),
        frame_files: (0..seq.len()).map(|k| format!("frame_{k:04}.png")).collect(),
        provenance: provenance.cloned(),
    };
    let meta_path = dir.join(FRAME_META_FILE);
    let mut body = serde_json::to_string_pretty(&meta).expect("frame meta serializes");
    body.push('\n');
    std::fs::write(&meta_path, body).map_err(|source| IngestError::FrameIo { path: meta_path, source })?;
    Ok(paths)
}

/// Frame files for a clip directory written by [`write_frame_dir`], if its index is present.
pub fn frame_files(root: &Path, clip_id: &str) -> Result<Vec<PathBuf>, IngestError> {
    let meta = read_meta(root, clip_id)?;
    let dir = root.join(clip_id);
    Ok(meta.frame_files.iter().map(|f| dir.join(f)).collect())
}

fn read_meta(root: &Path, clip_id: &str) -> Result<FrameDirMeta, IngestError> {
    let meta_path = root.join(clip_id).join(FRAME_META_FILE);
    let text = std::fs::read_to_string(&meta_path)
        .map_err(|source| IngestError::FrameIo { path: meta_path.clone(), source })?;
    serde_json::from_str(&text).map_err(|e| IngestError::InvalidSequence {
        clip_id: clip_id.to_string(),
        reason: format!("bad {}: {e}", meta_path.display()),
    })
}

/// Loads a sequence previously written by [`write_frame_dir`].
pub fn load_frame_dir(root: &Path, clip_id: &str) -> Result<FrameSequence, IngestError> {
    let meta = read_meta(root, clip_id)?;
    let dir = root.join(clip_id);
    let mut frames = Vec::with_capacity(meta.frame_files.len());
    for file in &meta.frame_files {
        let path = dir.join(file);
        let img = image::open(&path).map_err(|source| IngestError::Image { path: path.clone(), source })?;
        frames.push(img.to_rgb8());
    }
    FrameSequence::new(meta.clip_id, meta.interval_s, frames, meta.frame_times)
}

/// True when the directory already holds `expected` frames for this interval.
pub fn frame_dir_complete(root: &Path, clip_id: &str, interval_s: f64, expected: usize) -> bool {
    match read_meta(root, clip_id) {
        Ok(meta) => {
            meta.frame_files.len() == expected
                && (meta.interval_s - interval_s).abs() < 1e-12
                && meta.frame_files.iter().all(|f| root.join(clip_id).join(f).exists())
        }
        Err(_) => false,
    }
}
