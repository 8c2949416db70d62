use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{frame_path, VideoClip};

pub type DecodeResult = Result<RgbImage, Box<dyn Error + Send + Sync>>;

/// Produces the raster shown at (or nearest to) time `t` in a clip.
///
/// Implementations are shared across sampling workers.
pub trait FrameDecoder: Send + Sync {
    fn decode_at(&self, clip: &VideoClip, t: f64) -> DecodeResult;
}

/// Shells out to an `ffmpeg` executable, one invocation per frame.
#[derive(Debug, Clone)]
pub struct FfmpegDecoder {
    program: PathBuf,
}

impl Default for FfmpegDecoder {
    fn default() -> Self {
        Self { program: PathBuf::from("ffmpeg") }
    }
}

impl FfmpegDecoder {
    pub fn with_program(program: impl Into<PathBuf>) -> Self {
        Self { program: program.into() }
    }

    fn grab(&self, source: &Path, seek: &[&str]) -> Result<Vec<u8>, Box<dyn Error + Send + Sync>> {
        let output = Command::new(&self.program)
            .args(["-nostdin", "-v", "error"])
            .args(seek)
            .arg("-i")
            .arg(source)
            .args(["-frames:v", "1", "-f", "image2pipe", "-vcodec", "png", "-"])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .output()
            .map_err(|e| format!("failed to run {}: {e}", self.program.display()))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(format!("{} exited with {}: {}", self.program.display(), output.status, stderr.trim()).into());
        }
        Ok(output.stdout)
    }
}

impl FrameDecoder for FfmpegDecoder {
    fn decode_at(&self, clip: &VideoClip, t: f64) -> DecodeResult {
        let ts = format!("{t:.3}");
        let mut png = self.grab(&clip.source_path, &["-ss", &ts])?;
        if png.is_empty() {
            // Seeking at the container end yields nothing; take the last frame instead.
            png = self.grab(&clip.source_path, &["-sseof", "-0.1"])?;
        }
        if png.is_empty() {
            return Err("decoder produced no frame".into());
        }
        Ok(image::load_from_memory(&png)?.to_rgb8())
    }
}

/// Reads pre-extracted frames laid out as `<root>/<clip_id>/frame_<k>.png`.
///
/// Frame `k` is taken to sit at `k / fps` seconds; requests between frames
/// resolve to the nearest available index.
#[derive(Debug, Clone)]
pub struct FrameDirDecoder {
    root: PathBuf,
    fps: f64,
}

impl FrameDirDecoder {
    pub fn new(root: impl Into<PathBuf>, fps: f64) -> Self {
        Self { root: root.into(), fps }
    }

    fn available(&self, clip_id: &str) -> std::io::Result<Vec<usize>> {
        let mut indices: Vec<usize> = std::fs::read_dir(self.root.join(clip_id))?
            .filter_map(|entry| entry.ok())
            .filter_map(|entry| {
                let name = entry.file_name().into_string().ok()?;
                name.strip_prefix("frame_")?.strip_suffix(".png")?.parse().ok()
            })
            .collect();
        indices.sort_unstable();
        Ok(indices)
    }
}

impl FrameDecoder for FrameDirDecoder {
    fn decode_at(&self, clip: &VideoClip, t: f64) -> DecodeResult {
        let wanted = (t * self.fps).round().max(0.0) as usize;
        let mut path = frame_path(&self.root, &clip.clip_id, wanted);
        if !path.exists() {
            let nearest = self
                .available(&clip.clip_id)?
                .into_iter()
                .min_by_key(|k| k.abs_diff(wanted))
                .ok_or("frame directory is empty")?;
            path = frame_path(&self.root, &clip.clip_id, nearest);
        }
        Ok(image::open(&path)?.to_rgb8())
    }
}

/// Deterministic stand-in footage: a tinted road scene with a block that
/// drifts over time. Output depends only on (seed, clip_id, t).
#[derive(Debug, Clone)]
pub struct SyntheticDecoder {
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for SyntheticDecoder {
    fn default() -> Self {
        Self { width: 640, height: 360, seed: 0 }
    }
}

impl SyntheticDecoder {
    pub fn new(width: u32, height: u32, seed: u64) -> Self {
        Self { width, height, seed }
    }
}

pub(crate) fn clip_seed(seed: u64, clip_id: &str) -> u64 {
    // FNV-1a over the id, mixed with the run seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in clip_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl FrameDecoder for SyntheticDecoder {
    fn decode_at(&self, clip: &VideoClip, t: f64) -> DecodeResult {
        if self.width == 0 || self.height == 0 {
            return Err("synthetic decoder configured with zero dimension".into());
        }
        if t < 0.0 || t > clip.duration_s + 1e-9 {
            return Err(format!("timestamp {t} outside clip of {} s", clip.duration_s).into());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(clip_seed(self.seed, &clip.clip_id));
        let sky: [u8; 3] = rng.random();
        let road: [u8; 3] = rng.random();
        let car: [u8; 3] = rng.random();
        let speed: f64 = rng.random_range(10.0..60.0);
        let horizon = self.height / 3;
        let car_w = (self.width / 8).max(1);
        let car_h = (self.height / 10).max(1);
        let car_x = ((t * speed) as u32) % self.width.max(1);
        let car_y = horizon + (self.height - horizon) / 2;

        Ok(RgbImage::from_fn(self.width, self.height, |x, y| {
            let in_car = x >= car_x && x < car_x + car_w && y >= car_y && y < car_y + car_h;
            let base = if in_car {
                car
            } else if y < horizon {
                sky
            } else {
                road
            };
            let shade = ((x + y) % 16) as u8;
            Rgb([base[0].wrapping_add(shade), base[1], base[2].wrapping_sub(shade)])
        }))
    }
}
