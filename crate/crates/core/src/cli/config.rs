use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{MockDefect, ProviderConfig, Stage};
use crate::ingest::{write_manifest, VideoClip, DEFAULT_INTERVAL_S};
use crate::provenance::short_digest;
use crate::student::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("config: {0}")]
    Invalid(String),
}

/// Where sampled frames come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecoderConfig {
    Ffmpeg {
        #[serde(default = "default_ffmpeg")]
        program: PathBuf,
    },
    /// Pre-extracted `<root>/<clip_id>/frame_<k>.png` files at `fps`.
    FrameDir { root: PathBuf, fps: f64 },
    /// Generated footage; needs no media on disk.
    Synthetic {
        #[serde(default = "default_synth_w")]
        width: u32,
        #[serde(default = "default_synth_h")]
        height: u32,
    },
}

fn default_ffmpeg() -> PathBuf {
    PathBuf::from("ffmpeg")
}
fn default_synth_w() -> u32 {
    320
}
fn default_synth_h() -> u32 {
    240
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self::Ffmpeg { program: default_ffmpeg() }
    }
}

/// A fault injected into the mock provider, e.g. `{ clip_id = "c3", stage = "scene", defect = "missing:weather" }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectSpec {
    pub clip_id: String,
    pub stage: Stage,
    pub defect: String,
}

impl DefectSpec {
    pub fn parse(&self) -> Result<MockDefect, ConfigError> {
        let (head, arg) = match self.defect.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (self.defect.as_str(), None),
        };
        Ok(match (head, arg) {
            ("missing", Some(field)) => MockDefect::MissingSection(field.to_string()),
            ("bad_enum", None) => MockDefect::BadEnum,
            ("malformed", None) => MockDefect::Malformed,
            ("auth", None) => MockDefect::Auth,
            ("transient", Some(n)) => MockDefect::Transient(
                n.parse().map_err(|_| ConfigError::Invalid(format!("bad transient count in {:?}", self.defect)))?,
            ),
            _ => return Err(ConfigError::Invalid(format!("unknown mock defect {:?}", self.defect))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Word entries kept in the tokenizer vocabulary.
    #[serde(default = "default_max_words")]
    pub max_words: usize,
    /// Standard deviation scale of the initial parameters.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_decode_len")]
    pub max_decode_len: usize,
}

fn default_epochs() -> usize {
    TrainConfig::default().epochs
}
fn default_lr() -> f64 {
    TrainConfig::default().learning_rate
}
fn default_batch() -> usize {
    TrainConfig::default().batch_size
}
fn default_max_words() -> usize {
    1024
}
fn default_init_scale() -> f64 {
    0.01
}
fn default_decode_len() -> usize {
    512
}

impl Default for StudentConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            learning_rate: default_lr(),
            batch_size: default_batch(),
            max_words: default_max_words(),
            init_scale: default_init_scale(),
            max_decode_len: default_decode_len(),
        }
    }
}

impl StudentConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { epochs: self.epochs, learning_rate: self.learning_rate, batch_size: self.batch_size }
    }
}

/// Everything a pipeline run needs. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub frames_dir: PathBuf,
    pub annotations_dir: PathBuf,
    pub dataset_path: PathBuf,
    #[serde(default = "default_student_dir")]
    pub student_dir: PathBuf,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_interval")]
    pub interval_s: f64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub decoder: DecoderConfig,
    pub scene_provider: ProviderConfig,
    pub risk_provider: ProviderConfig,
    #[serde(default)]
    pub student: StudentConfig,
    #[serde(default)]
    pub mock_defects: Vec<DefectSpec>,
}

fn default_student_dir() -> PathBuf {
    PathBuf::from("student")
}
fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}
fn default_interval() -> f64 {
    DEFAULT_INTERVAL_S
}
fn default_concurrency() -> usize {
    4
}

impl PipelineConfig {
    /// An all-mock configuration rooted at `root`, using synthetic footage.
    pub fn mock(root: &Path, seed: u64) -> Self {
        Self {
            manifest: root.join("manifest.jsonl"),
            frames_dir: root.join("frames"),
            annotations_dir: root.join("annotations"),
            dataset_path: root.join("dataset/sft.jsonl"),
            student_dir: root.join("student"),
            cache_dir: root.join("cache"),
            interval_s: DEFAULT_INTERVAL_S,
            concurrency: default_concurrency(),
            seed,
            decoder: DecoderConfig::Synthetic { width: default_synth_w(), height: default_synth_h() },
            scene_provider: ProviderConfig::mock("mock-scene"),
            risk_provider: ProviderConfig::mock("mock-risk"),
            student: StudentConfig::default(),
            mock_defects: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.frames_dir);
        fix(&mut self.annotations_dir);
        fix(&mut self.dataset_path);
        fix(&mut self.student_dir);
        fix(&mut self.cache_dir);
        match &mut self.decoder {
            DecoderConfig::FrameDir { root, .. } => fix(root),
            DecoderConfig::Ffmpeg { program } if program.components().count() > 1 => fix(program),
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.interval_s.is_finite() && self.interval_s > 0.0) {
            return Err(ConfigError::Invalid(format!("interval_s must be positive, got {}", self.interval_s)));
        }
        if self.concurrency == 0 {
            return Err(ConfigError::Invalid("concurrency must be at least 1".into()));
        }
        for p in [&self.scene_provider, &self.risk_provider] {
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let DecoderConfig::FrameDir { fps, .. } = self.decoder {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(ConfigError::Invalid(format!("decoder fps must be positive, got {fps}")));
            }
        }
        for d in &self.mock_defects {
            d.parse()?;
        }
        Ok(())
    }

    /// Short digest of the effective settings. Filesystem locations are left
    /// out so a relocated run directory keeps its digest.
    pub fn digest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is a table");
        for key in ["manifest", "frames_dir", "annotations_dir", "dataset_path", "student_dir", "cache_dir"] {
            obj.remove(key);
        }
        short_digest(v.to_string().as_bytes())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Lays out a self-contained mock run under `root`: `n` synthetic clips of
/// 3 to 7 s in `manifest.jsonl` and a matching `roadscene.toml`.
pub fn write_mock_workspace(root: &Path, n: usize, seed: u64) -> std::io::Result<PipelineConfig> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let clips: Vec<VideoClip> = (0..n)
        .map(|i| VideoClip {
            clip_id: format!("clip_{i:03}"),
            source_path: PathBuf::from(format!("videos/clip_{i:03}.mp4")),
            duration_s: f64::from(rng.random_range(6u32..=14)) / 2.0,
            region_tag: ["urban", "highway", "rural"][i % 3].into(),
            captured_at: None,
        })
        .collect();
    std::fs::create_dir_all(root)?;
    write_manifest(&root.join("manifest.jsonl"), &clips)?;
    let mut cfg = PipelineConfig::mock(Path::new(""), seed);
    std::fs::write(root.join("roadscene.toml"), cfg.to_toml())?;
    cfg.resolve_paths(root);
    Ok(cfg)
}
