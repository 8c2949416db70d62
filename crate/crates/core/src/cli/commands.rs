use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, DecoderConfig, PipelineConfig};
use crate::agent::{
    run_batch, AgentClient, HttpProvider, MockProvider, Provider, ProviderConfig, QuarantineRecord, ResponseCache,
    PROMPT_VERSION,
};
use crate::annotation::{emit_sft_record, tokenize, unify, write_sft_dataset, TargetKind, Tokenizer, UnifiedAnnotation, WordVocab, MAX_SEQ_LEN};
use crate::eval::{self, EvalError, ReportRow, RowCheck, RunManifest, RunScores};
use crate::ingest::{
    frame_count, frame_dir_complete, frame_files, load_frame_dir, sample_frames, scan_manifest_lenient,
    write_frame_dir, FfmpegDecoder, FrameDecoder, FrameDirDecoder, IngestError, SyntheticDecoder, VideoClip,
};
use crate::provenance::{write_sidecar, Provenance};
use crate::student::{greedy_decode, save_checkpoint, train_sft, write_trajectory, TrainConfig, TrainReport};
use crate::student::{FrameFeature, StudentError, ToyModel, FEATURE_DIM};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const QUARANTINE_FILE: &str = "quarantine.jsonl";
pub const REFERENCES_FILE: &str = "references.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const TRAJECTORY_FILE: &str = "trajectory.tsv";
pub const STUDENT_OUTPUTS_FILE: &str = "student_outputs.jsonl";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Student(#[from] StudentError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {reason}", path.display())]
    BadArtifact { path: PathBuf, reason: String },
    #[error("clip {clip_id}: {reason}")]
    Clip { clip_id: String, reason: String },
    #[error("{0}")]
    Provider(String),
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn provenance(cfg: &PipelineConfig) -> Provenance {
    Provenance::new(PROMPT_VERSION, cfg.seed, &cfg.digest())
}

/// Writes one JSON object per line and a provenance sidecar.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T], prov: &Provenance) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    write_sidecar(path, prov).map_err(io_err(path))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::BadArtifact { path: path.into(), reason: format!("line {}: {e}", i + 1) })
        })
        .collect()
}

fn pool(concurrency: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(concurrency.max(1)).build().expect("thread pool")
}

pub fn build_decoder(cfg: &PipelineConfig) -> Box<dyn FrameDecoder> {
    match &cfg.decoder {
        DecoderConfig::Ffmpeg { program } => Box::new(FfmpegDecoder::with_program(program)),
        DecoderConfig::FrameDir { root, fps } => Box::new(FrameDirDecoder::new(root, *fps)),
        DecoderConfig::Synthetic { width, height } => Box::new(SyntheticDecoder::new(*width, *height, cfg.seed)),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleSummary {
    pub clips: usize,
    pub sampled: usize,
    pub skipped: usize,
    pub frames: usize,
    /// `(clip id or manifest row, reason)`.
    pub failures: Vec<(String, String)>,
}

enum SampleOutcome {
    Sampled(usize),
    Skipped(usize),
}

/// Samples every manifest clip into `frames_dir`, skipping clips whose frames are already complete.
pub fn cmd_sample(cfg: &PipelineConfig) -> Result<SampleSummary, CliError> {
    let (clips, issues) = scan_manifest_lenient(&cfg.manifest)?;
    let decoder = build_decoder(cfg);
    let prov = provenance(cfg);
    let outcomes: Vec<(String, Result<SampleOutcome, IngestError>)> = pool(cfg.concurrency).install(|| {
        clips
            .par_iter()
            .map(|clip| (clip.clip_id.clone(), sample_one(cfg, clip, decoder.as_ref(), &prov)))
            .collect()
    });
    let mut s = SampleSummary { clips: clips.len() + issues.len(), ..Default::default() };
    for issue in issues {
        let label = issue.clip_id.clone().unwrap_or_else(|| format!("row {}", issue.row));
        s.failures.push((label, issue.to_string()));
    }
    for (id, outcome) in outcomes {
        match outcome {
            Ok(SampleOutcome::Sampled(n)) => {
                s.sampled += 1;
                s.frames += n;
            }
            Ok(SampleOutcome::Skipped(n)) => {
                s.skipped += 1;
                s.frames += n;
            }
            Err(e) => s.failures.push((id, e.to_string())),
        }
    }
    Ok(s)
}

fn sample_one(cfg: &PipelineConfig, clip: &VideoClip, decoder: &dyn FrameDecoder, prov: &Provenance) -> Result<SampleOutcome, IngestError> {
    let expected = frame_count(clip.duration_s, cfg.interval_s);
    if clip.duration_s >= cfg.interval_s && frame_dir_complete(&cfg.frames_dir, &clip.clip_id, cfg.interval_s, expected) {
        return Ok(SampleOutcome::Skipped(expected));
    }
    let seq = sample_frames(clip, cfg.interval_s, decoder)?;
    write_frame_dir(&cfg.frames_dir, &seq, Some(prov))?;
    Ok(SampleOutcome::Sampled(seq.len()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AnnotateSummary {
    pub clips: usize,
    pub annotated: usize,
    pub quarantined: usize,
    /// Provider attempts issued by this run; cache hits are not counted.
    pub provider_calls: usize,
}

fn make_provider(p: &ProviderConfig, mock: &Arc<MockProvider>) -> Result<Arc<dyn Provider>, CliError> {
    if p.is_mock() {
        return Ok(mock.clone());
    }
    if std::env::var(&p.api_key_env).map_or(true, |k| k.is_empty()) {
        return Err(CliError::Provider(format!(
            "provider {} needs an API key in environment variable {}",
            p.name, p.api_key_env
        )));
    }
    Ok(Arc::new(HttpProvider::new()))
}

/// Runs both agents over every sampled clip and writes annotations, quarantine records and references.
pub fn cmd_annotate(cfg: &PipelineConfig) -> Result<AnnotateSummary, CliError> {
    let (clips, _) = scan_manifest_lenient(&cfg.manifest)?;
    let mut mock = MockProvider::new(cfg.seed);
    for d in &cfg.mock_defects {
        mock = mock.with_defect(&d.clip_id, d.stage, d.parse()?);
    }
    let mock = Arc::new(mock);
    let cache = Arc::new(ResponseCache::with_dir(&cfg.cache_dir).map_err(io_err(&cfg.cache_dir))?);
    let client = |p: &ProviderConfig| -> Result<AgentClient, CliError> {
        AgentClient::new(p.clone(), make_provider(p, &mock)?, cache.clone()).map_err(|e| CliError::Provider(e.to_string()))
    };
    let scene_agent = client(&cfg.scene_provider)?;
    let risk_agent = client(&cfg.risk_provider)?;

    let loaded: Vec<_> = pool(cfg.concurrency)
        .install(|| clips.par_iter().map(|c| load_frame_dir(&cfg.frames_dir, &c.clip_id)).collect());
    let mut quarantine = Vec::new();
    let mut sequences = Vec::new();
    for (clip, seq) in clips.iter().zip(loaded) {
        match seq {
            Ok(seq) => sequences.push(seq),
            Err(e) => quarantine.push(QuarantineRecord {
                clip_id: clip.clip_id.clone(),
                stage: "frames".into(),
                error_kind: "missing_frames".into(),
                detail: e.to_string(),
            }),
        }
    }

    let mut annotations: Vec<UnifiedAnnotation> = Vec::new();
    for result in run_batch(&sequences, &scene_agent, &risk_agent, cfg.concurrency) {
        match result {
            Ok(out) => match unify(&out.clip_id, &out.scene, &out.clip_id, &out.risk) {
                Ok(u) => annotations.push(u),
                Err(e) => quarantine.push(QuarantineRecord {
                    clip_id: out.clip_id,
                    stage: "unify".into(),
                    error_kind: "unify".into(),
                    detail: e.to_string(),
                }),
            },
            Err(f) => quarantine.push(f.quarantine()),
        }
    }
    let order: BTreeMap<&str, usize> = clips.iter().enumerate().map(|(i, c)| (c.clip_id.as_str(), i)).collect();
    quarantine.sort_by_key(|q| order.get(q.clip_id.as_str()).copied());

    let prov = provenance(cfg);
    let dir = &cfg.annotations_dir;
    write_jsonl(&dir.join(ANNOTATIONS_FILE), &annotations, &prov)?;
    write_jsonl(&dir.join(QUARANTINE_FILE), &quarantine, &prov)?;
    let refs: BTreeMap<String, String> = annotations.iter().map(|a| (a.clip_id.clone(), a.unified_text.clone())).collect();
    eval::write_outputs(&dir.join(REFERENCES_FILE), &refs, Some(&prov))?;

    Ok(AnnotateSummary {
        clips: clips.len(),
        annotated: annotations.len(),
        quarantined: quarantine.len(),
        provider_calls: scene_agent.network_calls() + risk_agent.network_calls(),
    })
}

pub fn load_annotations(cfg: &PipelineConfig) -> Result<Vec<UnifiedAnnotation>, CliError> {
    read_jsonl(&cfg.annotations_dir.join(ANNOTATIONS_FILE))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub skipped: Vec<(String, String)>,
}

/// Turns annotations into SFT records. Image paths are stored relative to the dataset file.
pub fn cmd_build_dataset(cfg: &PipelineConfig, target: TargetKind, keep_going: bool) -> Result<DatasetSummary, CliError> {
    let annotations = load_annotations(cfg)?;
    let dataset_dir = cfg.dataset_path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut records = Vec::new();
    let mut summary = DatasetSummary::default();
    for a in &annotations {
        let built = frame_files(&cfg.frames_dir, &a.clip_id)
            .map_err(|e| e.to_string())
            .and_then(|paths| emit_sft_record(&a.clip_id, &paths, a, target).map_err(|e| e.to_string()));
        match built {
            Ok(mut rec) => {
                for img in &mut rec.images {
                    if let Some(rel) = pathdiff::diff_paths(&*img, &dataset_dir) {
                        *img = rel.to_string_lossy().into_owned();
                    }
                }
                records.push(rec);
            }
            Err(reason) if keep_going => summary.skipped.push((a.clip_id.clone(), reason)),
            Err(reason) => return Err(CliError::Clip { clip_id: a.clip_id.clone(), reason }),
        }
    }
    write_sft_dataset(&cfg.dataset_path, &records, &provenance(cfg))
        .map_err(|e| CliError::BadArtifact { path: cfg.dataset_path.clone(), reason: e.to_string() })?;
    summary.records = records.len();
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VocabFile {
    provenance: Provenance,
    vocab: WordVocab,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub clips: usize,
    pub vocab_size: usize,
    pub parameters: usize,
    pub truncated: usize,
    pub report: TrainReport,
    pub checkpoint: PathBuf,
}

/// A training example: the clip's frame feature and its label ids ending in EOS.
pub fn student_examples(
    cfg: &PipelineConfig,
    annotations: &[UnifiedAnnotation],
    vocab: &WordVocab,
) -> Result<(Vec<(FrameFeature, Vec<u32>)>, usize), CliError> {
    let features: Vec<Result<FrameFeature, IngestError>> = pool(cfg.concurrency).install(|| {
        annotations
            .par_iter()
            .map(|a| load_frame_dir(&cfg.frames_dir, &a.clip_id).map(|f| FrameFeature::from_frames(&f)))
            .collect()
    });
    let mut truncated = 0;
    let mut out = Vec::with_capacity(annotations.len());
    for (a, feature) in annotations.iter().zip(features) {
        let seq = tokenize(&a.unified_text, vocab);
        let mut ids = seq.ids;
        if ids.len() >= MAX_SEQ_LEN {
            ids.truncate(MAX_SEQ_LEN - 1);
            truncated += 1;
        }
        ids.push(vocab.eos_id());
        out.push((feature?, ids));
    }
    Ok((out, truncated))
}

/// Trains the toy student on the annotations and decodes one output per clip.
pub fn cmd_toy_train(cfg: &PipelineConfig, train: &TrainConfig) -> Result<TrainSummary, CliError> {
    let annotations = load_annotations(cfg)?;
    if annotations.is_empty() {
        return Err(StudentError::EmptyDataset.into());
    }
    let vocab = WordVocab::build(annotations.iter().map(|a| a.unified_text.as_str()), cfg.student.max_words);
    let (examples, truncated) = student_examples(cfg, &annotations, &vocab)?;
    let model = ToyModel::random(
        vocab.vocab_size(),
        FEATURE_DIM,
        vocab.bos_id(),
        Some(vocab.eos_id()),
        cfg.student.init_scale,
        cfg.seed,
    );
    let parameters = model.parameter_count();
    let (model, report) = train_sft(model, &examples, train)?;

    let prov = provenance(cfg);
    let dir = &cfg.student_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    save_checkpoint(&checkpoint, &model, Some(&prov))?;
    let vocab_path = dir.join(VOCAB_FILE);
    let mut body = serde_json::to_string(&VocabFile { provenance: prov.clone(), vocab: vocab.clone() }).expect("vocab serializes");
    body.push('\n');
    std::fs::write(&vocab_path, body).map_err(io_err(&vocab_path))?;
    let traj = dir.join(TRAJECTORY_FILE);
    write_trajectory(&traj, &report).map_err(io_err(&traj))?;
    write_sidecar(&traj, &prov).map_err(io_err(&traj))?;

    let decoded: Vec<Result<(String, String), StudentError>> = pool(cfg.concurrency).install(|| {
        examples
            .par_iter()
            .map(|(f, _)| greedy_decode(&model, f, cfg.student.max_decode_len).map(|ids| (f.clip_id.clone(), vocab.decode(&ids))))
            .collect()
    });
    let outputs: BTreeMap<String, String> = decoded.into_iter().collect::<Result<_, _>>()?;
    eval::write_outputs(&dir.join(STUDENT_OUTPUTS_FILE), &outputs, Some(&prov))?;

    Ok(TrainSummary { clips: examples.len(), vocab_size: vocab.vocab_size(), parameters, truncated, report, checkpoint })
}

/// Reloads the vocabulary written by [`cmd_toy_train`].
pub fn load_vocab(path: &Path) -> Result<WordVocab, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut f: VocabFile =
        serde_json::from_str(&text).map_err(|e| CliError::BadArtifact { path: path.into(), reason: e.to_string() })?;
    f.vocab.reindex();
    Ok(f.vocab)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub manifest: RunManifest,
    pub scores: RunScores,
    pub human: String,
}

pub fn cmd_evaluate(candidates: &Path, references: &Path, run_tag: &str) -> Result<EvaluationReport, CliError> {
    let cands = eval::load_outputs(candidates)?;
    let refs = eval::load_outputs(references)?;
    let scores = eval::score_run(run_tag, &cands, &refs)?;
    let manifest = RunManifest {
        run_tag: run_tag.into(),
        candidate_source: candidates.into(),
        reference_source: references.into(),
        clip_ids: refs.keys().cloned().collect(),
        metric_config_digest: scores.metric_config_digest.clone(),
    };
    let mut human = eval::render_report(&[ReportRow::from_bundle(run_tag, &scores.bundle)]).human;
    human.push_str(&format!(
        "\nclips: {} total, {} scored, {} quarantined\nmetric config {}: {}\n",
        scores.total,
        scores.per_clip.len(),
        scores.quarantined.len(),
        scores.metric_config_digest,
        scores.metric_config
    ));
    Ok(EvaluationReport { manifest, scores, human })
}

/// Writes `report.txt` and `report.json` under `dir`.
pub fn write_evaluation(dir: &Path, report: &EvaluationReport, prov: &Provenance) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let txt = dir.join("report.txt");
    std::fs::write(&txt, &report.human).map_err(io_err(&txt))?;
    write_sidecar(&txt, prov).map_err(io_err(&txt))?;
    let json = dir.join("report.json");
    let body = serde_json::json!({
        "provenance": prov,
        "manifest": report.manifest,
        "scores": report.scores,
    });
    let mut text = serde_json::to_string_pretty(&body).expect("report serializes");
    text.push('\n');
    std::fs::write(&json, text).map_err(io_err(&json))
}

/// Checks the stored benchmark rows, or rows read from a `{model_tag, bleu4, meteor, rouge_l, cider, score}` JSONL file.
pub fn cmd_verify(rows: Option<&Path>) -> Result<(Vec<ReportRow>, Vec<RowCheck>), CliError> {
    let rows = match rows {
        Some(p) => read_jsonl(p)?,
        None => eval::published_rows(),
    };
    let checks = eval::verify_rows(&rows);
    Ok((rows, checks))
}
