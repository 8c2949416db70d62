//! Conversation records for supervised fine-tuning.
//!
//! One JSON object per line:
//!
//! | field      | type                          | meaning                                  |
//! |------------|-------------------------------|------------------------------------------|
//! | `id`       | string                        | clip id                                  |
//! | `images`   | array of string               | frame paths, temporal order              |
//! | `messages` | array of `{role, content}`    | `system`, `user`, `assistant`, in order  |
//!
//! The user message opens with one `<image>` placeholder per entry of
//! `images`, one per line, followed by the instruction. The assistant message
//! is the training target.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::UnifiedAnnotation;
use crate::agent::prompts::{TEMPLATE_USER, TRAINING_SYSTEM, TRAINING_USER};
use crate::provenance::{write_sidecar, Provenance};

pub const IMAGE_PLACEHOLDER: &str = "<image>";

/// Which rendering of the label the assistant turn carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    #[default]
    Unified,
    Template,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub id: String,
    pub images: Vec<String>,
    pub messages: Vec<SftMessage>,
}

impl SftRecord {
    pub fn assistant_text(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Error)]
pub enum SftError {
    #[error("clip {clip_id}: frame file {path} is missing")]
    MissingFrame { clip_id: String, path: PathBuf },
    #[error("clip {0}: no frames")]
    NoFrames(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub fn emit_sft_record(
    clip_id: &str,
    frame_paths: &[PathBuf],
    unified: &UnifiedAnnotation,
    target: TargetKind,
) -> Result<SftRecord, SftError> {
    if frame_paths.is_empty() {
        return Err(SftError::NoFrames(clip_id.into()));
    }
    if let Some(missing) = frame_paths.iter().find(|p| !p.is_file()) {
        return Err(SftError::MissingFrame { clip_id: clip_id.into(), path: missing.clone() });
    }
    let (instruction, answer) = match target {
        TargetKind::Unified => (TRAINING_USER, &unified.unified_text),
        TargetKind::Template => (TEMPLATE_USER, &unified.template_text),
    };
    let mut user = vec![IMAGE_PLACEHOLDER; frame_paths.len()].join("\n");
    user.push('\n');
    user.push_str(instruction.trim_end());
    Ok(SftRecord {
        id: clip_id.into(),
        images: frame_paths.iter().map(|p| p.to_string_lossy().into_owned()).collect(),
        messages: vec![
            SftMessage { role: "system".into(), content: TRAINING_SYSTEM.trim_end().into() },
            SftMessage { role: "user".into(), content: user },
            SftMessage { role: "assistant".into(), content: answer.clone() },
        ],
    })
}

/// Checks one dataset line against the record layout.
pub fn validate_sft_record(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("record is not an object")?;
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    if keys != ["id", "images", "messages"] {
        return Err(format!("unexpected fields {keys:?}"));
    }
    let id = obj["id"].as_str().ok_or("id is not a string")?;
    if id.is_empty() {
        return Err("id is empty".into());
    }
    let images = obj["images"].as_array().ok_or("images is not an array")?;
    if images.is_empty() || images.iter().any(|i| i.as_str().is_none_or(str::is_empty)) {
        return Err("images must be a non-empty array of paths".into());
    }
    let messages = obj["messages"].as_array().ok_or("messages is not an array")?;
    let roles: Vec<&str> = messages.iter().filter_map(|m| m.get("role").and_then(Value::as_str)).collect();
    if roles != ["system", "user", "assistant"] {
        return Err(format!("roles must be system, user, assistant; got {roles:?}"));
    }
    for m in messages {
        let content = m.get("content").and_then(Value::as_str).ok_or("message content is not a string")?;
        if content.trim().is_empty() {
            return Err("empty message content".into());
        }
        if m.as_object().is_some_and(|o| o.len() != 2) {
            return Err("messages carry only role and content".into());
        }
    }
    let user = messages[1]["content"].as_str().unwrap_or_default();
    let placeholders = user.matches(IMAGE_PLACEHOLDER).count();
    if placeholders != images.len() {
        return Err(format!("{placeholders} image placeholders for {} images", images.len()));
    }
    if !user.contains("a two-part response") && !user.contains("[Scene]") {
        return Err("user instruction does not ask for the two-part response".into());
    }
    Ok(())
}

/// Writes records as JSON lines through a single writer, plus a provenance sidecar.
pub fn write_sft_dataset(path: &Path, records: &[SftRecord], provenance: &Provenance) -> Result<(), SftError> {
    let io = |source| SftError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| io(e.into()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)?;
    write_sidecar(path, provenance).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{mock_risk_text, mock_scene_text, parse_risk_response, parse_scene_response, RiskField, SceneField};
    use crate::annotation::unify;

    fn unified(id: &str) -> UnifiedAnnotation {
        let s = parse_scene_response(&mock_scene_text(2, id)).unwrap();
        let r = parse_risk_response(&mock_risk_text(2, id)).unwrap();
        unify(id, &s, id, &r).unwrap()
    }

    fn frames(dir: &Path, n: usize) -> Vec<PathBuf> {
        (0..n)
            .map(|k| {
                let p = dir.join(format!("frame_{k:04}.png"));
                std::fs::write(&p, b"png").unwrap();
                p
            })
            .collect()
    }

    #[test]
    fn record_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let paths = frames(dir.path(), 7);
        let u = unified("a");
        let rec = emit_sft_record("a", &paths, &u, TargetKind::Unified).unwrap();
        assert_eq!(rec.assistant_text(), u.unified_text);
        let v = serde_json::to_value(&rec).unwrap();
        validate_sft_record(&v).unwrap();
        let user = &rec.messages[1].content;
        for f in SceneField::DIMENSIONS {
            assert!(user.contains(f.heading()));
        }
        for f in RiskField::DIMENSIONS {
            assert!(user.contains(f.heading()));
        }
        let t = emit_sft_record("a", &paths, &u, TargetKind::Template).unwrap();
        assert_eq!(t.assistant_text(), u.template_text);
        validate_sft_record(&serde_json::to_value(&t).unwrap()).unwrap();
    }

    #[test]
    fn missing_frame_names_clip() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = frames(dir.path(), 2);
        paths.push(dir.path().join("frame_0002.png"));
        let err = emit_sft_record("zz", &paths, &unified("zz"), TargetKind::Unified).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn validator_rejects_bad_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let rec = emit_sft_record("a", &frames(dir.path(), 3), &unified("a"), TargetKind::Unified).unwrap();
        let good = serde_json::to_value(&rec).unwrap();
        let mut v = good.clone();
        v["images"].as_array_mut().unwrap().pop();
        assert!(validate_sft_record(&v).is_err());
        let mut v = good.clone();
        v["messages"][2]["role"] = "user".into();
        assert!(validate_sft_record(&v).is_err());
        let mut v = good;
        v["extra"] = 1.into();
        assert!(validate_sft_record(&v).is_err());
    }

    #[test]
    fn dataset_bytes_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let paths = frames(dir.path(), 3);
        let recs: Vec<_> = ["a", "b"]
            .iter()
            .map(|id| emit_sft_record(id, &paths, &unified(id), TargetKind::Unified).unwrap())
            .collect();
        let prov = Provenance::new("v", 1, "d");
        let p1 = dir.path().join("one.jsonl");
        let p2 = dir.path().join("two.jsonl");
        write_sft_dataset(&p1, &recs, &prov).unwrap();
        write_sft_dataset(&p2, &recs, &prov).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        assert_eq!(b1, std::fs::read(&p2).unwrap());
        assert_eq!(b1.iter().filter(|&&b| b == b'\n').count(), 2);
        assert!(dir.path().join("one.jsonl.provenance.json").is_file());
    }
}
