use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IngestError, MAX_DURATION_S, MIN_DURATION_S};

/// One manifest row: a short traffic clip and where to find it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoClip {
    pub clip_id: String,
    pub source_path: PathBuf,
    pub duration_s: f64,
    pub region_tag: String,
    #[serde(default)]
    pub captured_at: Option<String>,
}

/// A manifest row that could not be accepted. `row` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestIssue {
    pub row: usize,
    pub clip_id: Option<String>,
    pub reason: String,
}

impl fmt::Display for ManifestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.clip_id {
            Some(id) => write!(f, "row {} ({}): {}", self.row, id, self.reason),
            None => write!(f, "row {}: {}", self.row, self.reason),
        }
    }
}

/// Parses manifest text, returning accepted clips in order and every rejected row.
///
/// Relative `source_path`s are joined onto `base` when one is given.
pub fn parse_manifest(text: &str, base: Option<&Path>) -> (Vec<VideoClip>, Vec<ManifestIssue>) {
    let mut clips = Vec::new();
    let mut issues = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut clip: VideoClip = match serde_json::from_str(line) {
            Ok(clip) => clip,
            Err(err) => {
                issues.push(ManifestIssue { row, clip_id: None, reason: format!("malformed record: {err}") });
                continue;
            }
        };
        let id = Some(clip.clip_id.clone());
        if clip.clip_id.trim().is_empty() {
            issues.push(ManifestIssue { row, clip_id: None, reason: "empty clip_id".into() });
            continue;
        }
        if !clip.duration_s.is_finite() || !(MIN_DURATION_S..=MAX_DURATION_S).contains(&clip.duration_s) {
            issues.push(ManifestIssue {
                row,
                clip_id: id,
                reason: format!(
                    "duration {}s outside accepted band [{MIN_DURATION_S}, {MAX_DURATION_S}] s",
                    clip.duration_s
                ),
            });
            continue;
        }
        if let Some(first) = seen.get(&clip.clip_id) {
            issues.push(ManifestIssue {
                row,
                clip_id: id,
                reason: format!("duplicate clip_id (first seen on row {first})"),
            });
            continue;
        }
        seen.insert(clip.clip_id.clone(), row);
        if let Some(base) = base {
            if clip.source_path.is_relative() {
                clip.source_path = base.join(&clip.source_path);
            }
        }
        clips.push(clip);
    }
    (clips, issues)
}

/// Reads a manifest, failing if any row is rejected.
pub fn scan_manifest(path: &Path) -> Result<Vec<VideoClip>, IngestError> {
    let (clips, issues) = scan_manifest_lenient(path)?;
    if issues.is_empty() {
        Ok(clips)
    } else {
        Err(IngestError::Manifest { path: path.to_path_buf(), issues })
    }
}

/// Reads a manifest, returning accepted clips alongside the rejected rows.
pub fn scan_manifest_lenient(path: &Path) -> Result<(Vec<VideoClip>, Vec<ManifestIssue>), IngestError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IngestError::ManifestIo { path: path.to_path_buf(), source })?;
    Ok(parse_manifest(&text, path.parent()))
}

pub fn write_manifest(path: &Path, clips: &[VideoClip]) -> std::io::Result<()> {
    let mut out = String::new();
    for clip in clips {
        out.push_str(&serde_json::to_string(clip).expect("clip serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, dur: f64) -> String {
        format!(r#"{{"clip_id":"{id}","source_path":"videos/{id}.mp4","duration_s":{dur},"region_tag":"VA","captured_at":null}}"#)
    }

    #[test]
    fn three_valid_rows_in_order() {
        let text = [row("a", 3.0), row("b", 5.5), row("c", 7.0)].join("\n");
        let (clips, issues) = parse_manifest(&text, None);
        assert!(issues.is_empty());
        let ids: Vec<_> = clips.iter().map(|c| c.clip_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(clips[1].duration_s, 5.5);
    }

    #[test]
    fn short_clip_is_reported_with_row() {
        let text = [row("a", 3.0), row("tiny", 0.5)].join("\n");
        let (clips, issues) = parse_manifest(&text, None);
        assert_eq!(clips.len(), 1);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].row, 2);
        let msg = issues[0].to_string();
        assert!(msg.contains("row 2") && msg.contains("tiny") && msg.contains("duration"), "{msg}");
    }

    #[test]
    fn duplicates_and_malformed_rows() {
        let text = [row("a", 3.0), "{not json".to_string(), row("a", 4.0)].join("\n");
        let (clips, issues) = parse_manifest(&text, None);
        assert_eq!(clips.len(), 1);
        assert_eq!(issues.len(), 2);
        assert!(issues[0].reason.starts_with("malformed"));
        assert_eq!(issues[1].row, 3);
        assert!(issues[1].reason.contains("duplicate"));
    }

    #[test]
    fn unknown_field_is_malformed() {
        let text = r#"{"clip_id":"a","source_path":"x","duration_s":3,"region_tag":"r","camera":"c"}"#;
        let (_, issues) = parse_manifest(text, None);
        assert_eq!(issues.len(), 1);
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let (clips, _) = parse_manifest(&row("a", 3.0), Some(Path::new("/data")));
        assert_eq!(clips[0].source_path, PathBuf::from("/data/videos/a.mp4"));
    }

    #[test]
    fn missing_file_is_an_error() {
        let err = scan_manifest(Path::new("/nonexistent/manifest.jsonl")).unwrap_err();
        assert!(matches!(err, IngestError::ManifestIo { .. }));
    }

    #[test]
    fn two_hundred_rows() {
        let text: Vec<String> = (0..200).map(|i| row(&format!("clip_{i:04}"), 3.0 + (i % 5) as f64)).collect();
        let (clips, issues) = parse_manifest(&text.join("\n"), None);
        assert!(issues.is_empty());
        assert_eq!(clips.len(), 200);
    }
}
