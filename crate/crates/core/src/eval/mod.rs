//! Scoring candidate outputs against references and rendering benchmark tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{evaluate_corpus, ClipScores, MetricBundle, MetricsError, QuarantinedClip, TextPair, METRIC_CONFIG};
use crate::provenance::{short_digest, write_sidecar, Provenance};

/// Allowed gap between a recomputed and a printed two-decimal score.
pub const SCORE_TOLERANCE: f64 = 0.005;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {reason}")]
    Record { path: PathBuf, line: usize, reason: String },
    #[error("{path} line {line}: duplicate clip_id {clip_id:?} (first on line {first})")]
    Duplicate { path: PathBuf, line: usize, first: usize, clip_id: String },
    #[error("clip sets differ: missing candidates for {missing_candidates:?}; missing references for {missing_references:?}")]
    ClipSetMismatch { missing_candidates: Vec<String>, missing_references: Vec<String> },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    pub clip_id: String,
    pub text: String,
}

/// Reads `{clip_id, text}` lines. Text is kept byte for byte.
pub fn load_outputs(path: &Path) -> Result<BTreeMap<String, String>, EvalError> {
    let body = std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.into(), source })?;
    let mut out = BTreeMap::new();
    let mut first_line: BTreeMap<String, usize> = BTreeMap::new();
    for (i, line) in body.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: OutputRecord = serde_json::from_str(line)
            .map_err(|e| EvalError::Record { path: path.into(), line: line_no, reason: e.to_string() })?;
        if rec.clip_id.is_empty() {
            return Err(EvalError::Record { path: path.into(), line: line_no, reason: "empty clip_id".into() });
        }
        if let Some(&first) = first_line.get(&rec.clip_id) {
            return Err(EvalError::Duplicate { path: path.into(), line: line_no, first, clip_id: rec.clip_id });
        }
        first_line.insert(rec.clip_id.clone(), line_no);
        out.insert(rec.clip_id, rec.text);
    }
    Ok(out)
}

/// Writes one record per clip in clip-id order, plus a provenance sidecar when given.
pub fn write_outputs(path: &Path, outputs: &BTreeMap<String, String>, provenance: Option<&Provenance>) -> Result<(), EvalError> {
    let io = |source| EvalError::Io { path: path.into(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for (clip_id, text) in outputs {
        let rec = OutputRecord { clip_id: clip_id.clone(), text: text.clone() };
        serde_json::to_writer(&mut w, &rec).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)?;
    if let Some(p) = provenance {
        write_sidecar(path, p).map_err(io)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_tag: String,
    pub candidate_source: PathBuf,
    pub reference_source: PathBuf,
    pub clip_ids: Vec<String>,
    pub metric_config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub run_tag: String,
    pub bundle: MetricBundle,
    pub per_clip: Vec<ClipScores>,
    pub quarantined: Vec<QuarantinedClip>,
    pub total: usize,
    pub metric_config: String,
    pub metric_config_digest: String,
}

pub fn metric_config_digest() -> String {
    short_digest(METRIC_CONFIG.as_bytes())
}

/// Scores a run. Both maps must cover the same clip ids.
pub fn score_run(
    run_tag: &str,
    candidates: &BTreeMap<String, String>,
    references: &BTreeMap<String, String>,
) -> Result<RunScores, EvalError> {
    let c: BTreeSet<&String> = candidates.keys().collect();
    let r: BTreeSet<&String> = references.keys().collect();
    if c != r {
        return Err(EvalError::ClipSetMismatch {
            missing_candidates: r.difference(&c).map(|s| s.to_string()).collect(),
            missing_references: c.difference(&r).map(|s| s.to_string()).collect(),
        });
    }
    let pairs: Vec<TextPair> = references
        .iter()
        .map(|(id, reference)| TextPair { clip_id: id, candidate: &candidates[id], reference })
        .collect();
    let scores = evaluate_corpus(&pairs)?;
    Ok(RunScores {
        run_tag: run_tag.into(),
        bundle: scores.bundle,
        per_clip: scores.per_clip,
        quarantined: scores.quarantined,
        total: pairs.len(),
        metric_config: METRIC_CONFIG.into(),
        metric_config_digest: metric_config_digest(),
    })
}

/// One row of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model_tag: String,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub score: f64,
}

impl ReportRow {
    pub fn from_bundle(model_tag: &str, b: &MetricBundle) -> Self {
        Self { model_tag: model_tag.into(), bleu4: b.bleu4, meteor: b.meteor, rouge_l: b.rouge_l, cider: b.cider, score: b.score }
    }
}

/// Reference benchmark: five fine-tuning variants of a 3B student scored on
/// 200 clips; metric columns and the printed two-decimal score.
pub const PUBLISHED_ROWS: [(&str, [f64; 4], f64); 5] = [
    ("3B original", [0.2517, 0.5396, 0.3902, 0.2984], 30.28),
    ("3B mlp", [0.2581, 0.5287, 0.4040, 0.3363], 30.61),
    ("3B mlp+vision", [0.2722, 0.5281, 0.4346, 0.2413], 31.48),
    ("3B mlp+llm", [0.3269, 0.5691, 0.4862, 0.6712], 36.23),
    ("3B llm+mlp+vision", [0.3289, 0.5634, 0.4895, 0.7014], 36.30),
];

pub fn published_rows() -> Vec<ReportRow> {
    PUBLISHED_ROWS
        .iter()
        .map(|&(tag, [b, m, r, c], score)| ReportRow {
            model_tag: tag.into(),
            bleu4: b,
            meteor: m,
            rouge_l: r,
            cider: c,
            score,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowCheck {
    pub model_tag: String,
    pub published: f64,
    pub recomputed: f64,
    pub pass: bool,
}

/// Recomputes each row's score from its metric columns and compares with the stated score.
pub fn verify_rows(rows: &[ReportRow]) -> Vec<RowCheck> {
    rows.iter()
        .map(|row| {
            let recomputed = MetricBundle::new(row.bleu4, row.meteor, row.rouge_l, row.cider).score;
            RowCheck {
                model_tag: row.model_tag.clone(),
                published: row.score,
                recomputed,
                pass: (recomputed - row.score).abs() <= SCORE_TOLERANCE,
            }
        })
        .collect()
}

pub fn verify_published_rows() -> Vec<RowCheck> {
    verify_rows(&published_rows())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub human: String,
    pub machine: String,
}

/// Fixed-width table (Model, BLEU-4, METEOR, ROUGE-L, CIDEr, Score) and JSON lines with the same rows.
pub fn render_report(rows: &[ReportRow]) -> Report {
    let width = rows.iter().map(|r| r.model_tag.len()).chain(["Model".len()]).max().unwrap_or(5);
    let mut human = format!(
        "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>6}\n",
        "Model", "BLEU-4", "METEOR", "ROUGE-L", "CIDEr", "Score"
    );
    human.push_str(&format!("{}\n", "-".repeat(width + 2 + 4 * 9 + 6)));
    let mut machine = String::new();
    for r in rows {
        human.push_str(&format!(
            "{:<width$}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}  {:>6.2}\n",
            r.model_tag, r.bleu4, r.meteor, r.rouge_l, r.cider, r.score
        ));
        machine.push_str(&serde_json::to_string(r).expect("row serializes"));
        machine.push('\n');
    }
    Report { human, machine }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(items: &[(&str, &str)]) -> BTreeMap<String, String> {
        items.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn published_scores_recompute() {
        let checks = verify_published_rows();
        assert_eq!(checks.len(), 5);
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
        let expected = [30.28, 30.61, 31.48, 36.23, 36.30];
        for (c, e) in checks.iter().zip(expected) {
            assert_eq!(c.published, e);
        }
    }

    #[test]
    fn perturbed_row_fails() {
        let mut rows = published_rows();
        rows[2].bleu4 += 0.01;
        let checks = verify_rows(&rows);
        assert!(!checks[2].pass);
        assert!(checks.iter().enumerate().all(|(i, c)| i == 2 || c.pass));
    }

    #[test]
    fn report_layout() {
        let r = render_report(&published_rows());
        let lines: Vec<&str> = r.human.lines().collect();
        assert!(lines[0].starts_with("Model"));
        assert!(lines[0].contains("BLEU-4") && lines[0].ends_with("Score"));
        assert!(lines[2].contains("0.2517") && lines[2].contains("0.5396") && lines[2].ends_with("30.28"));
        assert!(lines[6].contains("0.7014") && lines[6].ends_with("36.30"));
        assert_eq!(r.machine.lines().count(), 5);
        let zero = render_report(&[ReportRow::from_bundle("zero", &MetricBundle::new(0.0, 0.0, 0.0, 0.0))]);
        assert!(zero.human.lines().nth(2).unwrap().ends_with("0.00"));
        assert_eq!(render_report(&published_rows()), r);
    }

    #[test]
    fn outputs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = map(&[("b", "two\nlines"), ("a", "one \"quoted\"")]);
        let p = dir.path().join("o.jsonl");
        write_outputs(&p, &m, None).unwrap();
        assert_eq!(load_outputs(&p).unwrap(), m);
    }

    #[test]
    fn duplicate_ids_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        std::fs::write(&p, "{\"clip_id\":\"x\",\"text\":\"a\"}\n{\"clip_id\":\"y\",\"text\":\"b\"}\n{\"clip_id\":\"x\",\"text\":\"c\"}\n").unwrap();
        let err = load_outputs(&p).unwrap_err();
        assert!(matches!(&err, EvalError::Duplicate { line: 3, first: 1, clip_id, .. } if clip_id == "x"), "{err}");
        std::fs::write(&p, "{\"clip_id\":\"x\"}\n").unwrap();
        assert!(matches!(load_outputs(&p).unwrap_err(), EvalError::Record { line: 1, .. }));
    }

    #[test]
    fn mismatch_lists_both_sides() {
        let c = map(&[("a", "x y z w"), ("b", "x y z w")]);
        let r = map(&[("a", "x y z w"), ("c", "x y z w")]);
        match score_run("t", &c, &r).unwrap_err() {
            EvalError::ClipSetMismatch { missing_candidates, missing_references } => {
                assert_eq!(missing_candidates, ["c"]);
                assert_eq!(missing_references, ["b"]);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn identity_run() {
        let m = map(&[("a", "wet road with light traffic"), ("b", "dry road at night with heavy traffic")]);
        let s = score_run("id", &m, &m).unwrap();
        assert_eq!(s.bundle.bleu4, 1.0);
        assert_eq!(s.bundle.rouge_l, 1.0);
        assert_eq!(s.total, s.per_clip.len() + s.quarantined.len());
    }
}
