//! Caption metrics: BLEU-4, METEOR, ROUGE-L, CIDEr and the composite score.
//!
//! All metrics work on [`metric_tokenize`] output: lowercase, punctuation
//! split into single-character tokens, whitespace collapsed.

mod cider;
mod meteor;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cider::{cider, CiderScores};
pub use meteor::{meteor, meteor_alignment, MeteorAlignment, METEOR_NODE_BUDGET};

/// Identifies the tokenization and metric variants; folded into report digests.
pub const METRIC_CONFIG: &str = "tokenize=lower+punct-split; bleu=4,uniform,no-smoothing; \
meteor=exact,alpha=0.9,beta=3,gamma=0.5; rouge=lcs,f1; cider=plain,n=1..4,idf=ln(N/max(1,df)),ref-corpus,x1; \
score=(b+m+r+0.1c)/4*100";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricTokenization {
    pub tokens: Vec<String>,
    pub source_text: String,
}

pub fn metric_tokenize(text: &str) -> MetricTokenization {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    MetricTokenization { tokens, source_text: text.to_string() }
}

pub(crate) fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU with uniform weights over 1..4-grams and no smoothing.
pub fn bleu4<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    let c = candidate.len();
    let r = reference.len();
    if c == 0 || r == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        if c < n {
            return 0.0;
        }
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let clipped: usize = cand.iter().map(|(g, &k)| k.min(refc.get(g).copied().unwrap_or(0))).sum();
        if clipped == 0 {
            return 0.0;
        }
        log_sum += 0.25 * (clipped as f64 / (c - n + 1) as f64).ln();
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * log_sum.exp()
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS F1: with equal weights this is 2·LCS / (|c| + |r|).
pub fn rouge_l<T: AsRef<str> + PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs_len(candidate, reference);
    if l == 0 {
        return 0.0;
    }
    2.0 * l as f64 / (candidate.len() + reference.len()) as f64
}

pub fn composite_score(bleu4: f64, meteor: f64, rouge_l: f64, cider: f64) -> f64 {
    (bleu4 + meteor + rouge_l + 0.1 * cider) / 4.0 * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricBundle {
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub score: f64,
}

impl MetricBundle {
    pub fn new(bleu4: f64, meteor: f64, rouge_l: f64, cider: f64) -> Self {
        Self { bleu4, meteor, rouge_l, cider, score: composite_score(bleu4, meteor, rouge_l, cider) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TextPair<'a> {
    pub clip_id: &'a str,
    pub candidate: &'a str,
    pub reference: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipScores {
    pub clip_id: String,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantinedClip {
    pub clip_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub bundle: MetricBundle,
    pub per_clip: Vec<ClipScores>,
    pub quarantined: Vec<QuarantinedClip>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no scorable pairs ({quarantined} quarantined)")]
    EmptyCorpus { quarantined: usize },
}

/// Scores every pair and averages. Pairs whose reference has no tokens are
/// quarantined; CIDEr document frequencies come from the remaining references.
pub fn evaluate_corpus(pairs: &[TextPair<'_>]) -> Result<CorpusScores, MetricsError> {
    let mut quarantined = Vec::new();
    let mut kept = Vec::new();
    for p in pairs {
        let reference = metric_tokenize(p.reference).tokens;
        if reference.is_empty() {
            quarantined.push(QuarantinedClip { clip_id: p.clip_id.into(), reason: "reference has no tokens".into() });
            continue;
        }
        kept.push((p.clip_id, metric_tokenize(p.candidate).tokens, reference));
    }
    if kept.is_empty() {
        return Err(MetricsError::EmptyCorpus { quarantined: quarantined.len() });
    }

    let corpus: Vec<(&[String], &[String])> = kept.iter().map(|(_, c, r)| (c.as_slice(), r.as_slice())).collect();
    let cider_scores = cider(&corpus);
    let per_clip: Vec<ClipScores> = kept
        .par_iter()
        .zip(cider_scores.per_clip.par_iter())
        .map(|((id, c, r), &ci)| ClipScores {
            clip_id: id.to_string(),
            bleu4: bleu4(c, r),
            meteor: meteor(c, r),
            rouge_l: rouge_l(c, r),
            cider: ci,
        })
        .collect();

    let n = per_clip.len() as f64;
    let mean = |f: fn(&ClipScores) -> f64| per_clip.iter().map(f).sum::<f64>() / n;
    let bundle = MetricBundle::new(mean(|s| s.bleu4), mean(|s| s.meteor), mean(|s| s.rouge_l), cider_scores.mean);
    Ok(CorpusScores { bundle, per_clip, quarantined })
}
