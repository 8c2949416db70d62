use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const BOS_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
const BYTE_BASE: u32 = 2;
const FIRST_WORD_ID: u32 = BYTE_BASE + 256;

/// Longest sequence kept; longer inputs lose their tail.
pub const MAX_SEQ_LEN: usize = 8192;

pub trait Tokenizer {
    fn vocab_size(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<u32>;
    fn decode(&self, ids: &[u32]) -> String;
    fn bos_id(&self) -> u32 {
        BOS_ID
    }
    fn eos_id(&self) -> u32 {
        EOS_ID
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Length before truncation.
    pub full_len: usize,
    pub truncated: bool,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Encodes `text`, keeping at most [`MAX_SEQ_LEN`] leading ids.
pub fn tokenize(text: &str, tok: &dyn Tokenizer) -> TokenSequence {
    let mut ids = tok.encode(text);
    let full_len = ids.len();
    ids.truncate(MAX_SEQ_LEN);
    TokenSequence { ids, full_len, truncated: full_len > MAX_SEQ_LEN }
}

/// Whitespace-split word vocabulary with byte fallback.
///
/// Ids: 0 = BOS, 1 = EOS, 2..258 = raw bytes, then words. Known words are
/// single ids and a lone space between two known words is implicit. Every
/// other character, including all other whitespace, is spelled out as bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordVocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl WordVocab {
    pub fn from_words(words: Vec<String>) -> Self {
        let mut seen = HashMap::new();
        let mut kept = Vec::new();
        for w in words {
            if w.is_empty() || w.chars().any(char::is_whitespace) || seen.contains_key(&w) {
                continue;
            }
            seen.insert(w.clone(), FIRST_WORD_ID + kept.len() as u32);
            kept.push(w);
        }
        Self { words: kept, index: seen }
    }

    /// Builds a vocabulary from a corpus: most frequent words first, ties in
    /// byte order, at most `max_words` entries.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_words: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in texts {
            for w in t.split_whitespace() {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_words(ranked.into_iter().take(max_words).map(|(w, _)| w.to_string()).collect())
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(&mut self) {
        let words = std::mem::take(&mut self.words);
        *self = Self::from_words(words);
    }

    fn word_id(&self, w: &str) -> Option<u32> {
        self.index.get(w).copied()
    }

    fn is_word(id: u32) -> bool {
        id >= FIRST_WORD_ID
    }
}

impl Tokenizer for WordVocab {
    fn vocab_size(&self) -> usize {
        FIRST_WORD_ID as usize + self.words.len()
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        let bytes = |s: &str, ids: &mut Vec<u32>| ids.extend(s.bytes().map(|b| BYTE_BASE + u32::from(b)));
        // Alternating runs of whitespace and non-whitespace.
        let mut runs: Vec<(bool, &str)> = Vec::new();
        let mut start = 0;
        let mut prev_ws: Option<bool> = None;
        for (i, c) in text.char_indices() {
            let ws = c.is_whitespace();
            if prev_ws.is_some_and(|p| p != ws) {
                runs.push((prev_ws.unwrap(), &text[start..i]));
                start = i;
            }
            prev_ws = Some(ws);
        }
        if let Some(ws) = prev_ws {
            runs.push((ws, &text[start..]));
        }

        for (k, &(ws, run)) in runs.iter().enumerate() {
            if !ws {
                match self.word_id(run) {
                    Some(id) => ids.push(id),
                    None => bytes(run, &mut ids),
                }
                continue;
            }
            let known = |j: Option<usize>| j.and_then(|j| runs.get(j)).is_some_and(|&(ws, w)| !ws && self.word_id(w).is_some());
            let implicit = run == " " && known(k.checked_sub(1)) && known(Some(k + 1));
            if !implicit {
                bytes(run, &mut ids);
            }
        }
        ids
    }

    fn decode(&self, ids: &[u32]) -> String {
        let mut out: Vec<u8> = Vec::new();
        let mut prev_word = false;
        for &id in ids {
            if id < BYTE_BASE {
                prev_word = false;
                continue;
            }
            if Self::is_word(id) {
                let Some(w) = self.words.get((id - FIRST_WORD_ID) as usize) else {
                    prev_word = false;
                    continue;
                };
                if prev_word {
                    out.push(b' ');
                }
                out.extend_from_slice(w.as_bytes());
                prev_word = true;
            } else {
                out.push((id - BYTE_BASE) as u8);
                prev_word = false;
            }
        }
        String::from_utf8_lossy(&out).into_owned()
    }
}
