//! Independent reference implementations shared by the integration tests and
//! the acceptance runner. Everything here is written for clarity, not speed.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadscene::student::{loss_gradient, sequence_ce_loss, FrameFeature, ToyModel};

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn count(seq: &[String], gram: &[String]) -> usize {
    if seq.len() < gram.len() {
        return 0;
    }
    (0..=seq.len() - gram.len()).filter(|&i| seq[i..i + gram.len()] == *gram).count()
}

/// BLEU-4 by enumerating every candidate n-gram position and counting by scan.
pub fn bleu4(c: &[String], r: &[String]) -> f64 {
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut product = 1.0f64;
    for n in 1..=4 {
        if c.len() < n {
            return 0.0;
        }
        let mut clipped = 0;
        for i in 0..=c.len() - n {
            let gram = &c[i..i + n];
            let first = (0..i).all(|k| c[k..k + n] != *gram);
            if first {
                clipped += count(c, gram).min(count(r, gram));
            }
        }
        if clipped == 0 {
            return 0.0;
        }
        product *= clipped as f64 / (c.len() - n + 1) as f64;
    }
    let bp = if c.len() > r.len() { 1.0 } else { (1.0 - r.len() as f64 / c.len() as f64).exp() };
    bp * product.powf(0.25)
}

/// Longest common subsequence from the full (|a|+1)x(|b|+1) table.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t[a.len()][b.len()]
}

pub fn rouge_l(c: &[String], r: &[String]) -> f64 {
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    2.0 * lcs(c, r) as f64 / (c.len() + r.len()) as f64
}

/// Tries every one-to-one matching of equal tokens that reaches the maximum
/// match count and returns (matches, fewest chunks).
pub fn meteor_alignment(c: &[String], r: &[String]) -> (usize, usize) {
    fn chunks(pairs: &[(usize, usize)]) -> usize {
        let mut p = pairs.to_vec();
        p.sort_unstable();
        (0..p.len()).filter(|&k| k == 0 || p[k].0 != p[k - 1].0 + 1 || p[k].1 != p[k - 1].1 + 1).count()
    }
    fn go(i: usize, c: &[String], r: &[String], used: &mut [bool], pairs: &mut Vec<(usize, usize)>, best: &mut (usize, usize)) {
        if pairs.len() + (c.len() - i) < best.0 {
            return;
        }
        if i == c.len() {
            let key = (pairs.len(), chunks(pairs));
            if key.0 > best.0 || (key.0 == best.0 && key.1 < best.1) {
                *best = key;
            }
            return;
        }
        go(i + 1, c, r, used, pairs, best);
        for j in 0..r.len() {
            if !used[j] && c[i] == r[j] {
                used[j] = true;
                pairs.push((i, j));
                go(i + 1, c, r, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let mut distinct: Vec<&String> = c.iter().collect();
    distinct.sort();
    distinct.dedup();
    let most = distinct.iter().map(|w| c.iter().filter(|x| x == w).count().min(r.iter().filter(|x| x == w).count())).sum();
    let mut best = (most, usize::MAX);
    go(0, c, r, &mut vec![false; r.len()], &mut Vec::new(), &mut best);
    if most == 0 {
        return (0, 0);
    }
    best
}

pub fn meteor(c: &[String], r: &[String]) -> f64 {
    let (m, ch) = meteor_alignment(c, r);
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    let p = m / c.len() as f64;
    let rec = m / r.len() as f64;
    let f = p * rec / (0.9 * p + 0.1 * rec);
    f * (1.0 - 0.5 * (ch as f64 / m).powi(3))
}

/// Random pair over a small alphabet so overlaps and repeats are common.
pub fn random_pair(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<String>, Vec<String>) {
    const ALPHABET: [&str; 6] = ["car", "wet", "road", "slow", "lane", "."];
    let draw = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=max_len);
        (0..n).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())].to_string()).collect::<Vec<_>>()
    };
    let c = draw(rng);
    let r = draw(rng);
    (c, r)
}

/// Three clips whose CIDEr values were worked out by hand (see `cider_fixture_expected`).
pub const CIDER_FIXTURE: [(&str, &str); 3] = [("a b c d", "a b c d"), ("a b x y", "a b e f"), ("g h j i", "g h i j")];

/// Hand-derived per-clip values for [`CIDER_FIXTURE`] with N = 3.
///
/// Clip 1 equals its reference: cosine 1 at every order.
/// Clip 2 shares `a`, `b` (df 2, idf ln 1.5) and the bigram `a b` (df 2);
/// every other n-gram has idf ln 3; no shared trigrams or 4-grams.
/// Clip 3 is a reordering: unigram cosine 1, bigram `g h` only (1/3), nothing longer.
pub fn cider_fixture_expected() -> [f64; 3] {
    let a = 1.5f64.ln().powi(2);
    let b = 3f64.ln().powi(2);
    let clip2 = (a / (a + b) + a / (a + 2.0 * b)) / 4.0;
    let clip3 = (1.0 + 1.0 / 3.0) / 4.0;
    [1.0, clip2, clip3]
}

pub fn random_model(rng: &mut ChaCha8Rng) -> (ToyModel, FrameFeature, Vec<u32>) {
    let v = rng.random_range(2..=16usize);
    let f = rng.random_range(1..=4usize);
    let l = rng.random_range(1..=8usize);
    let model = ToyModel::random(v, f, rng.random_range(0..v as u32), None, 1.0, rng.random());
    let values = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
    let feature = FrameFeature::from_values("fd", values);
    let tokens = (0..l).map(|_| rng.random_range(0..v as u32)).collect();
    (model, feature, tokens)
}

/// Largest relative disagreement between the analytic gradient and central
/// differences with step `h`. Components where both sides are below 1e-7 in
/// magnitude are compared against that floor instead.
pub fn gradient_check(model: &ToyModel, feature: &FrameFeature, tokens: &[u32], h: f64) -> f64 {
    let g = loss_gradient(model, feature, tokens).unwrap();
    let analytic: Vec<f64> = g.token_table.iter().chain(&g.frame_projection).copied().collect();
    let n_tok = model.token_table.len();
    let mut worst = 0.0f64;
    for (k, &a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        let mut minus = model.clone();
        if k < n_tok {
            plus.token_table[k] += h;
            minus.token_table[k] -= h;
        } else {
            plus.frame_projection[k - n_tok] += h;
            minus.frame_projection[k - n_tok] -= h;
        }
        let numeric = (sequence_ce_loss(&plus, feature, tokens).unwrap() - sequence_ce_loss(&minus, feature, tokens).unwrap()) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max(rel);
    }
    worst
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
