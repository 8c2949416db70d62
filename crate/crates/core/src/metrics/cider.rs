use std::collections::HashMap;

use super::ngram_counts;

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScores {
    pub per_clip: Vec<f64>,
    pub mean: f64,
}

type Vector<'a> = HashMap<Vec<&'a str>, f64>;

fn cosine(a: &Vector<'_>, b: &Vector<'_>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn weigh<'a>(counts: HashMap<Vec<&'a str>, usize>, df: &HashMap<&[&str], usize>, log_n: f64) -> Vector<'a> {
    counts
        .into_iter()
        .map(|(g, tf)| {
            let d = df.get(g.as_slice()).copied().unwrap_or(0).max(1);
            (g, tf as f64 * (log_n - (d as f64).ln()))
        })
        .collect()
}

/// Plain single-reference CIDEr: per pair, the mean over n = 1..4 of the
/// cosine between tf-idf n-gram vectors. Document frequencies are counted over
/// the references; n-grams absent from every reference get idf ln(N).
pub fn cider<T: AsRef<str>>(corpus: &[(&[T], &[T])]) -> CiderScores {
    let n_docs = corpus.len();
    if n_docs == 0 {
        return CiderScores { per_clip: Vec::new(), mean: 0.0 };
    }
    let log_n = (n_docs as f64).ln();
    let mut per_clip = vec![0.0; n_docs];
    for n in 1..=4 {
        let refs: Vec<_> = corpus.iter().map(|(_, r)| ngram_counts(r, n)).collect();
        let mut df: HashMap<&[&str], usize> = HashMap::new();
        for counts in &refs {
            for g in counts.keys() {
                *df.entry(g.as_slice()).or_insert(0) += 1;
            }
        }
        for (k, (cand, _)) in corpus.iter().enumerate() {
            let cv = weigh(ngram_counts(cand, n), &df, log_n);
            let rv = weigh(refs[k].clone(), &df, log_n);
            per_clip[k] += cosine(&cv, &rv) / 4.0;
        }
    }
    let mean = per_clip.iter().sum::<f64>() / n_docs as f64;
    CiderScores { per_clip, mean }
}
