use std::collections::HashMap;

/// Search nodes spent looking for the fewest-chunk alignment of one pair.
pub const METEOR_NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeteorAlignment {
    pub matches: usize,
    pub chunks: usize,
    /// False when the node budget ran out before the search finished.
    pub exact: bool,
}

struct Search<'a> {
    cand: &'a [usize],
    ref_positions: &'a [Vec<usize>],
    used: Vec<bool>,
    need: Vec<usize>,
    // Occurrences of each word in cand[i..].
    ahead: Vec<usize>,
    best: usize,
    nodes: usize,
    budget: usize,
}

impl Search<'_> {
    fn run(&mut self, i: usize, prev: Option<usize>, chunks: usize, need_total: usize) {
        self.nodes += 1;
        if chunks >= self.best || self.nodes > self.budget {
            return;
        }
        if need_total == 0 {
            self.best = chunks;
            return;
        }
        if i == self.cand.len() {
            return;
        }
        let lower = chunks + usize::from(prev.is_none());
        if lower >= self.best {
            return;
        }

        let w = self.cand[i];
        self.ahead[w] -= 1;
        if self.need[w] > 0 {
            let next = prev.map(|p| p + 1);
            // Extending the current chunk first makes the first descent a greedy tiling.
            if let Some(j) = next.filter(|&j| j < self.used.len() && !self.used[j] && self.ref_positions[w].contains(&j)) {
                self.take(i, j, chunks, need_total);
            }
            for k in 0..self.ref_positions[w].len() {
                let j = self.ref_positions[w][k];
                if Some(j) != next && !self.used[j] {
                    self.take(i, j, chunks + 1, need_total);
                }
            }
        }
        if self.ahead[w] >= self.need[w] {
            self.run(i + 1, None, chunks, need_total);
        }
        self.ahead[w] += 1;
    }

    fn take(&mut self, i: usize, j: usize, chunks: usize, need_total: usize) {
        let w = self.cand[i];
        self.used[j] = true;
        self.need[w] -= 1;
        self.run(i + 1, Some(j), chunks, need_total - 1);
        self.need[w] += 1;
        self.used[j] = false;
    }
}

/// Maximum exact-match alignment with the fewest chunks, searched by
/// branch and bound within [`METEOR_NODE_BUDGET`] nodes.
pub fn meteor_alignment<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> MeteorAlignment {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut cand = Vec::with_capacity(candidate.len());
    let mut refr = Vec::with_capacity(reference.len());
    for (seq, out) in [(candidate, &mut cand), (reference, &mut refr)] {
        for t in seq {
            let n = ids.len();
            out.push(*ids.entry(t.as_ref()).or_insert(n));
        }
    }
    let vocab = ids.len();

    let mut ref_positions = vec![Vec::new(); vocab];
    for (j, &w) in refr.iter().enumerate() {
        ref_positions[w].push(j);
    }
    let mut ahead = vec![0usize; vocab];
    for &w in &cand {
        ahead[w] += 1;
    }
    let need: Vec<usize> = (0..vocab).map(|w| ahead[w].min(ref_positions[w].len())).collect();
    let matches: usize = need.iter().sum();
    if matches == 0 {
        return MeteorAlignment { matches: 0, chunks: 0, exact: true };
    }

    let mut s = Search {
        cand: &cand,
        ref_positions: &ref_positions,
        used: vec![false; refr.len()],
        need,
        ahead,
        best: usize::MAX,
        nodes: 0,
        budget: METEOR_NODE_BUDGET,
    };
    s.run(0, None, 0, matches);
    MeteorAlignment { matches, chunks: s.best, exact: s.nodes <= s.budget }
}

/// METEOR with exact matching only: Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks/matches)^3.
pub fn meteor<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let a = meteor_alignment(candidate, reference);
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (a.chunks as f64 / m).powi(3);
    fmean * (1.0 - penalty)
}
