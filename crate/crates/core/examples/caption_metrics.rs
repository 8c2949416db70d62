//! Scores a few candidate/reference pairs and prints per-clip and corpus metrics.

use roadscene::metrics::{evaluate_corpus, TextPair};

fn main() {
    let pairs = [
        TextPair {
            clip_id: "c1",
            candidate: "Light rain, wet pavement, moderate congestion near the bridge.",
            reference: "Light rain with wet pavement and moderate congestion near the bridge.",
        },
        TextPair {
            clip_id: "c2",
            candidate: "Night, clear weather, traffic flows at high speed.",
            reference: "Nighttime, clear weather, traffic moves at high speed.",
        },
        TextPair {
            clip_id: "c3",
            candidate: "Risk is high; reduce speed to 25 mph.",
            reference: "Overall risk is high. Suggested safe speed is 25 mph.",
        },
    ];
    let scores = evaluate_corpus(&pairs).expect("non-empty corpus");
    println!("{:<4} {:>7} {:>7} {:>7} {:>7}", "clip", "BLEU-4", "METEOR", "ROUGE-L", "CIDEr");
    for c in &scores.per_clip {
        println!("{:<4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}", c.clip_id, c.bleu4, c.meteor, c.rouge_l, c.cider);
    }
    let b = scores.bundle;
    println!("mean {:>7.4} {:>7.4} {:>7.4} {:>7.4}  score {:.2}", b.bleu4, b.meteor, b.rouge_l, b.cider, b.score);
}
