//! Memorizes one caption with the toy student and decodes it back.

use roadscene::annotation::{tokenize, Tokenizer, WordVocab};
use roadscene::student::{greedy_decode, train_sft, FrameFeature, ToyModel, TrainConfig, FEATURE_DIM};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let caption = "wet road, heavy congestion and high risk ahead";
    let vocab = WordVocab::build([caption], 64);
    let mut ids = tokenize(caption, &vocab).ids;
    ids.push(vocab.eos_id());

    let feature = FrameFeature::from_values("clip", vec![0.5; FEATURE_DIM]);
    let model = ToyModel::random(vocab.vocab_size(), FEATURE_DIM, vocab.bos_id(), Some(vocab.eos_id()), 0.01, 0);
    let cfg = TrainConfig { epochs: 60, learning_rate: 20.0, batch_size: 1 };
    let (model, report) = train_sft(model, &[(feature.clone(), ids)], &cfg)?;
    for (e, loss) in report.trajectory().iter().enumerate().step_by(10) {
        println!("epoch {e:>3}: {loss:.5}");
    }

    let mut out = greedy_decode(&model, &feature, 32)?;
    out.retain(|&t| t != vocab.eos_id());
    println!("decoded: {}", vocab.decode(&out));
    Ok(())
}
