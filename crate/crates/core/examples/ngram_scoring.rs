//! Train the interpolated add-k model on a small corpus, score a sentence and
//! round-trip the model through its JSON file.
//!
//! `cargo run -p infodens --example ngram_scoring`

use infodens::ngram::{tokenize, NgramConfig, NgramModel};

const CORPUS: &str = "the cat sat on the mat
the dog sat on the rug
a cat saw the dog
the dog saw a cat on the mat";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sentences: Vec<Vec<String>> = CORPUS.lines().map(tokenize).collect();
    let model = NgramModel::train(&sentences, &NgramConfig::new(3, 0.1))?;
    println!(
        "order {}, k {}, weights {:?}, |V| = {}",
        model.order(),
        model.smoothing_k(),
        model.interpolation_weights(),
        model.vocab_size()
    );

    let sentence = tokenize("the cat sat on the rug");
    println!("{:>4} {:>8} {:>12} {:>12}", "i", "token", "surprisal", "entropy");
    for (t, s) in sentence.iter().zip(model.score_sequence(&sentence)) {
        println!("{:>4} {:>8} {:>12.4} {:>12.4}", s.position, t, s.surprisal_bits, s.entropy_bits);
    }

    let dist = model.next_distribution(&["the", "cat"]);
    let total: f64 = dist.iter().sum();
    println!("p(. | the cat) sums to {total}");

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    model.save(&path)?;
    let reloaded = NgramModel::load(&path)?;
    assert_eq!(reloaded.score_sequence(&sentence), model.score_sequence(&sentence));
    println!("reloaded model from {} scores identically", path.display());
    Ok(())
}
