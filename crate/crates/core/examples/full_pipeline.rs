//! End to end: synthesize essay texts, train the n-gram model, score the
//! manifest and write every report into a temporary directory.
//!
//! `cargo run -p infodens --example full_pipeline`

use infodens::ngram::NgramConfig;
use infodens::pipeline::{
    run, AnalysisConfig, RunConfig, ScoreConfig, ScoreSource, SynthConfig, TrainConfig,
};
use infodens::synth::TextSynthConfig;
use infodens::Factor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    let corpus = root.join("corpus");
    let model = root.join("model.json");
    let scores = root.join("scores.jsonl");
    let reports = root.join("reports");

    let steps = [
        RunConfig::Synth(SynthConfig::Texts(TextSynthConfig::default()), corpus.clone()),
        RunConfig::Train(TrainConfig {
            corpus: vec![corpus.join("corpus.txt")],
            ngram: NgramConfig::new(3, 0.01),
            out: model.clone(),
        }),
        RunConfig::Score(ScoreConfig {
            manifest: corpus.join("manifest.tsv"),
            model: Some(model.clone()),
            external: None,
            workers: 0,
            out: scores.clone(),
        }),
        RunConfig::Analyze(
            {
                let mut c = AnalysisConfig::new(ScoreSource::External { scores: scores.clone() });
                c.group_by = Factor::Proficiency;
                c.window = 5;
                c
            },
            reports.clone(),
        ),
    ];
    for step in &steps {
        let written = run(step)?;
        let text_dir = corpus.join("texts");
        let (texts, rest): (Vec<_>, Vec<_>) = written.iter().partition(|p| p.parent() == Some(&text_dir));
        for path in rest {
            println!("wrote {}", path.strip_prefix(root).unwrap_or(path).display());
        }
        if !texts.is_empty() {
            let texts = texts.len();
            println!("wrote {texts} text files");
        }
    }

    let anova = std::fs::read_to_string(reports.join("anova.csv"))?;
    println!("\n{anova}");
    let lmm = std::fs::read_to_string(reports.join("lmm.csv"))?;
    println!("{lmm}");
    Ok(())
}
