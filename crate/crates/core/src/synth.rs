//! Seeded synthetic corpora with known generating parameters.
//!
//! [`synth_scores`] draws token scores directly: every proficiency group has its
//! own surprisal and entropy mean, each essay adds a random intercept, each L1 a
//! small shift, and tokens add independent noise. [`synth_texts`] writes plain
//! essays from a pseudo-word vocabulary whose Zipf exponent depends on the
//! group, plus a separate training corpus for the n-gram backend.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::ManifestEntry;
use crate::types::{EssayRecord, GroupLabel, Proficiency, TokenScore};

/// Order of per-group parameter arrays.
pub const LEVELS: [Proficiency; 4] = [
    Proficiency::Low,
    Proficiency::Medium,
    Proficiency::High,
    Proficiency::Native,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSynthConfig {
    pub seed: u64,
    pub essays_per_group: usize,
    pub learner_l1s: Vec<String>,
    pub native_l1: String,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Per-group token surprisal means in [`LEVELS`] order, bits.
    pub surprisal_means: [f64; 4],
    /// Per-group token entropy means in [`LEVELS`] order, bits.
    pub entropy_means: [f64; 4],
    pub essay_sd: f64,
    pub token_sd: f64,
    pub l1_sd: f64,
    /// Change in mean surprisal per token position.
    pub position_slope: f64,
}

impl Default for ScoreSynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            essays_per_group: 15,
            learner_l1s: vec!["ARA".into(), "DEU".into(), "ZHO".into()],
            native_l1: "ENG_NATIVE".into(),
            min_tokens: 40,
            max_tokens: 120,
            surprisal_means: [4.0, 5.0, 6.0, 7.0],
            entropy_means: [7.0, 6.0, 5.5, 5.0],
            essay_sd: 0.3,
            token_sd: 1.0,
            l1_sd: 0.1,
            position_slope: -0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSynthTruth {
    pub config: ScoreSynthConfig,
    pub l1_shifts: BTreeMap<String, f64>,
    /// Generating mean difference from the native group, per learner level.
    pub surprisal_contrasts: BTreeMap<String, f64>,
    pub entropy_contrasts: BTreeMap<String, f64>,
}

fn check_common(essays_per_group: usize, learner_l1s: &[String], min: usize, max: usize) -> Result<()> {
    if essays_per_group == 0 {
        return Err(Error::Config("essays per group must be ≥ 1".into()));
    }
    if learner_l1s.is_empty() {
        return Err(Error::Config("at least one learner L1 is required".into()));
    }
    if min == 0 || min > max {
        return Err(Error::Config(format!("invalid essay length range {min}..={max}")));
    }
    Ok(())
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| Error::Config(format!("invalid standard deviation {sd}: {e}")))
}

fn essay_label(cfg_l1s: &[String], native_l1: &str, level: Proficiency, i: usize) -> GroupLabel {
    let l1 = if level == Proficiency::Native {
        native_l1.to_string()
    } else {
        cfg_l1s[i % cfg_l1s.len()].clone()
    };
    GroupLabel::new(l1, level)
}

fn essay_id(level: Proficiency, i: usize) -> String {
    format!("{}_{:03}", level.as_str(), i)
}

/// Token-score corpus with four proficiency groups whose surprisal means rise
/// and entropy means fall from `low` to `native`, as configured.
pub fn synth_scores(cfg: &ScoreSynthConfig) -> Result<(Vec<EssayRecord>, ScoreSynthTruth)> {
    check_common(cfg.essays_per_group, &cfg.learner_l1s, cfg.min_tokens, cfg.max_tokens)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let essay = normal(cfg.essay_sd)?;
    let token = normal(cfg.token_sd)?;
    let l1 = normal(cfg.l1_sd)?;

    let mut l1_shifts = BTreeMap::new();
    for name in &cfg.learner_l1s {
        l1_shifts.insert(name.clone(), l1.sample(&mut rng));
    }
    l1_shifts.insert(cfg.native_l1.clone(), 0.0);

    let mut records = Vec::with_capacity(4 * cfg.essays_per_group);
    for (g, &level) in LEVELS.iter().enumerate() {
        for i in 0..cfg.essays_per_group {
            let label = essay_label(&cfg.learner_l1s, &cfg.native_l1, level, i);
            let shift = l1_shifts[&label.l1];
            let n = rng.random_range(cfg.min_tokens..=cfg.max_tokens);
            let u_s = essay.sample(&mut rng);
            let u_h = essay.sample(&mut rng);
            let scores = (0..n)
                .map(|p| {
                    let s = cfg.surprisal_means[g] + shift + u_s + cfg.position_slope * p as f64
                        + token.sample(&mut rng);
                    let h = cfg.entropy_means[g] - shift + u_h + token.sample(&mut rng);
                    TokenScore::new(p, s.max(0.0), h.max(0.0))
                })
                .collect();
            records.push(EssayRecord::new(essay_id(level, i), label, scores));
        }
    }

    let contrasts = |means: &[f64; 4]| {
        LEVELS[..3]
            .iter()
            .enumerate()
            .map(|(g, l)| (l.as_str().to_string(), means[g] - means[3]))
            .collect()
    };
    let truth = ScoreSynthTruth {
        config: cfg.clone(),
        l1_shifts,
        surprisal_contrasts: contrasts(&cfg.surprisal_means),
        entropy_contrasts: contrasts(&cfg.entropy_means),
    };
    Ok((records, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSynthConfig {
    pub seed: u64,
    pub essays_per_group: usize,
    pub learner_l1s: Vec<String>,
    pub native_l1: String,
    pub vocab_size: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Per-group Zipf exponents in [`LEVELS`] order; larger means a narrower
    /// working vocabulary.
    pub zipf_exponents: [f64; 4],
    pub corpus_sentences: usize,
    pub corpus_exponent: f64,
}

impl Default for TextSynthConfig {
    fn default() -> Self {
        Self {
            seed: 11,
            essays_per_group: 15,
            learner_l1s: vec!["ARA".into(), "DEU".into(), "ZHO".into()],
            native_l1: "ENG_NATIVE".into(),
            vocab_size: 600,
            min_words: 60,
            max_words: 180,
            zipf_exponents: [1.4, 1.25, 1.1, 0.95],
            corpus_sentences: 1500,
            corpus_exponent: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEssay {
    pub entry: ManifestEntry,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextCorpus {
    pub essays: Vec<SynthEssay>,
    /// Training sentences for the n-gram backend, one per element.
    pub training: Vec<String>,
}

const ONSETS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Pronounceable pseudo-word for a vocabulary rank; lower ranks get shorter words.
pub fn pseudo_word(rank: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut n = rank;
    let mut word = String::new();
    loop {
        let syl = n % base;
        word.push(ONSETS[syl / VOWELS.len()] as char);
        word.push(VOWELS[syl % VOWELS.len()] as char);
        n /= base;
        if n == 0 {
            break;
        }
        n -= 1;
    }
    word
}

fn zipf_text<R: Rng>(rng: &mut R, vocab: &[String], exponent: f64, words: usize) -> Result<String> {
    let dist = Zipf::new(vocab.len() as f64, exponent)
        .map_err(|e| Error::Config(format!("invalid Zipf exponent {exponent}: {e}")))?;
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push(' ');
        }
        let rank = dist.sample(rng) as usize;
        out.push_str(&vocab[rank.clamp(1, vocab.len()) - 1]);
    }
    Ok(out)
}

/// Plain-text essays plus a training corpus. Essay paths are `texts/<id>.txt`,
/// relative to wherever the manifest is written.
pub fn synth_texts(cfg: &TextSynthConfig) -> Result<TextCorpus> {
    check_common(cfg.essays_per_group, &cfg.learner_l1s, cfg.min_words, cfg.max_words)?;
    if cfg.vocab_size < 2 {
        return Err(Error::Config("vocabulary size must be ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vocab: Vec<String> = (0..cfg.vocab_size).map(pseudo_word).collect();

    let mut training = Vec::with_capacity(cfg.corpus_sentences);
    for _ in 0..cfg.corpus_sentences {
        let n = rng.random_range(6..=18);
        training.push(zipf_text(&mut rng, &vocab, cfg.corpus_exponent, n)?);
    }

    let mut essays = Vec::with_capacity(4 * cfg.essays_per_group);
    for (g, &level) in LEVELS.iter().enumerate() {
        for i in 0..cfg.essays_per_group {
            let id = essay_id(level, i);
            let n = rng.random_range(cfg.min_words..=cfg.max_words);
            let text = zipf_text(&mut rng, &vocab, cfg.zipf_exponents[g], n)?;
            essays.push(SynthEssay {
                entry: ManifestEntry {
                    text_path: format!("texts/{id}.txt").into(),
                    essay_id: id,
                    label: essay_label(&cfg.learner_l1s, &cfg.native_l1, level, i),
                },
                text,
            });
        }
    }
    Ok(TextCorpus { essays, training })
}
