//! Interpolated add-k n-gram language model with exact next-token distributions.
//!
//! For a context `h` the model mixes add-k estimates of every order below
//! `order`:
//!
//! ```text
//! p(w | h) = Σ_j λ_j · (c(h_j, w) + k) / (c(h_j) + k·|V|)
//! ```
//!
//! where `h_j` is the last `j` tokens of the BOS-padded context and `λ_j` is
//! `interpolation_weights[j]` (index 0 is the unigram weight). Every component
//! spans the whole vocabulary, so every probability is strictly positive and
//! each distribution sums to one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::write_atomic;
use crate::metrics::entropy_terms;
use crate::types::TokenScore;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const UNK_ID: u32 = 2;

const MODEL_FORMAT: &str = "infodens-ngram";
const MODEL_VERSION: u32 = 1;

/// Splits on Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Weights proportional to `2^j`, favouring longer contexts.
pub fn default_weights(order: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..order).map(|j| f64::powi(2.0, j as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub order: usize,
    pub smoothing_k: f64,
    pub interpolation_weights: Vec<f64>,
}

impl NgramConfig {
    pub fn new(order: usize, smoothing_k: f64) -> Self {
        Self {
            order,
            smoothing_k,
            interpolation_weights: default_weights(order),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.interpolation_weights = weights;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidOrder);
        }
        if !(self.smoothing_k > 0.0 && self.smoothing_k.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing k must be positive, got {}",
                self.smoothing_k
            )));
        }
        let w = &self.interpolation_weights;
        let sum: f64 = w.iter().sum();
        if w.len() != self.order
            || w.iter().any(|x| !x.is_finite() || *x < 0.0)
            || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct NextCounts {
    total: u64,
    next: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    smoothing_k: f64,
    weights: Vec<f64>,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    counts: BTreeMap<Vec<u32>, NextCounts>,
}

impl NgramModel {
    /// Counts every n-gram up to `config.order` in the corpus. Each sequence is
    /// padded with `order - 1` BOS symbols and terminated by EOS.
    pub fn train<S: AsRef<str>>(corpus: &[Vec<S>], config: &NgramConfig) -> Result<Self> {
        config.validate()?;
        if corpus.iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyCorpus);
        }

        let content: BTreeSet<&str> = corpus
            .iter()
            .flatten()
            .map(AsRef::as_ref)
            .filter(|t| ![BOS, EOS, UNK].contains(t))
            .collect();
        let vocab: Vec<String> = [BOS, EOS, UNK]
            .into_iter()
            .chain(content)
            .map(str::to_owned)
            .collect();
        let index: HashMap<String, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        let eos = index[EOS];
        let mut counts: BTreeMap<Vec<u32>, NextCounts> = BTreeMap::new();
        for seq in corpus.iter().filter(|s| !s.is_empty()) {
            let mut padded = vec![BOS_ID; config.order - 1];
            padded.extend(seq.iter().map(|t| index[t.as_ref()]));
            padded.push(eos);
            for t in (config.order - 1)..padded.len() {
                let w = padded[t];
                for j in 0..config.order {
                    let entry = counts.entry(padded[t - j..t].to_vec()).or_default();
                    entry.total += 1;
                    *entry.next.entry(w).or_default() += 1;
                }
            }
        }

        Ok(Self {
            order: config.order,
            smoothing_k: config.smoothing_k,
            weights: config.interpolation_weights.clone(),
            vocab,
            index,
            counts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_k(&self) -> f64 {
        self.smoothing_k
    }

    pub fn interpolation_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Vocabulary in distribution order: BOS, EOS, UNK, then content tokens sorted.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Index of `token` in [`Self::vocabulary`]; unknown tokens map to UNK.
    pub fn token_id(&self, token: &str) -> usize {
        self.id(token) as usize
    }

    fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Raw training count of `next` following exactly `context` (no padding applied).
    pub fn count<S: AsRef<str>>(&self, context: &[S], next: &str) -> u64 {
        let key: Vec<u32> = context.iter().map(|t| self.id(t.as_ref())).collect();
        let id = self.id(next);
        self.counts
            .get(&key)
            .and_then(|c| c.next.get(&id))
            .copied()
            .unwrap_or(0)
    }

    /// Total training count of `context` as a conditioning history.
    pub fn context_total<S: AsRef<str>>(&self, context: &[S]) -> u64 {
        let key: Vec<u32> = context.iter().map(|t| self.id(t.as_ref())).collect();
        self.counts.get(&key).map_or(0, |c| c.total)
    }

    /// The last `order - 1` ids of the BOS-padded context.
    fn history<S: AsRef<str>>(&self, context: &[S]) -> Vec<u32> {
        let width = self.order - 1;
        let mut hist = vec![BOS_ID; width.saturating_sub(context.len())];
        let start = context.len().saturating_sub(width);
        hist.extend(context[start..].iter().map(|t| self.id(t.as_ref())));
        hist
    }

    fn distribution_for_history(&self, hist: &[u32]) -> Vec<f64> {
        let v = self.vocab.len() as f64;
        let k = self.smoothing_k;
        let mut dist = vec![0.0; self.vocab.len()];
        let mut floor = 0.0;
        for (j, &lambda) in self.weights.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let ctx = &hist[hist.len() - j..];
            let (total, next) = match self.counts.get(ctx) {
                Some(c) => (c.total as f64, Some(&c.next)),
                None => (0.0, None),
            };
            let denom = total + k * v;
            floor += lambda * k / denom;
            if let Some(next) = next {
                for (&w, &c) in next {
                    dist[w as usize] += lambda * c as f64 / denom;
                }
            }
        }
        for p in &mut dist {
            *p += floor;
        }
        dist
    }

    /// Next-token distribution over the full vocabulary. Unknown context tokens
    /// are treated as UNK.
    pub fn next_distribution<S: AsRef<str>>(&self, context: &[S]) -> Vec<f64> {
        self.distribution_for_history(&self.history(context))
    }

    /// Surprisal and entropy (bits) of every token given its left context.
    pub fn score_sequence<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenScore> {
        let width = self.order - 1;
        let mut hist = vec![BOS_ID; width];
        let mut out = Vec::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            let dist = self.distribution_for_history(&hist);
            let id = self.id(tok.as_ref());
            let p = dist[id as usize];
            out.push(TokenScore {
                position: i,
                surprisal_bits: (-p.log2()).max(0.0),
                entropy_bits: entropy_terms(&dist),
                token_text: Some(tok.as_ref().to_owned()),
            });
            if width > 0 {
                hist.remove(0);
                hist.push(id);
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            order: self.order,
            smoothing_k: self.smoothing_k,
            interpolation_weights: self.weights.clone(),
            vocabulary: self.vocab.clone(),
            contexts: self
                .counts
                .iter()
                .map(|(ctx, c)| ContextEntry {
                    context: ctx.clone(),
                    next: c.next.iter().map(|(&w, &n)| (w, n)).collect(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&file).map_err(|e| Error::Model(e.to_string()))?;
        write_atomic(path.as_ref(), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile =
            serde_json::from_slice(&bytes).map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        Self::from_file(file)
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        let config = NgramConfig {
            order: file.order,
            smoothing_k: file.smoothing_k,
            interpolation_weights: file.interpolation_weights,
        };
        config.validate()?;
        if file.vocabulary.len() < 3 || file.vocabulary[..3] != [BOS, EOS, UNK] {
            return Err(Error::Model("vocabulary must start with BOS, EOS, UNK".into()));
        }
        let v = file.vocabulary.len() as u32;
        let mut counts = BTreeMap::new();
        for entry in file.contexts {
            if entry.context.len() >= config.order || entry.context.iter().any(|&w| w >= v) {
                return Err(Error::Model(format!("bad context {:?}", entry.context)));
            }
            let mut nc = NextCounts::default();
            for (w, n) in entry.next {
                if w >= v {
                    return Err(Error::Model(format!("token id {w} out of range")));
                }
                nc.total += n;
                nc.next.insert(w, n);
            }
            counts.insert(entry.context, nc);
        }
        let index = file
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Self {
            order: config.order,
            smoothing_k: config.smoothing_k,
            weights: config.interpolation_weights,
            vocab: file.vocabulary,
            index,
            counts,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ContextEntry {
    context: Vec<u32>,
    next: Vec<(u32, u64)>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    smoothing_k: f64,
    interpolation_weights: Vec<f64>,
    vocabulary: Vec<String>,
    contexts: Vec<ContextEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    fn sum(v: &[f64]) -> f64 {
        crate::numeric::sum(v.iter().copied())
    }

    #[test]
    fn toy_bigram_counts() {
        let m = NgramModel::train(&corpus(&["a b", "a c"]), &NgramConfig::new(2, 1.0)).unwrap();
        let vocab: BTreeSet<&str> = m.vocabulary().iter().map(String::as_str).collect();
        assert_eq!(vocab, BTreeSet::from(["a", "b", "c", BOS, EOS, UNK]));
        assert_eq!(m.count(&["a"], "b"), 1);
        assert_eq!(m.count(&["a"], "c"), 1);
        assert_eq!(m.count(&[BOS], "a"), 2);
        assert_eq!(m.count(&["b"], EOS), 1);
        assert_eq!(m.context_total::<&str>(&[]), 6);
    }

    #[test]
    fn unigram_ignores_context() {
        let m = NgramModel::train(&corpus(&["x y z", "y y"]), &NgramConfig::new(1, 0.5)).unwrap();
        let a = m.next_distribution(&["x"]);
        let b = m.next_distribution(&["z", "y", "q"]);
        let c = m.next_distribution::<&str>(&[]);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty: Vec<Vec<String>> = vec![];
        let err = NgramModel::train(&empty, &NgramConfig::new(2, 1.0)).unwrap_err();
        assert_eq!(err.to_string(), "empty corpus");
    }

    #[test]
    fn bad_configs_are_rejected() {
        let c = corpus(&["a b"]);
        assert!(matches!(
            NgramModel::train(&c, &NgramConfig::new(0, 1.0)),
            Err(Error::InvalidOrder)
        ));
        let bad = NgramConfig::new(2, 1.0).with_weights(vec![0.5, 0.6]);
        assert!(matches!(NgramModel::train(&c, &bad), Err(Error::InvalidWeights { .. })));
        let short = NgramConfig::new(3, 1.0).with_weights(vec![0.5, 0.5]);
        assert!(matches!(NgramModel::train(&c, &short), Err(Error::InvalidWeights { .. })));
        assert!(NgramModel::train(&c, &NgramConfig::new(2, 0.0)).is_err());
    }

    #[test]
    fn near_mle_unigram_over_content_tokens() {
        let k = 1e-9;
        let m = NgramModel::train(&corpus(&["a a a b"]), &NgramConfig::new(1, k)).unwrap();
        let d = m.next_distribution::<&str>(&[]);
        let pa = d[m.token_id("a")];
        let pb = d[m.token_id("b")];
        // (count + k) / (total + k|V|) with total = 5 (four tokens plus EOS), |V| = 5
        assert!((pa - (3.0 + k) / (5.0 + 5.0 * k)).abs() < 1e-15);
        assert!((pa / (pa + pb) - 0.75).abs() < 1e-8);
        assert!((pb / (pa + pb) - 0.25).abs() < 1e-8);
    }

    #[test]
    fn large_k_approaches_uniform() {
        let m = NgramModel::train(&corpus(&["a b c d", "d c b a"]), &NgramConfig::new(2, 1e9)).unwrap();
        let d = m.next_distribution(&["a"]);
        let u = 1.0 / m.vocab_size() as f64;
        assert!(d.iter().all(|p| (p - u).abs() < 1e-8));
    }

    #[test]
    fn distributions_are_deterministic() {
        let m = NgramModel::train(&corpus(&["the cat sat", "the dog sat"]), &NgramConfig::new(3, 0.1)).unwrap();
        let a = m.next_distribution(&["the", "cat"]);
        let b = m.next_distribution(&["the", "cat"]);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn half_probability_first_token_is_one_bit() {
        // Bigram-only weights: p(x | BOS) = (c + k) / (total + k|V|) = (2 + 1) / (2 + 1·4) = 0.5.
        let cfg = NgramConfig::new(2, 1.0).with_weights(vec![0.0, 1.0]);
        let m = NgramModel::train(&corpus(&["x", "x"]), &cfg).unwrap();
        assert_eq!(m.vocab_size(), 4);
        let s = m.score_sequence(&["x"]);
        assert_eq!(s[0].surprisal_bits, 1.0);
    }

    #[test]
    fn uniform_over_eight_outcomes_is_three_bits() {
        // Five content tokens plus BOS, EOS, UNK give |V| = 8; an unseen bigram context
        // with pure bigram weighting falls back to k / (k|V|) for every entry.
        let cfg = NgramConfig::new(2, 1.0).with_weights(vec![0.0, 1.0]);
        let m = NgramModel::train(&corpus(&["a b c d e"]), &cfg).unwrap();
        assert_eq!(m.vocab_size(), 8);
        let s = m.score_sequence(&["e", "zzz"]);
        // context "e" was seen (e → EOS); context UNK was not
        let d = m.next_distribution(&["zzz"]);
        assert!(d.iter().all(|p| *p == 0.125));
        let after_unk = m.score_sequence(&["zzz", "a"]);
        assert_eq!(after_unk[1].entropy_bits, 3.0);
        assert!(s[1].entropy_bits < 3.0);
    }

    #[test]
    fn unknown_tokens_score_as_unk() {
        let m = NgramModel::train(&corpus(&["a b"]), &NgramConfig::new(2, 1.0)).unwrap();
        let d = m.next_distribution(&["a"]);
        let s = m.score_sequence(&["a", "never-seen"]);
        assert_eq!(s[1].surprisal_bits, -d[m.token_id(UNK)].log2());
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let m = NgramModel::train(
            &corpus(&["one two three", "two three four", "three four five one"]),
            &NgramConfig::new(3, 0.37).with_weights(vec![0.1, 0.2, 0.7]),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = NgramModel::load(&path).unwrap();
        assert_eq!(back, m);
        let a = m.score_sequence(&["two", "three", "five"]);
        let b = back.score_sequence(&["two", "three", "five"]);
        assert_eq!(a, b);
    }

    #[test]
    fn load_rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, br#"{"format":"other","version":1,"order":1,"smoothing_k":1.0,"interpolation_weights":[1.0],"vocabulary":["<s>","</s>","<unk>"],"contexts":[]}"#).unwrap();
        assert!(matches!(NgramModel::load(&path), Err(Error::Model(_))));
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 1..12)
                .prop_map(|v| v.into_iter().map(String::from).collect()),
            1..8,
        )
    }

    proptest! {
        #[test]
        fn every_distribution_is_normalized_and_positive(
            c in arb_corpus(),
            order in 1usize..5,
            k in 1e-3f64..5.0,
            ctx in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "zz"]), 0..6),
        ) {
            let m = NgramModel::train(&c, &NgramConfig::new(order, k)).unwrap();
            let d = m.next_distribution(&ctx);
            prop_assert_eq!(d.len(), m.vocab_size());
            prop_assert!(d.iter().all(|&p| p > 0.0));
            prop_assert!((sum(&d) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn entropy_within_bounds_and_equals_expected_surprisal(
            c in arb_corpus(),
            order in 1usize..4,
            seq in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "q"]), 1..20),
        ) {
            let m = NgramModel::train(&c, &NgramConfig::new(order, 0.5)).unwrap();
            let max = (m.vocab_size() as f64).log2();
            for (i, s) in m.score_sequence(&seq).iter().enumerate() {
                prop_assert!(s.entropy_bits >= 0.0 && s.entropy_bits <= max + 1e-12);
                let d = m.next_distribution(&seq[..i]);
                let expected: f64 = d.iter().map(|p| p * -p.log2()).sum();
                prop_assert!((expected - s.entropy_bits).abs() < 1e-9);
            }
        }
    }
}
