//! End-to-end runs: train the n-gram backend, score a manifest, analyze scores,
//! and generate synthetic corpora. Every file is written atomically.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{
    self, load_text, parse_manifest, read_scores, truncate_for_position_analysis, write_atomic,
    CorpusManifest, ManifestEntry,
};
use crate::metrics::essay_metrics;
use crate::ngram::{tokenize, NgramConfig, NgramModel};
use crate::profile::{build_profiles, ProfileOptions, TokenMetric};
use crate::report::{
    self, boxplot_summary, native_reference_band, AnalysisBundle, AnovaEntry, LmmEntry,
    PosthocEntry,
};
use crate::stats::{fit_lmm, one_way_anova, posthoc_pairwise, proficiency_design, GroupedValues};
use crate::synth::{synth_scores, synth_texts, ScoreSynthConfig, TextSynthConfig};
use crate::types::{EssayMeasure, EssayMetrics, EssayRecord, Factor, Proficiency};

pub const PROFILES_FILE: &str = "profiles.csv";
pub const LMM_FILE: &str = "lmm.csv";
pub const ANOVA_FILE: &str = "anova.csv";
pub const POSTHOC_FILE: &str = "posthoc.csv";
pub const BOXPLOT_FILE: &str = "boxplot.csv";
pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSelection {
    Surprisal,
    Entropy,
    Uid,
    All,
}

impl MetricSelection {
    pub fn essay_measures(self) -> Vec<EssayMeasure> {
        match self {
            MetricSelection::Surprisal => vec![EssayMeasure::MeanSurprisal],
            MetricSelection::Entropy => vec![EssayMeasure::MeanEntropy],
            MetricSelection::Uid => vec![EssayMeasure::Uid],
            MetricSelection::All => EssayMeasure::ALL.to_vec(),
        }
    }

    pub fn token_metrics(self) -> Vec<TokenMetric> {
        match self {
            MetricSelection::Surprisal => vec![TokenMetric::Surprisal],
            MetricSelection::Entropy => vec![TokenMetric::Entropy],
            MetricSelection::Uid => vec![],
            MetricSelection::All => TokenMetric::ALL.to_vec(),
        }
    }
}

/// Where token scores come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "backend")]
pub enum ScoreSource {
    /// Score manifest texts with a saved n-gram model.
    Ngram { manifest: PathBuf, model: PathBuf },
    /// Read a pre-scored exchange file.
    External { scores: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Text files, or directories whose `*.txt` files are read; one sequence per line.
    pub corpus: Vec<PathBuf>,
    pub ngram: NgramConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub manifest: PathBuf,
    /// Saved model for the n-gram backend; `None` with `external` set instead.
    pub model: Option<PathBuf>,
    /// Pre-scored exchange file to check against the manifest.
    pub external: Option<PathBuf>,
    pub workers: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub source: ScoreSource,
    pub group_by: Factor,
    pub metric: MetricSelection,
    pub max_tokens: usize,
    pub window: usize,
    pub alpha: f64,
    #[serde(skip)]
    pub workers: usize,
}

impl AnalysisConfig {
    pub fn new(source: ScoreSource) -> Self {
        Self {
            source,
            group_by: Factor::L1,
            metric: MetricSelection::All,
            max_tokens: ingestion::DEFAULT_MAX_TOKENS,
            window: 1,
            alpha: crate::stats::DEFAULT_ALPHA,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum SynthConfig {
    Scores(ScoreSynthConfig),
    Texts(TextSynthConfig),
}

/// One fully specified invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Train(TrainConfig),
    Score(ScoreConfig),
    Analyze(AnalysisConfig, PathBuf),
    Synth(SynthConfig, PathBuf),
}

/// Executes `config`, returning the paths it wrote.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    match config {
        RunConfig::Train(c) => cmd_train(c).map(|_| vec![c.out.clone()]),
        RunConfig::Score(c) => cmd_score(c).map(|_| vec![c.out.clone()]),
        RunConfig::Analyze(c, out) => cmd_analyze(c, out),
        RunConfig::Synth(c, out) => cmd_synth(c, out),
    }
}

fn corpus_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        let meta = fs::metadata(p).map_err(|e| Error::io(p, e))?;
        if meta.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "txt"))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

/// Reads training sequences, one per non-blank line.
pub fn read_training_corpus(paths: &[PathBuf]) -> Result<Vec<Vec<String>>> {
    let mut seqs = Vec::new();
    for f in corpus_files(paths)? {
        let text = load_text(&f)?;
        seqs.extend(text.lines().map(tokenize).filter(|t| !t.is_empty()));
    }
    Ok(seqs)
}

pub fn cmd_train(config: &TrainConfig) -> Result<NgramModel> {
    let corpus = read_training_corpus(&config.corpus)?;
    let model = NgramModel::train(&corpus, &config.ngram)?;
    ensure_parent(&config.out)?;
    model.save(&config.out)?;
    Ok(model)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Scores every manifest essay with `model`, in manifest order.
pub fn score_manifest(manifest: &CorpusManifest, model: &NgramModel, workers: usize) -> Result<Vec<EssayRecord>> {
    let score = |e: &ManifestEntry| -> Result<EssayRecord> {
        let tokens = tokenize(&load_text(&e.text_path)?);
        if tokens.is_empty() {
            return Err(Error::invalid(&e.essay_id, "text contains no tokens"));
        }
        Ok(EssayRecord::new(
            e.essay_id.clone(),
            e.label.clone(),
            model.score_sequence(&tokens),
        ))
    };
    pool(workers)?.install(|| manifest.entries.par_iter().map(score).collect())
}

/// Checks a pre-scored file against a manifest: same essays, same labels.
pub fn check_external(manifest: &CorpusManifest, records: &[EssayRecord]) -> Result<()> {
    let by_id: BTreeMap<&str, &EssayRecord> = records.iter().map(|r| (r.essay_id.as_str(), r)).collect();
    for e in &manifest.entries {
        match by_id.get(e.essay_id.as_str()) {
            None => return Err(Error::invalid(&e.essay_id, "listed in the manifest but missing from the scores")),
            Some(r) if r.label != e.label => {
                return Err(Error::invalid(&e.essay_id, "labels differ between manifest and scores"))
            }
            Some(_) => {}
        }
    }
    if records.len() != manifest.len() {
        let listed: std::collections::BTreeSet<&str> = manifest.entries.iter().map(|e| e.essay_id.as_str()).collect();
        let extra = records.iter().find(|r| !listed.contains(r.essay_id.as_str())).expect("an unlisted record");
        return Err(Error::invalid(&extra.essay_id, "scored but not listed in the manifest"));
    }
    Ok(())
}

pub fn cmd_score(config: &ScoreConfig) -> Result<Vec<EssayRecord>> {
    let manifest = parse_manifest(&config.manifest)?;
    let records = match (&config.model, &config.external) {
        (Some(model), None) => score_manifest(&manifest, &NgramModel::load(model)?, config.workers)?,
        (None, Some(scores)) => {
            let records = read_scores(scores)?;
            check_external(&manifest, &records)?;
            records
        }
        _ => return Err(Error::Config("give exactly one of a model or an external scores file".into())),
    };
    ensure_parent(&config.out)?;
    ingestion::write_scores(&records, &config.out)?;
    Ok(records)
}

/// Loads the records an analysis runs on.
pub fn load_records(source: &ScoreSource, workers: usize) -> Result<Vec<EssayRecord>> {
    match source {
        ScoreSource::External { scores } => read_scores(scores),
        ScoreSource::Ngram { manifest, model } => {
            score_manifest(&parse_manifest(manifest)?, &NgramModel::load(model)?, workers)
        }
    }
}

fn grouped(metrics: &[&EssayMetrics], factor: Factor, measure: EssayMeasure) -> GroupedValues {
    let mut g = GroupedValues::new();
    for m in metrics {
        g.entry(factor.level(&m.label)).or_default().push(measure.of(m));
    }
    g
}

#[derive(Default)]
struct Comparisons {
    anova: Vec<AnovaEntry>,
    posthoc: Vec<PosthocEntry>,
    notes: Vec<String>,
}

impl Comparisons {
    /// ANOVA plus post-hoc table for one stratum. Optional strata whose groups
    /// cannot support a comparison are skipped with a note.
    fn run(
        &mut self,
        measure: EssayMeasure,
        stratum: &str,
        groups: &GroupedValues,
        alpha: f64,
        required: bool,
    ) -> Result<()> {
        let result = match one_way_anova(groups) {
            Ok(r) => r,
            Err(e @ (Error::TooFewGroups(_) | Error::SmallGroup { .. } | Error::DegenerateData)) if !required => {
                self.notes.push(format!("{} / {stratum}: skipped ({e})", measure.as_str()));
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let table = posthoc_pairwise(groups, alpha)?;
        self.anova.push(AnovaEntry {
            measure,
            stratum: stratum.to_string(),
            result,
        });
        self.posthoc.push(PosthocEntry {
            measure,
            stratum: stratum.to_string(),
            table,
        });
        Ok(())
    }
}

/// A report file name and its contents.
pub type Table = (&'static str, Vec<u8>);

/// Runs the full analysis on in-memory records and returns the bundle and its
/// CSV tables (file name, contents) without touching the filesystem.
pub fn analyze(
    records: &[EssayRecord],
    config: &AnalysisConfig,
) -> Result<(AnalysisBundle<AnalysisConfig>, Vec<Table>)> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.max_tokens == 0 {
        return Err(Error::Config("max_tokens must be ≥ 1".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        crate::types::ensure_valid(r)?;
        if !seen.insert(r.essay_id.as_str()) {
            return Err(Error::invalid(&r.essay_id, "duplicate essay_id"));
        }
    }
    // Essay-level measures use every token.
    let metrics: Vec<EssayMetrics> = records.iter().map(essay_metrics).collect::<Result<_>>()?;
    let measures = config.metric.essay_measures();

    let mut cmp = Comparisons::default();
    for &measure in &measures {
        match config.group_by {
            Factor::Proficiency => {
                let all: Vec<&EssayMetrics> = metrics.iter().collect();
                let g = grouped(&all, Factor::Proficiency, measure);
                cmp.run(measure, "all", &g, config.alpha, true)?;
            }
            Factor::L1 => {
                let learners: Vec<&EssayMetrics> = metrics.iter().filter(|m| !m.label.is_native()).collect();
                let g = grouped(&learners, Factor::L1, measure);
                cmp.run(measure, "all", &g, config.alpha, true)?;
                for level in [Proficiency::Low, Proficiency::Medium, Proficiency::High] {
                    let stratum: Vec<&EssayMetrics> =
                        learners.iter().copied().filter(|m| m.label.proficiency == level).collect();
                    if stratum.is_empty() {
                        cmp.notes.push(format!("{} / {level}: skipped (no essays)", measure.as_str()));
                        continue;
                    }
                    let g = grouped(&stratum, Factor::L1, measure);
                    cmp.run(measure, level.as_str(), &g, config.alpha, false)?;
                }
            }
        }
    }

    let Comparisons {
        anova,
        posthoc,
        mut notes,
    } = cmp;

    // Position analyses use the leading tokens only.
    let truncated: Vec<EssayRecord> = records
        .iter()
        .map(|r| truncate_for_position_analysis(r, config.max_tokens))
        .collect();
    let opts = ProfileOptions {
        max_tokens: config.max_tokens,
        window: config.window,
    };
    let mut profiles = Vec::new();
    let mut lmm = Vec::new();
    let has_native = truncated.iter().any(|r| r.label.is_native());
    for metric in config.metric.token_metrics() {
        profiles.extend(build_profiles(&truncated, config.group_by, metric, opts)?);
        if has_native {
            let data = match metric {
                TokenMetric::Surprisal => proficiency_design(&truncated, |t| t.surprisal_bits)?,
                TokenMetric::Entropy => proficiency_design(&truncated, |t| t.entropy_bits)?,
            };
            lmm.push(LmmEntry {
                response: metric.as_str().to_string(),
                fit: fit_lmm(&data)?,
            });
        }
    }
    if !has_native && !config.metric.token_metrics().is_empty() {
        notes.push("mixed models skipped: no native essays to serve as the reference level".into());
    }

    let learners: Vec<EssayMetrics> = metrics.iter().filter(|m| !m.label.is_native()).cloned().collect();
    let mut boxplots = Vec::new();
    let mut bands = Vec::new();
    for &measure in &measures {
        if !learners.is_empty() {
            boxplots.extend(boxplot_summary(&learners, config.group_by, measure)?);
        }
        if has_native {
            let band = native_reference_band(&metrics, measure)?;
            if let Some(w) = &band.warning {
                notes.push(format!("{} reference band: {w}", measure.as_str()));
            }
            bands.push(band);
        }
    }
    if learners.is_empty() {
        notes.push("boxplots skipped: no non-native essays".into());
    }
    if !has_native {
        notes.push("reference bands skipped: no native essays".into());
    }
    if !lmm.is_empty() {
        notes.push("mixed-model p-values use the normal approximation to beta / SE".into());
    }

    let tables = vec![
        (PROFILES_FILE, report::profiles_csv(&profiles)?),
        (LMM_FILE, report::lmm_csv(&lmm)?),
        (ANOVA_FILE, report::anova_csv(&anova)?),
        (POSTHOC_FILE, report::posthoc_csv(&posthoc)?),
        (BOXPLOT_FILE, report::boxplot_csv(&boxplots, &bands)?),
    ];
    let units = [
        ("surprisal", "bits"),
        ("entropy", "bits"),
        ("mean_surprisal", "bits"),
        ("mean_entropy", "bits"),
        ("uid", "bits^2"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let bundle = AnalysisBundle {
        config: config.clone(),
        units,
        n_essays: records.len(),
        essay_metrics: metrics,
        profiles,
        anova,
        posthoc,
        lmm,
        boxplots,
        reference_bands: bands,
        notes,
        files: tables.iter().map(|(n, _)| n.to_string()).collect(),
    };
    Ok((bundle, tables))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(format!("json encoding failed: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ensure_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => ensure_dir(dir),
        _ => Ok(()),
    }
}

/// Loads the records, analyzes them, and writes the five tables and the bundle
/// into `out_dir`. Nothing is written unless the whole analysis succeeds.
pub fn cmd_analyze(config: &AnalysisConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let records = load_records(&config.source, config.workers)?;
    let (bundle, tables) = analyze(&records, config)?;
    let json = to_json(&bundle)?;
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for (name, bytes) in tables.iter().map(|(n, b)| (*n, b.as_slice())).chain([(BUNDLE_FILE, json.as_slice())]) {
        let path = out_dir.join(name);
        write_atomic(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes a synthetic corpus into `out_dir`.
///
/// Score mode writes `scores.jsonl` and `truth.json`. Text mode writes
/// `manifest.tsv`, `texts/*.txt`, `corpus.txt` (training sentences) and `truth.json`.
pub fn cmd_synth(config: &SynthConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    match config {
        SynthConfig::Scores(cfg) => {
            let (records, truth) = synth_scores(cfg)?;
            let scores = out_dir.join("scores.jsonl");
            ingestion::write_scores(&records, &scores)?;
            written.push(scores);
            let path = out_dir.join("truth.json");
            write_atomic(&path, &to_json(&truth)?)?;
            written.push(path);
        }
        SynthConfig::Texts(cfg) => {
            let corpus = synth_texts(cfg)?;
            ensure_dir(&out_dir.join("texts"))?;
            for e in &corpus.essays {
                let path = out_dir.join(&e.entry.text_path);
                let mut text = e.text.clone();
                text.push('\n');
                write_atomic(&path, text.as_bytes())?;
                written.push(path);
            }
            let manifest = CorpusManifest {
                entries: corpus
                    .essays
                    .iter()
                    .map(|e| ManifestEntry {
                        text_path: out_dir.join(&e.entry.text_path),
                        ..e.entry.clone()
                    })
                    .collect(),
            };
            let path = out_dir.join("manifest.tsv");
            ingestion::write_manifest(&manifest, &path)?;
            written.push(path);
            let mut training = corpus.training.join("\n");
            training.push('\n');
            let path = out_dir.join("corpus.txt");
            write_atomic(&path, training.as_bytes())?;
            written.push(path);
            let path = out_dir.join("truth.json");
            write_atomic(&path, &to_json(cfg)?)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GroupLabel;

    fn synthetic() -> Vec<EssayRecord> {
        synth_scores(&ScoreSynthConfig::default()).unwrap().0
    }

    fn external(path: &str) -> AnalysisConfig {
        AnalysisConfig::new(ScoreSource::External { scores: path.into() })
    }

    #[test]
    fn l1_analysis_has_overall_and_stratum_tables() {
        let (bundle, tables) = analyze(&synthetic(), &external("x.jsonl")).unwrap();
        let strata: Vec<(&str, &str)> = bundle
            .anova
            .iter()
            .map(|e| (e.measure.as_str(), e.stratum.as_str()))
            .collect();
        assert_eq!(strata.len(), 12);
        assert!(strata.contains(&("uid", "medium")));
        // learner essays only: 45 essays over 3 L1s
        assert_eq!(bundle.anova[0].result.df_between, 2);
        assert_eq!(bundle.anova[0].result.df_within, 42);
        assert_eq!(tables.len(), 5);
        assert_eq!(bundle.lmm.len(), 2);
        assert_eq!(bundle.reference_bands.len(), 3);
    }

    #[test]
    fn proficiency_analysis_is_a_single_stratum() {
        let mut cfg = external("x.jsonl");
        cfg.group_by = Factor::Proficiency;
        cfg.metric = MetricSelection::Uid;
        let (bundle, _) = analyze(&synthetic(), &cfg).unwrap();
        assert_eq!(bundle.anova.len(), 1);
        assert_eq!(bundle.anova[0].result.n_groups, 4);
        assert!(bundle.lmm.is_empty());
        assert!(bundle.profiles.is_empty());
    }

    #[test]
    fn one_proficiency_group_is_rejected() {
        let rs: Vec<EssayRecord> = synthetic()
            .into_iter()
            .filter(|r| r.label.proficiency == Proficiency::Low)
            .collect();
        let mut cfg = external("x.jsonl");
        cfg.group_by = Factor::Proficiency;
        let err = analyze(&rs, &cfg).unwrap_err();
        assert!(err.to_string().starts_with("need ≥ 2 groups"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn thin_strata_are_skipped_with_notes() {
        let mut rs = synthetic();
        rs.retain(|r| r.label.proficiency != Proficiency::High || r.label.l1 == "ARA");
        let (bundle, _) = analyze(&rs, &external("x.jsonl")).unwrap();
        assert!(bundle.anova.iter().all(|e| e.stratum != "high"));
        assert!(bundle.notes.iter().any(|n| n.contains("high: skipped")));
    }

    #[test]
    fn external_scores_must_match_the_manifest() {
        let rs = synthetic();
        let manifest = CorpusManifest {
            entries: rs
                .iter()
                .map(|r| ManifestEntry {
                    essay_id: r.essay_id.clone(),
                    text_path: PathBuf::from("unused"),
                    label: r.label.clone(),
                })
                .collect(),
        };
        check_external(&manifest, &rs).unwrap();
        let mut relabeled = rs.clone();
        relabeled[3].label = GroupLabel::new("XXX", Proficiency::Low);
        assert!(check_external(&manifest, &relabeled).is_err());
        assert!(check_external(&manifest, &rs[1..]).is_err());
        let mut extra = rs.clone();
        extra.push(EssayRecord::from_values("stray", rs[0].label.clone(), &[1.0], &[1.0]));
        assert!(check_external(&manifest, &extra).is_err());
    }

    #[test]
    fn analysis_is_deterministic_and_order_free() {
        let rs = synthetic();
        let cfg = external("x.jsonl");
        let (a, ta) = analyze(&rs, &cfg).unwrap();
        let (b, tb) = analyze(&rs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let mut reversed = rs.clone();
        reversed.reverse();
        let (c, _) = analyze(&reversed, &cfg).unwrap();
        for (x, y) in a.lmm.iter().zip(&c.lmm) {
            for (ex, ey) in x.fit.fixed_effects.iter().zip(&y.fit.fixed_effects) {
                assert!((ex.beta - ey.beta).abs() < 1e-9);
            }
        }
        for (x, y) in a.anova.iter().zip(&c.anova) {
            assert!((x.result.f_value - y.result.f_value).abs() < 1e-9 * x.result.f_value.max(1.0));
        }
    }
}
