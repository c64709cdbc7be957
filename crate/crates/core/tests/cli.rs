use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_infodens"));
    for (k, _) in std::env::vars() {
        if k.starts_with("INFODENS_") {
            c.env_remove(k);
        }
    }
    c
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn digest(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let toy = fixtures().join("toy");
    let mut digests = Vec::new();
    for name in ["m1.json", "m2.json"] {
        let out = dir.path().join(name);
        let o = run(bin().args(["train", "--order", "2", "--corpus"]).arg(&toy).arg("--out").arg(&out));
        assert!(o.status.success(), "{}", stderr(&o));
        digests.push(digest(&out));
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn missing_corpus_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["train", "--corpus", "/no/such/corpus.txt", "--out"])
        .arg(dir.path().join("m.json")));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/corpus.txt"), "{}", stderr(&o));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn order_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["train", "--order", "0", "--corpus"])
        .arg(fixtures().join("corpus20.txt"))
        .arg("--out")
        .arg(dir.path().join("m.json")));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("order must be ≥ 1"), "{}", stderr(&o));
}

fn synth_scores(dir: &Path) -> PathBuf {
    let out = dir.join("synth");
    let o = run(bin().args(["synth", "--mode", "scores", "--out"]).arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("scores.jsonl")
}

#[test]
fn one_proficiency_group_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let scores = synth_scores(dir.path());
    let text = std::fs::read_to_string(&scores).unwrap();
    let low: String = text.lines().filter(|l| l.contains("\"low\"")).map(|l| format!("{l}\n")).collect();
    let only_low = dir.path().join("low.jsonl");
    std::fs::write(&only_low, low).unwrap();
    let out = dir.path().join("report");
    let o = run(bin()
        .args(["analyze", "--group-by", "proficiency", "--scores"])
        .arg(&only_low)
        .arg("--out")
        .arg(&out));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("need ≥ 2 groups"), "{}", stderr(&o));
    assert!(!out.join("bundle.json").exists());
}

#[test]
fn invariant_violation_exits_3_naming_the_essay() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        r#"{"essay_id":"ok1","l1":"DEU","proficiency":"low","tokens":[{"i":0,"s":1.0,"h":2.0}]}
{"essay_id":"e7","l1":"DEU","proficiency":"low","tokens":[{"i":0,"s":1.0,"h":2.0},{"i":1,"s":-1.0,"h":2.0}]}
"#,
    )
    .unwrap();
    let o = run(bin().args(["analyze", "--scores"]).arg(&bad).arg("--out").arg(dir.path().join("r")));
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("e7") && err.contains("negative surprisal"), "{err}");
}

#[test]
fn malformed_json_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"essay_id\":\"a\",\"l1\":\"X\",\"proficiency\":\"low\",\"tokens\":[{\"i\":0,\"s\":1,\"h\":1}]}\n{not json\n",
    )
    .unwrap();
    let o = run(bin().args(["analyze", "--scores"]).arg(&bad).arg("--out").arg(dir.path().join("r")));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn environment_overrides_flags_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let scores = synth_scores(dir.path());
    let out = dir.path().join("report");
    let o = run(bin()
        .env("INFODENS_MAX_TOKENS", "25")
        .env("INFODENS_METRIC", "surprisal")
        .args(["analyze", "--scores"])
        .arg(&scores)
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let bundle: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("bundle.json")).unwrap()).unwrap();
    assert_eq!(bundle["config"]["max_tokens"], 25);
    assert_eq!(bundle["config"]["metric"], "surprisal");
    let positions = bundle["profiles"][0]["rows"].as_array().unwrap().len();
    assert_eq!(positions, 25);
}

#[test]
fn full_text_pipeline_on_shipped_corpus() {
    let start = Instant::now();
    let corpus = fixtures().join("synth60");
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let scores = dir.path().join("scores.jsonl");

    let o = run(bin().arg("train").arg("--corpus").arg(corpus.join("corpus.txt")).arg("--out").arg(&model));
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(bin()
        .args(["score", "--workers", "2", "--manifest"])
        .arg(corpus.join("manifest.tsv"))
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&scores));
    assert!(o.status.success(), "{}", stderr(&o));

    let mut bundles = Vec::new();
    for name in ["r1", "r2"] {
        let out = dir.path().join(name);
        let o = run(bin().args(["analyze", "--scores"]).arg(&scores).arg("--out").arg(&out));
        assert!(o.status.success(), "{}", stderr(&o));
        for f in ["profiles.csv", "lmm.csv", "anova.csv", "posthoc.csv", "boxplot.csv", "bundle.json"] {
            assert!(out.join(f).is_file(), "missing {f}");
        }
        bundles.push(std::fs::read(out.join("bundle.json")).unwrap());
    }
    assert_eq!(bundles[0], bundles[1]);

    // In-process scoring gives the same analysis as the score-then-analyze route.
    let out = dir.path().join("r3");
    let o = run(bin()
        .args(["analyze", "--backend", "ngram", "--manifest"])
        .arg(corpus.join("manifest.tsv"))
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let a: serde_json::Value = serde_json::from_slice(&bundles[0]).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("bundle.json")).unwrap()).unwrap();
    assert_eq!(a["lmm"], b["lmm"]);
    assert_eq!(a["anova"], b["anova"]);

    assert!(start.elapsed() < Duration::from_secs(60));
}

#[test]
fn external_scores_are_checked_against_the_manifest() {
    let corpus = fixtures().join("synth60");
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let scores = dir.path().join("scores.jsonl");
    assert!(run(bin().arg("train").arg("--corpus").arg(corpus.join("corpus.txt")).arg("--out").arg(&model))
        .status
        .success());
    assert!(run(bin()
        .arg("score")
        .arg("--manifest")
        .arg(corpus.join("manifest.tsv"))
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&scores))
    .status
    .success());

    let checked = dir.path().join("checked.jsonl");
    let o = run(bin()
        .args(["score", "--backend", "external", "--manifest"])
        .arg(corpus.join("manifest.tsv"))
        .arg("--scores")
        .arg(&scores)
        .arg("--out")
        .arg(&checked));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&scores).unwrap(), std::fs::read(&checked).unwrap());

    let text = std::fs::read_to_string(&scores).unwrap();
    let short: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    std::fs::write(&scores, short).unwrap();
    let o = run(bin()
        .args(["score", "--backend", "external", "--manifest"])
        .arg(corpus.join("manifest.tsv"))
        .arg("--scores")
        .arg(&scores)
        .arg("--out")
        .arg(dir.path().join("again.jsonl")));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("low_000"), "{}", stderr(&o));
}
