//! Corpus manifests, the token-score exchange format, and truncation for
//! position analyses.
//!
//! The exchange format is JSON Lines, one essay per line:
//!
//! ```text
//! {"essay_id":"e1","l1":"JPN","proficiency":"low","tokens":[{"i":0,"s":3.2,"h":5.1,"t":"The"},...]}
//! ```
//!
//! `s` is surprisal and `h` next-token entropy, both in bits. `t` is optional.
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces every value bit for bit.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ensure_valid, EssayRecord, GroupLabel, Proficiency, TokenScore};

/// Default number of leading tokens kept for position-based analyses.
pub const DEFAULT_MAX_TOKENS: usize = 300;

const MANIFEST_HEADER: [&str; 4] = ["essay_id", "path", "l1", "proficiency"];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub essay_id: String,
    /// Resolved against the manifest's directory when relative.
    pub text_path: PathBuf,
    pub label: GroupLabel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads a tab-separated manifest with header `essay_id  path  l1  proficiency`.
///
/// Line numbers in errors are 1-based and count the header as line 1.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<CorpusManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest_str(&text, base)
}

pub fn parse_manifest_str(text: &str, base_dir: &Path) -> Result<CorpusManifest> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, header)) => {
            let cols: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
            if cols != MANIFEST_HEADER {
                return Err(Error::Manifest {
                    line: 1,
                    message: format!(
                        "expected header {:?}, found {:?}",
                        MANIFEST_HEADER.join("\\t"),
                        cols.join("\\t")
                    ),
                });
            }
        }
        None => {
            return Err(Error::Manifest {
                line: 1,
                message: "missing header".into(),
            })
        }
    }

    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut entries = Vec::new();
    for (line_no, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 || cols.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::Manifest {
                line: line_no,
                message: format!("expected 4 non-empty tab-separated fields, found {}", cols.len()),
            });
        }
        let essay_id = cols[0].trim().to_string();
        let proficiency: Proficiency = cols[3].trim().parse()?;
        if let Some(&first) = seen.get(&essay_id) {
            return Err(Error::DuplicateEssay {
                id: essay_id,
                first,
                second: line_no,
            });
        }
        seen.insert(essay_id.clone(), line_no);
        let rel = PathBuf::from(cols[1].trim());
        let text_path = if rel.is_absolute() { rel } else { base_dir.join(rel) };
        entries.push(ManifestEntry {
            essay_id,
            text_path,
            label: GroupLabel::new(cols[2].trim(), proficiency),
        });
    }
    Ok(CorpusManifest { entries })
}

pub fn write_manifest(manifest: &CorpusManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut body = MANIFEST_HEADER.join("\t");
    body.push('\n');
    for e in &manifest.entries {
        let p = e.text_path.strip_prefix(base).unwrap_or(&e.text_path);
        body.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.essay_id,
            p.display(),
            e.label.l1,
            e.label.proficiency
        ));
    }
    write_atomic(path, body.as_bytes())
}

/// Keeps the first `max_tokens` tokens. Shorter essays pass through whole.
pub fn truncate_for_position_analysis(record: &EssayRecord, max_tokens: usize) -> EssayRecord {
    let keep = record.scores.len().min(max_tokens);
    EssayRecord {
        essay_id: record.essay_id.clone(),
        label: record.label.clone(),
        scores: record.scores[..keep].to_vec(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireToken {
    i: usize,
    s: f64,
    h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct WireEssay {
    essay_id: String,
    l1: String,
    proficiency: Proficiency,
    tokens: Vec<WireToken>,
}

impl From<&EssayRecord> for WireEssay {
    fn from(r: &EssayRecord) -> Self {
        WireEssay {
            essay_id: r.essay_id.clone(),
            l1: r.label.l1.clone(),
            proficiency: r.label.proficiency,
            tokens: r
                .scores
                .iter()
                .map(|t| WireToken {
                    i: t.position,
                    s: t.surprisal_bits,
                    h: t.entropy_bits,
                    t: t.token_text.clone(),
                })
                .collect(),
        }
    }
}

impl From<WireEssay> for EssayRecord {
    fn from(w: WireEssay) -> Self {
        EssayRecord {
            essay_id: w.essay_id,
            label: GroupLabel::new(w.l1, w.proficiency),
            scores: w
                .tokens
                .into_iter()
                .map(|t| TokenScore {
                    position: t.i,
                    surprisal_bits: t.s,
                    entropy_bits: t.h,
                    token_text: t.t,
                })
                .collect(),
        }
    }
}

/// Encodes one record as a single exchange-format line (no trailing newline).
pub fn encode_record(record: &EssayRecord) -> Result<String> {
    ensure_valid(record)?;
    serde_json::to_string(&WireEssay::from(record))
        .map_err(|e| Error::invalid(&record.essay_id, e.to_string()))
}

/// Parses exchange-format lines. Blank lines are skipped; `line` numbers are 1-based.
pub fn read_scores_from<R: BufRead>(reader: R) -> Result<Vec<EssayRecord>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Exchange {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireEssay = serde_json::from_str(&line).map_err(|e| Error::Exchange {
            line: line_no,
            message: e.to_string(),
        })?;
        let record = EssayRecord::from(wire);
        ensure_valid(&record)?;
        if !ids.insert(record.essay_id.clone()) {
            return Err(Error::invalid(
                &record.essay_id,
                format!("duplicate essay_id on line {line_no}"),
            ));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<EssayRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores_from(BufReader::new(file))
}

pub fn write_scores_to<W: Write>(records: &[EssayRecord], mut writer: W) -> Result<()> {
    for r in records {
        let line = encode_record(r)?;
        writeln!(writer, "{line}").map_err(|e| Error::io("<scores>", e))?;
    }
    Ok(())
}

/// Writes the records atomically: nothing appears at `path` unless every record is valid.
pub fn write_scores(records: &[EssayRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_scores_to(records, &mut buf)?;
    write_atomic(path.as_ref(), &buf)
}

/// Writes via a temporary file in the destination directory followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        w.write_all(bytes).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Reads a UTF-8 essay text.
pub fn load_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
