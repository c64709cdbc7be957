//! Shared domain values: per-token scores, group labels, essay records and
//! essay-level metrics.
//!
//! All information quantities are in bits (log base 2).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One token's information scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    /// 0-based index of the token within its essay.
    pub position: usize,
    pub surprisal_bits: f64,
    pub entropy_bits: f64,
    /// Diagnostic only; never read by any numeric routine.
    pub token_text: Option<String>,
}

impl TokenScore {
    pub fn new(position: usize, surprisal_bits: f64, entropy_bits: f64) -> Self {
        Self {
            position,
            surprisal_bits,
            entropy_bits,
            token_text: None,
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.token_text = Some(text.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proficiency {
    Low,
    Medium,
    High,
    Native,
}

impl Proficiency {
    pub const ALL: [Proficiency; 4] = [
        Proficiency::Low,
        Proficiency::Medium,
        Proficiency::High,
        Proficiency::Native,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Proficiency::Low => "low",
            Proficiency::Medium => "medium",
            Proficiency::High => "high",
            Proficiency::Native => "native",
        }
    }
}

impl fmt::Display for Proficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Proficiency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Proficiency::Low),
            "medium" => Ok(Proficiency::Medium),
            "high" => Ok(Proficiency::High),
            "native" => Ok(Proficiency::Native),
            other => Err(Error::UnknownProficiency(other.to_string())),
        }
    }
}

/// Grouping factors attached to every essay.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupLabel {
    /// Native-language code, e.g. `"JPN"`, or `"ENG_NATIVE"` for the reference set.
    pub l1: String,
    pub proficiency: Proficiency,
}

impl GroupLabel {
    pub fn new(l1: impl Into<String>, proficiency: Proficiency) -> Self {
        Self {
            l1: l1.into(),
            proficiency,
        }
    }

    pub fn is_native(&self) -> bool {
        self.proficiency == Proficiency::Native
    }
}

/// Which grouping factor an analysis splits essays by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    L1,
    Proficiency,
}

impl Factor {
    pub fn level(self, label: &GroupLabel) -> String {
        match self {
            Factor::L1 => label.l1.clone(),
            Factor::Proficiency => label.proficiency.as_str().to_string(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::L1 => "l1",
            Factor::Proficiency => "proficiency",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssayRecord {
    pub essay_id: String,
    pub label: GroupLabel,
    pub scores: Vec<TokenScore>,
}

impl EssayRecord {
    pub fn new(essay_id: impl Into<String>, label: GroupLabel, scores: Vec<TokenScore>) -> Self {
        Self {
            essay_id: essay_id.into(),
            label,
            scores,
        }
    }

    /// Builds a record from parallel surprisal/entropy slices, numbering positions from 0.
    pub fn from_values(
        essay_id: impl Into<String>,
        label: GroupLabel,
        surprisals: &[f64],
        entropies: &[f64],
    ) -> Self {
        assert_eq!(surprisals.len(), entropies.len(), "parallel slices differ in length");
        let scores = surprisals
            .iter()
            .zip(entropies)
            .enumerate()
            .map(|(i, (&s, &h))| TokenScore::new(i, s, h))
            .collect();
        Self::new(essay_id, label, scores)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn surprisals(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().map(|t| t.surprisal_bits)
    }

    pub fn entropies(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().map(|t| t.entropy_bits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssayMetrics {
    pub essay_id: String,
    pub label: GroupLabel,
    pub mean_surprisal_bits: f64,
    pub mean_entropy_bits: f64,
    /// Population variance of token surprisal, bits².
    pub uid_score: f64,
    pub token_count: usize,
}

/// Essay-level quantity selected for group comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssayMeasure {
    MeanSurprisal,
    MeanEntropy,
    Uid,
}

impl EssayMeasure {
    pub const ALL: [EssayMeasure; 3] = [
        EssayMeasure::MeanSurprisal,
        EssayMeasure::MeanEntropy,
        EssayMeasure::Uid,
    ];

    pub fn of(self, m: &EssayMetrics) -> f64 {
        match self {
            EssayMeasure::MeanSurprisal => m.mean_surprisal_bits,
            EssayMeasure::MeanEntropy => m.mean_entropy_bits,
            EssayMeasure::Uid => m.uid_score,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EssayMeasure::MeanSurprisal => "mean_surprisal",
            EssayMeasure::MeanEntropy => "mean_entropy",
            EssayMeasure::Uid => "uid",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            EssayMeasure::Uid => "bits^2",
            _ => "bits",
        }
    }
}

/// A single broken invariant found by [`validate_record`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyEssayId,
    EmptyScores,
    PositionGap { index: usize, found: usize },
    NegativeSurprisal { position: usize, value: f64 },
    NonFiniteSurprisal { position: usize },
    NegativeEntropy { position: usize, value: f64 },
    NonFiniteEntropy { position: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyEssayId => write!(f, "empty essay_id"),
            Violation::EmptyScores => write!(f, "empty score sequence"),
            Violation::PositionGap { index, found } => {
                write!(f, "token {index}: position {found} breaks the 0,1,2,... sequence")
            }
            Violation::NegativeSurprisal { position, value } => {
                write!(f, "position {position}: negative surprisal ({value})")
            }
            Violation::NonFiniteSurprisal { position } => {
                write!(f, "position {position}: non-finite surprisal")
            }
            Violation::NegativeEntropy { position, value } => {
                write!(f, "position {position}: negative entropy ({value})")
            }
            Violation::NonFiniteEntropy { position } => {
                write!(f, "position {position}: non-finite entropy")
            }
        }
    }
}

/// Lists every invariant the record breaks. An empty list means the record is valid.
pub fn validate_record(record: &EssayRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if record.essay_id.is_empty() {
        out.push(Violation::EmptyEssayId);
    }
    if record.scores.is_empty() {
        out.push(Violation::EmptyScores);
    }
    for (index, t) in record.scores.iter().enumerate() {
        if t.position != index {
            out.push(Violation::PositionGap {
                index,
                found: t.position,
            });
        }
        if !t.surprisal_bits.is_finite() {
            out.push(Violation::NonFiniteSurprisal {
                position: t.position,
            });
        } else if t.surprisal_bits < 0.0 {
            out.push(Violation::NegativeSurprisal {
                position: t.position,
                value: t.surprisal_bits,
            });
        }
        if !t.entropy_bits.is_finite() {
            out.push(Violation::NonFiniteEntropy {
                position: t.position,
            });
        } else if t.entropy_bits < 0.0 {
            out.push(Violation::NegativeEntropy {
                position: t.position,
                value: t.entropy_bits,
            });
        }
    }
    out
}

/// Fails with the first violation, naming the essay.
pub fn ensure_valid(record: &EssayRecord) -> crate::Result<()> {
    match validate_record(record).first() {
        None => Ok(()),
        Some(v) => Err(Error::invalid(&record.essay_id, v.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label() -> GroupLabel {
        GroupLabel::new("JPN", Proficiency::Medium)
    }

    #[test]
    fn empty_record_is_reported() {
        let r = EssayRecord::new("e1", label(), vec![]);
        let report = validate_record(&r);
        assert_eq!(report, vec![Violation::EmptyScores]);
        assert_eq!(report[0].to_string(), "empty score sequence");
    }

    #[test]
    fn well_formed_record_passes() {
        let r = EssayRecord::from_values("e1", label(), &[1.0, 2.0, 0.0], &[3.0, 0.5, 1.0]);
        assert!(validate_record(&r).is_empty());
        assert!(ensure_valid(&r).is_ok());
    }

    #[test]
    fn negative_surprisal_names_position() {
        let r = EssayRecord::from_values("e1", label(), &[1.0, -0.5, 2.0], &[1.0, 1.0, 1.0]);
        let report = validate_record(&r);
        assert_eq!(
            report,
            vec![Violation::NegativeSurprisal {
                position: 1,
                value: -0.5
            }]
        );
        let msg = report[0].to_string();
        assert!(msg.contains("position 1") && msg.contains("negative surprisal"), "{msg}");
    }

    #[test]
    fn gaps_and_non_finite_values_each_map_to_one_code() {
        let mut r = EssayRecord::from_values("e1", label(), &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]);
        r.scores[1].position = 5;
        r.scores[2].entropy_bits = f64::NAN;
        r.scores[0].surprisal_bits = f64::INFINITY;
        let report = validate_record(&r);
        assert_eq!(report.len(), 3);
        assert!(report.contains(&Violation::NonFiniteSurprisal { position: 0 }));
        assert!(report.contains(&Violation::PositionGap { index: 1, found: 5 }));
        assert!(report.contains(&Violation::NonFiniteEntropy { position: 2 }));
    }

    #[test]
    fn proficiency_parsing() {
        assert_eq!("native".parse::<Proficiency>().unwrap(), Proficiency::Native);
        let err = "expert".parse::<Proficiency>().unwrap_err();
        assert_eq!(err.to_string(), "unknown proficiency: expert");
    }
}
