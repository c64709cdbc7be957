//! Information-density profiling for grouped essay corpora.

pub mod error;
pub mod ingestion;
pub mod metrics;
pub mod ngram;
pub mod numeric;
pub mod pipeline;
pub mod profile;
pub mod report;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{EssayMetrics, EssayRecord, Factor, GroupLabel, Proficiency, TokenScore};
