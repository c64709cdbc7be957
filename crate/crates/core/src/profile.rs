//! Per-position group curves over the leading tokens of each essay.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::DEFAULT_MAX_TOKENS;
use crate::numeric::KahanSum;
use crate::types::{EssayRecord, Factor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenMetric {
    Surprisal,
    Entropy,
}

impl TokenMetric {
    pub const ALL: [TokenMetric; 2] = [TokenMetric::Surprisal, TokenMetric::Entropy];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenMetric::Surprisal => "surprisal",
            TokenMetric::Entropy => "entropy",
        }
    }

    pub fn value(self, record: &EssayRecord, position: usize) -> f64 {
        let t = &record.scores[position];
        match self {
            TokenMetric::Surprisal => t.surprisal_bits,
            TokenMetric::Entropy => t.entropy_bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub max_tokens: usize,
    /// Centered moving-average width; must be odd. 1 leaves means unsmoothed.
    pub window: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            max_tokens: DEFAULT_MAX_TOKENS,
            window: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub position: usize,
    /// Essays that have a token at this position.
    pub n_essays: usize,
    pub mean: f64,
    /// Sample standard deviation across essays (0 when a single essay remains).
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionProfile {
    pub factor: Factor,
    pub group: String,
    pub metric: TokenMetric,
    pub window: usize,
    pub rows: Vec<ProfileRow>,
}

impl PositionProfile {
    pub fn means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }
}

/// Profile for a single level of `factor`. Positions past an essay's end get no
/// contribution from that essay.
pub fn build_profile(
    records: &[EssayRecord],
    factor: Factor,
    group: &str,
    metric: TokenMetric,
    opts: ProfileOptions,
) -> Result<PositionProfile> {
    check_window(opts.window)?;
    if opts.max_tokens == 0 {
        return Err(Error::Config("max_tokens must be ≥ 1".into()));
    }
    let members: Vec<&EssayRecord> = records
        .iter()
        .filter(|r| factor.level(&r.label) == group)
        .collect();
    let longest = members.iter().map(|r| r.len()).max().unwrap_or(0);
    if longest == 0 {
        return Err(Error::EmptyGroup(format!("{factor}={group}")));
    }
    let span = longest.min(opts.max_tokens);

    let mut rows = Vec::with_capacity(span);
    for position in 0..span {
        let values: Vec<f64> = members
            .iter()
            .filter(|r| r.len() > position)
            .map(|r| metric.value(r, position))
            .collect();
        let n = values.len();
        let mean = values.iter().copied().collect::<KahanSum>().total() / n as f64;
        let std_dev = if n > 1 {
            let ss = values.iter().map(|v| (v - mean) * (v - mean)).collect::<KahanSum>().total();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        rows.push(ProfileRow {
            position,
            n_essays: n,
            mean,
            std_dev,
        });
    }

    if opts.window > 1 {
        let smoothed = moving_average(&rows.iter().map(|r| r.mean).collect::<Vec<_>>(), opts.window)?;
        for (row, m) in rows.iter_mut().zip(smoothed) {
            row.mean = m;
        }
    }

    Ok(PositionProfile {
        factor,
        group: group.to_string(),
        metric,
        window: opts.window,
        rows,
    })
}

/// One profile per level of `factor` present in `records`, in sorted level order.
pub fn build_profiles(
    records: &[EssayRecord],
    factor: Factor,
    metric: TokenMetric,
    opts: ProfileOptions,
) -> Result<Vec<PositionProfile>> {
    let levels: BTreeMap<String, ()> = records.iter().map(|r| (factor.level(&r.label), ())).collect();
    levels
        .keys()
        .map(|g| build_profile(records, factor, g, metric, opts))
        .collect()
}

/// Centered moving average; windows are truncated at both edges and averaged over
/// the neighbours that exist.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(window)?;
    let half = window / 2;
    Ok((0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            let s: KahanSum = values[lo..hi].iter().copied().collect();
            s.total() / (hi - lo) as f64
        })
        .collect())
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "smoothing window must be a positive odd integer, got {window}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{GroupLabel, Proficiency};
    use proptest::prelude::*;

    fn essay(id: &str, prof: Proficiency, s: &[f64]) -> EssayRecord {
        EssayRecord::from_values(id, GroupLabel::new("L", prof), s, s)
    }

    fn raw() -> ProfileOptions {
        ProfileOptions::default()
    }

    #[test]
    fn two_essay_means() {
        let rs = [
            essay("a", Proficiency::Low, &[1.0, 3.0]),
            essay("b", Proficiency::Low, &[3.0, 5.0]),
        ];
        let p = build_profile(&rs, Factor::Proficiency, "low", TokenMetric::Surprisal, raw()).unwrap();
        assert_eq!(p.means(), vec![2.0, 4.0]);
        assert_eq!(p.rows[0].n_essays, 2);
    }

    #[test]
    fn singleton_group_reproduces_the_essay() {
        let rs = [essay("a", Proficiency::High, &[0.5, 7.25, 3.0])];
        let p = build_profile(&rs, Factor::Proficiency, "high", TokenMetric::Entropy, raw()).unwrap();
        assert_eq!(p.means(), vec![0.5, 7.25, 3.0]);
        assert!(p.rows.iter().all(|r| r.std_dev == 0.0));
    }

    #[test]
    fn window_three_with_edge_truncation() {
        assert_eq!(moving_average(&[2.0, 4.0, 6.0], 3).unwrap(), vec![3.0, 4.0, 5.0]);
        assert!(moving_average(&[1.0], 2).is_err());
        assert!(moving_average(&[1.0], 0).is_err());
    }

    #[test]
    fn missing_group_is_an_error() {
        let rs = [essay("a", Proficiency::Low, &[1.0])];
        let err = build_profile(&rs, Factor::Proficiency, "native", TokenMetric::Surprisal, raw()).unwrap_err();
        assert!(err.to_string().contains("native"), "{err}");
    }

    #[test]
    fn ragged_lengths_average_over_available_essays() {
        let rs = [
            essay("a", Proficiency::Low, &[1.0, 1.0, 1.0]),
            essay("b", Proficiency::Low, &[3.0]),
        ];
        let p = build_profile(&rs, Factor::Proficiency, "low", TokenMetric::Surprisal, raw()).unwrap();
        assert_eq!(p.means(), vec![2.0, 1.0, 1.0]);
        let n: Vec<usize> = p.rows.iter().map(|r| r.n_essays).collect();
        assert_eq!(n, vec![2, 1, 1]);
    }

    #[test]
    fn truncates_at_max_tokens() {
        let long: Vec<f64> = (0..450).map(|i| i as f64).collect();
        let rs = [essay("a", Proficiency::Low, &long)];
        let p = build_profile(&rs, Factor::Proficiency, "low", TokenMetric::Surprisal, raw()).unwrap();
        assert_eq!(p.rows.len(), 300);
        assert_eq!(p.rows.last().unwrap().position, 299);
    }

    #[test]
    fn smoothing_keeps_linear_trends_in_the_interior() {
        let trend: Vec<f64> = (0..40).map(|i| 2.0 + 0.25 * i as f64).collect();
        let sm = moving_average(&trend, 7).unwrap();
        for i in 3..37 {
            assert!((sm[i] - trend[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn raw_profile_matches_brute_force(
            essays in prop::collection::vec(prop::collection::vec(0.0f64..15.0, 1..30), 1..12)
        ) {
            let rs: Vec<EssayRecord> = essays
                .iter()
                .enumerate()
                .map(|(i, s)| essay(&format!("e{i}"), Proficiency::Medium, s))
                .collect();
            let p = build_profile(&rs, Factor::Proficiency, "medium", TokenMetric::Surprisal, raw()).unwrap();
            let mut last_n = usize::MAX;
            for row in &p.rows {
                let vals: Vec<f64> = essays.iter().filter_map(|s| s.get(row.position).copied()).collect();
                let brute = vals.iter().sum::<f64>() / vals.len() as f64;
                prop_assert!((row.mean - brute).abs() < 1e-12);
                prop_assert_eq!(row.n_essays, vals.len());
                prop_assert!(row.n_essays <= last_n);
                last_n = row.n_essays;
            }
        }

        #[test]
        fn identical_essays_give_their_sequence(seq in prop::collection::vec(0.0f64..15.0, 1..30), copies in 1usize..6) {
            let rs: Vec<EssayRecord> = (0..copies).map(|i| essay(&format!("e{i}"), Proficiency::Low, &seq)).collect();
            let p = build_profile(&rs, Factor::Proficiency, "low", TokenMetric::Surprisal, raw()).unwrap();
            for (m, v) in p.means().iter().zip(&seq) {
                prop_assert!((m - v).abs() <= 1e-14 * v.abs().max(1.0));
            }
            prop_assert_eq!(p.rows.len(), seq.len());
        }

        #[test]
        fn smoothing_preserves_constants_and_range(values in prop::collection::vec(0.0f64..10.0, 1..50), half in 0usize..5) {
            let sm = moving_average(&values, 2 * half + 1).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(sm.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
            let c = vec![values[0]; values.len()];
            let smc = moving_average(&c, 2 * half + 1).unwrap();
            prop_assert!(smc.iter().all(|&v| (v - values[0]).abs() < 1e-9));
        }
    }
}
