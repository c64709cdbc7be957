//! Token-level information measures and their essay-level aggregates.
//!
//! * surprisal: `-log2 p(w | context)`
//! * next-token entropy: `-Σ p log2 p` over the full vocabulary
//! * UID score: population variance of an essay's token surprisals

use crate::error::{Error, Result};
use crate::numeric::{self, KahanSum};
use crate::types::{EssayMetrics, EssayRecord};

/// Tolerance on `Σ p = 1` accepted by [`entropy_bits`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Surprisal in bits of an event with probability `p`.
pub fn surprisal_bits(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!(
            "probability must lie in (0, 1], got {p}"
        )));
    }
    // -log2(1) is -0.0
    Ok((-p.log2()).max(0.0))
}

/// Shannon entropy in bits; `0 · log 0` counts as 0.
pub fn entropy_bits(dist: &[f64]) -> Result<f64> {
    if let Some(bad) = dist.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::Domain(format!(
            "distribution entries must be finite and non-negative, found {bad}"
        )));
    }
    let total = numeric::sum(dist.iter().copied());
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Domain(format!(
            "distribution is not normalized: sums to {total}"
        )));
    }
    Ok(entropy_terms(dist))
}

/// `-Σ p log2 p` without the normalization check.
pub(crate) fn entropy_terms(dist: &[f64]) -> f64 {
    let h = dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .collect::<KahanSum>()
        .total();
    h.max(0.0)
}

/// Population variance of the surprisal sequence, in bits².
pub fn uid_score(surprisals: &[f64]) -> Result<f64> {
    if surprisals.is_empty() {
        return Err(Error::Domain("UID score of an empty sequence".into()));
    }
    Ok(numeric::sum_sq_dev(surprisals) / surprisals.len() as f64)
}

/// Means and UID over every token of the essay (no truncation).
pub fn essay_metrics(record: &EssayRecord) -> Result<EssayMetrics> {
    let surprisals: Vec<f64> = record.surprisals().collect();
    let uid = uid_score(&surprisals)
        .map_err(|_| Error::invalid(&record.essay_id, "empty score sequence"))?;
    let entropies: Vec<f64> = record.entropies().collect();
    Ok(EssayMetrics {
        essay_id: record.essay_id.clone(),
        label: record.label.clone(),
        mean_surprisal_bits: numeric::mean(&surprisals),
        mean_entropy_bits: numeric::mean(&entropies),
        uid_score: uid,
        token_count: record.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{GroupLabel, Proficiency};
    use proptest::prelude::*;

    fn brute_variance(ys: &[f64]) -> f64 {
        let n = ys.len() as f64;
        let mut mean = 0.0;
        for y in ys {
            mean += y;
        }
        mean /= n;
        let mut acc = 0.0;
        for y in ys {
            acc += (y - mean) * (y - mean);
        }
        acc / n
    }

    #[test]
    fn surprisal_examples() {
        assert_eq!(surprisal_bits(1.0).unwrap(), 0.0);
        assert_eq!(surprisal_bits(0.5).unwrap(), 1.0);
        assert_eq!(surprisal_bits(0.125).unwrap(), 3.0);
    }

    #[test]
    fn surprisal_rejects_out_of_domain() {
        for p in [0.0, -0.1, 1.0000001, f64::NAN] {
            assert!(matches!(surprisal_bits(p), Err(Error::Domain(_))), "{p}");
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_bits(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(entropy_bits(&[0.25; 4]).unwrap(), 2.0);
        // 0.5·1 + 0.25·2 + 2·0.125·3
        assert!((entropy_bits(&[0.5, 0.25, 0.125, 0.125]).unwrap() - 1.75).abs() < 1e-15);
    }

    #[test]
    fn entropy_reports_the_sum_of_unnormalized_input() {
        let err = entropy_bits(&[0.5, 0.6]).unwrap_err().to_string();
        assert!(err.contains("1.1"), "{err}");
    }

    #[test]
    fn uid_examples() {
        assert_eq!(uid_score(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(uid_score(&[1.0, 3.0]).unwrap(), 1.0);
        assert!(uid_score(&[]).is_err());
    }

    #[test]
    fn uid_matches_direct_summation_on_random_list() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let ys: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..20.0)).collect();
        assert!((uid_score(&ys).unwrap() - brute_variance(&ys)).abs() < 1e-12);
    }

    #[test]
    fn essay_metrics_hand_example() {
        let r = EssayRecord::from_values(
            "e",
            GroupLabel::new("X", Proficiency::Low),
            &[1.0, 2.0, 3.0],
            &[4.0, 4.0, 4.0],
        );
        let m = essay_metrics(&r).unwrap();
        assert_eq!(m.mean_surprisal_bits, 2.0);
        assert_eq!(m.mean_entropy_bits, 4.0);
        assert!((m.uid_score - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.token_count, 3);
    }

    #[test]
    fn singleton_essay_has_zero_uid() {
        let r = EssayRecord::from_values("e", GroupLabel::new("X", Proficiency::Low), &[5.5], &[1.0]);
        assert_eq!(essay_metrics(&r).unwrap().uid_score, 0.0);
    }

    #[test]
    fn empty_essay_is_an_error() {
        let r = EssayRecord::new("e9", GroupLabel::new("X", Proficiency::Low), vec![]);
        let err = essay_metrics(&r).unwrap_err();
        assert!(err.to_string().contains("e9"));
    }

    proptest! {
        #[test]
        fn uid_is_shift_invariant(ys in prop::collection::vec(0.0f64..30.0, 1..200), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
            let a = uid_score(&ys).unwrap();
            let b = uid_score(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn uid_scales_quadratically(ys in prop::collection::vec(0.0f64..30.0, 1..200), a in -5.0f64..5.0) {
            let scaled: Vec<f64> = ys.iter().map(|y| y * a).collect();
            let u = uid_score(&ys).unwrap();
            let v = uid_score(&scaled).unwrap();
            prop_assert!((v - u * a * a).abs() <= 1e-9 * (1.0 + v.abs()));
        }

        #[test]
        fn uid_is_zero_only_for_constant_lists(ys in prop::collection::vec(0.0f64..30.0, 1..50)) {
            let all_equal = ys.iter().all(|&y| y == ys[0]);
            prop_assert_eq!(uid_score(&ys).unwrap() == 0.0, all_equal);
        }

        #[test]
        fn entropy_never_exceeds_uniform(weights in prop::collection::vec(0.0f64..1.0, 1..64)) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-6);
            let dist: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let h = entropy_bits(&dist).unwrap();
            let uniform = vec![1.0 / dist.len() as f64; dist.len()];
            prop_assert!(h >= 0.0);
            prop_assert!(h <= entropy_bits(&uniform).unwrap() + 1e-12);
        }

        #[test]
        fn essay_metrics_match_brute_force(values in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 1..300)) {
            let (s, h): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
            let r = EssayRecord::from_values("e", GroupLabel::new("X", Proficiency::High), &s, &h);
            let m = essay_metrics(&r).unwrap();
            let n = s.len() as f64;
            prop_assert!((m.mean_surprisal_bits - s.iter().sum::<f64>() / n).abs() < 1e-12);
            prop_assert!((m.mean_entropy_bits - h.iter().sum::<f64>() / n).abs() < 1e-12);
            prop_assert!((m.uid_score - brute_variance(&s)).abs() < 1e-9);
        }

        #[test]
        fn essay_metrics_ignore_token_order(values in prop::collection::vec(0.0f64..20.0, 2..100), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = values.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let label = GroupLabel::new("X", Proficiency::High);
            let a = essay_metrics(&EssayRecord::from_values("e", label.clone(), &values, &values)).unwrap();
            let b = essay_metrics(&EssayRecord::from_values("e", label, &shuffled, &shuffled)).unwrap();
            prop_assert!((a.mean_surprisal_bits - b.mean_surprisal_bits).abs() < 1e-12);
            prop_assert!((a.uid_score - b.uid_score).abs() < 1e-9);
        }
    }
}
