//! One-way analysis of variance and eta squared.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, KahanSum};

use super::distributions::f_sf;

/// Observations keyed by group level.
pub type GroupedValues = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_value: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
    /// `SS_between / SS_total`.
    pub eta_squared: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub n_groups: usize,
    pub n_total: usize,
}

impl AnovaResult {
    pub fn ms_within(&self) -> f64 {
        self.ss_within / self.df_within as f64
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Decomposition {
    pub levels: Vec<String>,
    pub means: Vec<f64>,
    pub sizes: Vec<usize>,
    pub ss_between: f64,
    pub ss_within: f64,
    pub n_total: usize,
}

pub(crate) fn decompose(groups: &GroupedValues) -> Result<Decomposition> {
    if groups.len() < 2 {
        return Err(Error::TooFewGroups(groups.len()));
    }
    if let Some((g, v)) = groups.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::SmallGroup {
            group: g.clone(),
            count: v.len(),
        });
    }
    if let Some(g) = groups.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::Domain(format!("group {:?} contains a non-finite value", g.0)));
    }

    let levels: Vec<String> = groups.keys().cloned().collect();
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let means: Vec<f64> = groups.values().map(|v| numeric::mean(v)).collect();
    let n_total: usize = sizes.iter().sum();

    let all_equal = means.iter().all(|m| m.to_bits() == means[0].to_bits());
    let grand = if all_equal {
        means[0]
    } else {
        means
            .iter()
            .zip(&sizes)
            .map(|(m, &n)| m * n as f64)
            .collect::<KahanSum>()
            .total()
            / n_total as f64
    };
    let ss_between = means
        .iter()
        .zip(&sizes)
        .map(|(m, &n)| n as f64 * (m - grand) * (m - grand))
        .collect::<KahanSum>()
        .total();
    let ss_within = groups
        .values()
        .map(|v| numeric::sum_sq_dev(v))
        .collect::<KahanSum>()
        .total();

    Ok(Decomposition {
        levels,
        means,
        sizes,
        ss_between,
        ss_within,
        n_total,
    })
}

/// Classic between/within decomposition with an F-test.
///
/// Needs at least two groups of at least two observations each. Data with no
/// variance at all is rejected as degenerate; zero within-group variance with
/// distinct group means yields `F = ∞` and `p = 0`.
pub fn one_way_anova(groups: &GroupedValues) -> Result<AnovaResult> {
    let d = decompose(groups)?;
    if d.ss_within == 0.0 && d.ss_between == 0.0 {
        return Err(Error::DegenerateData);
    }
    let k = d.levels.len();
    let df_between = k - 1;
    let df_within = d.n_total - k;
    let f_value = if d.ss_within == 0.0 {
        f64::INFINITY
    } else {
        (d.ss_between / df_between as f64) / (d.ss_within / df_within as f64)
    };
    Ok(AnovaResult {
        f_value,
        df_between,
        df_within,
        p_value: f_sf(f_value, df_between as f64, df_within as f64),
        eta_squared: d.ss_between / (d.ss_between + d.ss_within),
        ss_between: d.ss_between,
        ss_within: d.ss_within,
        n_groups: k,
        n_total: d.n_total,
    })
}

/// Share of total variance explained by group membership.
pub fn eta_squared(groups: &GroupedValues) -> Result<f64> {
    let d = decompose(groups)?;
    let total = d.ss_between + d.ss_within;
    if total == 0.0 {
        return Err(Error::DegenerateData);
    }
    Ok(d.ss_between / total)
}
