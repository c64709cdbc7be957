//! Group summaries for plotting and the tabular/JSON analysis outputs.
//!
//! Quartiles use the median-of-halves rule: the sorted sample is split at the
//! median (excluding it when `n` is odd) and each half's median is a hinge, so
//! `[1, 2, 3, 4, 5]` gives `q1 = 1.5`, `q3 = 4.5`. The native reference band uses
//! linearly interpolated percentiles, `x[⌊h⌋] + (h − ⌊h⌋)(x[⌊h⌋+1] − x[⌊h⌋])` with
//! `h = (n − 1)p`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::profile::PositionProfile;
use crate::stats::{AnovaResult, LmmFit, PosthocTable};
use crate::types::{EssayMeasure, EssayMetrics, Factor};

/// Below this many native essays the reference band carries a warning.
pub const MIN_REFERENCE_ESSAYS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub group: String,
    pub measure: EssayMeasure,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBand {
    pub measure: EssayMeasure,
    pub mean: f64,
    /// 2.5th percentile.
    pub lower: f64,
    /// 97.5th percentile.
    pub upper: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Five-number summary plus mean of one sample.
pub fn summarize(group: &str, measure: EssayMeasure, values: &[f64]) -> Result<BoxplotSummary> {
    if values.is_empty() {
        return Err(Error::EmptyGroup(group.to_string()));
    }
    let v = sorted(values);
    let n = v.len();
    let (q1, q3) = if n == 1 {
        (v[0], v[0])
    } else {
        let half = n / 2;
        (median_sorted(&v[..half]), median_sorted(&v[n - half..]))
    };
    Ok(BoxplotSummary {
        group: group.to_string(),
        measure,
        min: v[0],
        q1,
        median: median_sorted(&v),
        q3,
        max: v[n - 1],
        mean: numeric::mean(&v),
        n,
    })
}

/// One summary per level of `factor`, in sorted level order.
pub fn boxplot_summary(
    metrics: &[EssayMetrics],
    factor: Factor,
    measure: EssayMeasure,
) -> Result<Vec<BoxplotSummary>> {
    if metrics.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in metrics {
        groups.entry(factor.level(&m.label)).or_default().push(measure.of(m));
    }
    groups
        .iter()
        .map(|(g, v)| summarize(g, measure, v))
        .collect()
}

/// Linearly interpolated percentile of a sorted sample, `p ∈ [0, 1]`.
pub fn percentile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Mean and central 95% interval of the native essays' values of `measure`.
/// Non-native entries in `metrics` are ignored. When a few extreme values drag
/// the mean outside the percentile interval, the interval is widened to reach it.
pub fn native_reference_band(metrics: &[EssayMetrics], measure: EssayMeasure) -> Result<ReferenceBand> {
    let values: Vec<f64> = metrics
        .iter()
        .filter(|m| m.label.is_native())
        .map(|m| measure.of(m))
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyGroup("proficiency=native".into()));
    }
    let v = sorted(&values);
    let n = v.len();
    let mean = numeric::mean(&v);
    let lower = percentile_sorted(&v, 0.025).min(mean);
    let upper = percentile_sorted(&v, 0.975).max(mean);
    let warning = (n < MIN_REFERENCE_ESSAYS).then(|| {
        format!("only {n} native essays; a 95% band needs at least {MIN_REFERENCE_ESSAYS} to be meaningful")
    });
    Ok(ReferenceBand {
        measure,
        mean,
        lower,
        upper,
        n,
        warning,
    })
}

/// One ANOVA table row: an essay-level measure compared across groups within a stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaEntry {
    pub measure: EssayMeasure,
    pub stratum: String,
    pub result: AnovaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocEntry {
    pub measure: EssayMeasure,
    pub stratum: String,
    pub table: PosthocTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmEntry {
    /// Token-level response: `surprisal` or `entropy`.
    pub response: String,
    pub fit: LmmFit,
}

/// Everything one analysis run produced, plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle<C> {
    pub config: C,
    pub units: BTreeMap<String, String>,
    pub n_essays: usize,
    pub essay_metrics: Vec<EssayMetrics>,
    pub profiles: Vec<PositionProfile>,
    pub anova: Vec<AnovaEntry>,
    pub posthoc: Vec<PosthocEntry>,
    pub lmm: Vec<LmmEntry>,
    pub boxplots: Vec<BoxplotSummary>,
    pub reference_bands: Vec<ReferenceBand>,
    pub notes: Vec<String>,
    pub files: Vec<String>,
}

/// Shortest round-trip decimal, switching to exponent notation for very large
/// or small magnitudes.
fn num(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(to_err)?;
    fill(&mut w).map_err(to_err)?;
    w.into_inner().map_err(|e| Error::Config(format!("csv encoding failed: {e}")))
}

/// `group,metric,position,n,mean,sd`
pub fn profiles_csv(profiles: &[PositionProfile]) -> Result<Vec<u8>> {
    csv_bytes(&["group", "metric", "position", "n", "mean", "sd"], |w| {
        for p in profiles {
            for r in &p.rows {
                w.write_record([
                    p.group.clone(),
                    p.metric.as_str().to_string(),
                    r.position.to_string(),
                    r.n_essays.to_string(),
                    num(r.mean),
                    num(r.std_dev),
                ])?;
            }
        }
        Ok(())
    })
}

/// `response,term,beta,se,z,p` with variance components as extra rows.
pub fn lmm_csv(fits: &[LmmEntry]) -> Result<Vec<u8>> {
    csv_bytes(&["response", "term", "beta", "se", "z", "p"], |w| {
        for e in fits {
            for f in &e.fit.fixed_effects {
                w.write_record([
                    e.response.clone(),
                    f.name.clone(),
                    num(f.beta),
                    num(f.se),
                    num(f.z),
                    num(f.p_value),
                ])?;
            }
            for (term, v) in [
                ("var(essay intercept)", e.fit.random_intercept_variance),
                ("var(residual)", e.fit.residual_variance),
            ] {
                w.write_record([e.response.as_str(), term, &num(v), "", "", ""])?;
            }
        }
        Ok(())
    })
}

/// `metric,stratum,F,df_between,df_within,p,eta_squared`
pub fn anova_csv(entries: &[AnovaEntry]) -> Result<Vec<u8>> {
    csv_bytes(
        &["metric", "stratum", "F", "df_between", "df_within", "p", "eta_squared"],
        |w| {
            for e in entries {
                let r = &e.result;
                w.write_record([
                    e.measure.as_str().to_string(),
                    e.stratum.clone(),
                    num(r.f_value),
                    r.df_between.to_string(),
                    r.df_within.to_string(),
                    num(r.p_value),
                    num(r.eta_squared),
                ])?;
            }
            Ok(())
        },
    )
}

/// `metric,stratum,row,col,diff,p_adj,significant`, each unordered pair once.
pub fn posthoc_csv(entries: &[PosthocEntry]) -> Result<Vec<u8>> {
    csv_bytes(
        &["metric", "stratum", "row", "col", "diff", "p_adj", "significant"],
        |w| {
            for e in entries {
                for p in e.table.pairs() {
                    w.write_record([
                        e.measure.as_str().to_string(),
                        e.stratum.clone(),
                        p.row,
                        p.col,
                        num(p.diff),
                        num(p.p_adj),
                        p.significant.to_string(),
                    ])?;
                }
            }
            Ok(())
        },
    )
}

/// `group,metric,unit,n,min,q1,median,q3,max,mean`; native reference bands follow
/// as rows whose group is `native_reference` with `q1`/`q3` columns holding the
/// 2.5/97.5 percentiles.
pub fn boxplot_csv(summaries: &[BoxplotSummary], bands: &[ReferenceBand]) -> Result<Vec<u8>> {
    csv_bytes(
        &["group", "metric", "unit", "n", "min", "q1", "median", "q3", "max", "mean"],
        |w| {
            for s in summaries {
                w.write_record([
                    s.group.clone(),
                    s.measure.as_str().to_string(),
                    s.measure.unit().to_string(),
                    s.n.to_string(),
                    num(s.min),
                    num(s.q1),
                    num(s.median),
                    num(s.q3),
                    num(s.max),
                    num(s.mean),
                ])?;
            }
            for b in bands {
                w.write_record([
                    "native_reference".to_string(),
                    b.measure.as_str().to_string(),
                    b.measure.unit().to_string(),
                    b.n.to_string(),
                    String::new(),
                    num(b.lower),
                    String::new(),
                    num(b.upper),
                    String::new(),
                    num(b.mean),
                ])?;
            }
            Ok(())
        },
    )
}
