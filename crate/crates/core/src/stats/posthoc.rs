//! Tukey HSD pairwise comparisons (Tukey–Kramer for unequal group sizes).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::anova::{decompose, GroupedValues};
use super::distributions::studentized_range_sf;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub row: String,
    pub col: String,
    /// `mean(row) − mean(col)`.
    pub diff: f64,
    pub q: f64,
    pub p_adj: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocTable {
    pub levels: Vec<String>,
    pub means: Vec<f64>,
    /// `mean_diff[i][j] = mean(levels[i]) − mean(levels[j])`; diagonal is 0.
    pub mean_diff: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// Family-wise adjusted p-values; diagonal is 1.
    pub p_adj: Vec<Vec<f64>>,
    pub significant: Vec<Vec<bool>>,
    pub alpha: f64,
    pub ms_within: f64,
    pub df_within: usize,
}

impl PosthocTable {
    /// Every unordered pair once, row index below column index.
    pub fn pairs(&self) -> Vec<PairwiseComparison> {
        let k = self.levels.len();
        let mut out = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(self.pair(i, j));
            }
        }
        out
    }

    pub fn pair(&self, i: usize, j: usize) -> PairwiseComparison {
        PairwiseComparison {
            row: self.levels[i].clone(),
            col: self.levels[j].clone(),
            diff: self.mean_diff[i][j],
            q: self.q[i][j],
            p_adj: self.p_adj[i][j],
            significant: self.significant[i][j],
        }
    }

    pub fn index_of(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    pub fn significant_pairs(&self) -> Vec<(String, String)> {
        self.pairs()
            .into_iter()
            .filter(|p| p.significant)
            .map(|p| (p.row, p.col))
            .collect()
    }
}

/// All pairwise mean differences with studentized-range adjusted p-values using
/// the pooled within-group variance.
pub fn posthoc_pairwise(groups: &GroupedValues, alpha: f64) -> Result<PosthocTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let d = decompose(groups)?;
    if d.ss_within == 0.0 && d.ss_between == 0.0 {
        return Err(Error::DegenerateData);
    }
    let k = d.levels.len();
    let df_within = d.n_total - k;
    let ms_within = d.ss_within / df_within as f64;

    let mut mean_diff = vec![vec![0.0; k]; k];
    let mut q = vec![vec![0.0; k]; k];
    let mut p_adj = vec![vec![1.0; k]; k];
    let mut significant = vec![vec![false; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let diff = d.means[i] - d.means[j];
            let se = (0.5 * ms_within * (1.0 / d.sizes[i] as f64 + 1.0 / d.sizes[j] as f64)).sqrt();
            let qij = if diff == 0.0 { 0.0 } else { diff.abs() / se };
            let p = studentized_range_sf(qij, k, df_within as f64);
            mean_diff[i][j] = diff;
            mean_diff[j][i] = -diff;
            q[i][j] = qij;
            q[j][i] = qij;
            p_adj[i][j] = p;
            p_adj[j][i] = p;
            significant[i][j] = p < alpha;
            significant[j][i] = p < alpha;
        }
    }

    Ok(PosthocTable {
        levels: d.levels,
        means: d.means,
        mean_diff,
        q,
        p_adj,
        significant,
        alpha,
        ms_within,
        df_within,
    })
}
