//! Random-intercept linear mixed model fit by restricted maximum likelihood.
//!
//! Model: `y = Xβ + u[group] + ε`, `u ~ N(0, σ_u²)`, `ε ~ N(0, σ_e²)`.
//!
//! With `γ = σ_u² / σ_e²`, each group's covariance is `σ_e² (I + γ 11ᵀ)` and its
//! inverse is `(I − w 11ᵀ) / σ_e²` with `w = γ / (1 + nγ)`. Everything the REML
//! criterion needs therefore reduces to per-group sums:
//!
//! ```text
//! A(γ) = Σ XᵢᵀXᵢ − wᵢ sᵢsᵢᵀ        sᵢ = Xᵢᵀ1
//! b(γ) = Σ Xᵢᵀyᵢ − wᵢ sᵢtᵢ         tᵢ = 1ᵀyᵢ
//! r(γ) = Σ yᵢᵀyᵢ − wᵢ tᵢ² − bᵀA⁻¹b
//! ```
//!
//! `β̂ = A⁻¹b`, `σ̂_e² = r / (N − p)`, and the profiled restricted log-likelihood is
//!
//! ```text
//! ℓ(γ) = −½ [ (N−p)(1 + ln 2π + ln σ̂_e²) + Σ ln(1 + nᵢγ) + ln|A| ]
//! ```
//!
//! It is maximized over `γ ∈ [0, 1e8]` by bracketing the root of its analytic
//! derivative and refining with the Illinois variant of regula falsi.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EssayRecord, Proficiency};

use super::distributions::normal_two_sided_p;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MAX_ITERATIONS: usize = 200;
const OBJECTIVE_TOL: f64 = 1e-10;
const RATIO_TOL: f64 = 1e-10;
const MAX_RATIO: f64 = 1e8;

pub const INTERCEPT: &str = "(intercept)";

/// Response, named fixed-effect columns, and one grouping label per observation.
#[derive(Debug, Clone)]
pub struct LmmData {
    pub response: Vec<f64>,
    pub column_names: Vec<String>,
    /// Column-major fixed-effect design, one `Vec` per column.
    pub columns: Vec<Vec<f64>>,
    pub groups: Vec<String>,
}

impl LmmData {
    pub fn new(response: Vec<f64>, groups: Vec<String>) -> Self {
        Self {
            response,
            column_names: Vec::new(),
            columns: Vec::new(),
            groups,
        }
    }

    pub fn with_intercept(self) -> Self {
        let n = self.response.len();
        self.with_column(INTERCEPT, vec![1.0; n])
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.column_names.push(name.into());
        self.columns.push(values);
        self
    }

    pub fn n_obs(&self) -> usize {
        self.response.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffect {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub z: f64,
    /// Two-sided p-value from the normal approximation to `β / SE`.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub fixed_effects: Vec<FixedEffect>,
    pub random_intercept_variance: f64,
    pub residual_variance: f64,
    pub log_reml: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub n_groups: usize,
}

impl LmmFit {
    pub fn effect(&self, name: &str) -> Option<&FixedEffect> {
        self.fixed_effects.iter().find(|e| e.name == name)
    }

    pub fn betas(&self) -> Vec<f64> {
        self.fixed_effects.iter().map(|e| e.beta).collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        self.fixed_effects.iter().map(|e| e.se).collect()
    }
}

#[derive(Debug, Clone)]
struct GroupStats {
    n: f64,
    /// Column sums of the group's design rows.
    s: DVector<f64>,
    /// Sum of the group's responses.
    t: f64,
}

/// Sufficient statistics of a random-intercept REML problem.
#[derive(Debug, Clone)]
pub struct RemlProblem {
    names: Vec<String>,
    n_obs: usize,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    groups: Vec<GroupStats>,
}

struct Profile {
    objective: f64,
    derivative: f64,
    beta: DVector<f64>,
    a_inv: DMatrix<f64>,
    sigma2: f64,
}

impl RemlProblem {
    pub fn new(data: &LmmData) -> Result<Self> {
        let n = data.n_obs();
        let p = data.columns.len();
        if data.groups.len() != n || data.columns.iter().any(|c| c.len() != n) {
            return Err(Error::Config(
                "response, design columns and groups must have equal length".into(),
            ));
        }
        if p == 0 {
            return Err(Error::Config("design has no columns".into()));
        }
        if data.response.iter().chain(data.columns.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in mixed-model input".into()));
        }
        check_rank(&data.columns, &data.column_names)?;

        // Groups in sorted-label order so results do not depend on row order.
        let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, g) in data.groups.iter().enumerate() {
            members.entry(g.as_str()).or_default().push(i);
        }
        if members.len() < 2 {
            return Err(Error::TooFewGroups(members.len()));
        }
        if n <= p {
            return Err(Error::Config(format!("{n} observations cannot identify {p} fixed effects")));
        }

        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        let mut yty = 0.0;
        let mut groups = Vec::with_capacity(members.len());
        for rows in members.values() {
            let mut s = DVector::zeros(p);
            let mut t = 0.0;
            for &i in rows {
                let y = data.response[i];
                t += y;
                yty += y * y;
                for a in 0..p {
                    let xa = data.columns[a][i];
                    s[a] += xa;
                    xty[a] += xa * y;
                    for b in 0..=a {
                        xtx[(a, b)] += xa * data.columns[b][i];
                    }
                }
            }
            groups.push(GroupStats {
                n: rows.len() as f64,
                s,
                t,
            });
        }
        for a in 0..p {
            for b in 0..a {
                xtx[(b, a)] = xtx[(a, b)];
            }
        }

        Ok(Self {
            names: data.column_names.clone(),
            n_obs: n,
            xtx,
            xty,
            yty,
            groups,
        })
    }

    fn p(&self) -> usize {
        self.xty.len()
    }

    fn dof(&self) -> f64 {
        (self.n_obs - self.p()) as f64
    }

    /// `A(γ)`, `b(γ)`, `c(γ) = Σ yᵢᵀ(I − wᵢ11ᵀ)yᵢ`.
    fn weighted(&self, ratio: f64) -> (DMatrix<f64>, DVector<f64>, f64) {
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        let mut c = self.yty;
        for g in &self.groups {
            let w = ratio / (1.0 + g.n * ratio);
            if w == 0.0 {
                continue;
            }
            a.ger(-w, &g.s, &g.s, 1.0);
            b.axpy(-w * g.t, &g.s, 1.0);
            c -= w * g.t * g.t;
        }
        (a, b, c)
    }

    fn solve(&self, ratio: f64) -> Result<(Cholesky<f64, Dyn>, DVector<f64>, f64)> {
        let (a, b, c) = self.weighted(ratio);
        let chol = Cholesky::new(a).ok_or_else(|| Error::RankDeficient {
            columns: self.names.clone(),
        })?;
        let beta = chol.solve(&b);
        let rss = (c - b.dot(&beta)).max(f64::MIN_POSITIVE);
        Ok((chol, beta, rss))
    }

    fn ln_det_v(&self, ratio: f64) -> f64 {
        self.groups.iter().map(|g| (g.n * ratio).ln_1p()).sum()
    }

    /// `dr/dγ` and `tr(A⁻¹ dA/dγ)` at `β`.
    fn derivative_terms(&self, ratio: f64, beta: &DVector<f64>, a_inv: &DMatrix<f64>) -> (f64, f64, f64) {
        let mut d_rss = 0.0;
        let mut d_logdet_a = 0.0;
        let mut d_logdet_v = 0.0;
        for g in &self.groups {
            let one_plus = 1.0 + g.n * ratio;
            let dw = 1.0 / (one_plus * one_plus);
            let e = g.t - g.s.dot(beta);
            d_rss -= dw * e * e;
            d_logdet_a -= dw * (a_inv * &g.s).dot(&g.s);
            d_logdet_v += g.n / one_plus;
        }
        (d_rss, d_logdet_a, d_logdet_v)
    }

    fn profile(&self, ratio: f64) -> Result<Profile> {
        let (chol, beta, rss) = self.solve(ratio)?;
        let a_inv = chol.inverse();
        let ln_det_a = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let dof = self.dof();
        let sigma2 = rss / dof;
        let objective = -0.5 * (dof * (1.0 + LN_2PI + sigma2.ln()) + self.ln_det_v(ratio) + ln_det_a);
        let (d_rss, d_logdet_a, d_logdet_v) = self.derivative_terms(ratio, &beta, &a_inv);
        let derivative = -0.5 * (dof * d_rss / rss + d_logdet_v + d_logdet_a);
        Ok(Profile {
            objective,
            derivative,
            beta,
            a_inv,
            sigma2,
        })
    }

    /// Restricted log-likelihood with `σ_e²` profiled out, as a function of `γ = σ_u²/σ_e²`.
    pub fn profiled_log_reml(&self, ratio: f64) -> Result<f64> {
        Ok(self.profile(ratio)?.objective)
    }

    /// Analytic `dℓ/dγ` of [`Self::profiled_log_reml`].
    pub fn profiled_derivative(&self, ratio: f64) -> Result<f64> {
        Ok(self.profile(ratio)?.derivative)
    }

    /// Full restricted log-likelihood at variance components `(σ_u², σ_e²)`.
    pub fn log_reml(&self, sigma_u2: f64, sigma_e2: f64) -> Result<f64> {
        let ratio = sigma_u2 / sigma_e2;
        let (chol, _, rss) = self.solve(ratio)?;
        let ln_det_a = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let dof = self.dof();
        Ok(-0.5 * (dof * (LN_2PI + sigma_e2.ln()) + self.ln_det_v(ratio) + ln_det_a + rss / sigma_e2))
    }

    /// Analytic gradient of [`Self::log_reml`] with respect to `(σ_u², σ_e²)`.
    pub fn log_reml_gradient(&self, sigma_u2: f64, sigma_e2: f64) -> Result<[f64; 2]> {
        let ratio = sigma_u2 / sigma_e2;
        let (chol, beta, rss) = self.solve(ratio)?;
        let a_inv = chol.inverse();
        let (d_rss, d_logdet_a, d_logdet_v) = self.derivative_terms(ratio, &beta, &a_inv);
        let d_ratio = -0.5 * (d_logdet_v + d_logdet_a + d_rss / sigma_e2);
        let d_sigma_e_fixed_ratio = -0.5 * (self.dof() / sigma_e2 - rss / (sigma_e2 * sigma_e2));
        Ok([
            d_ratio / sigma_e2,
            d_sigma_e_fixed_ratio - d_ratio * ratio / sigma_e2,
        ])
    }

    fn finish(&self, ratio: f64, profile: Profile, converged: bool, iterations: usize) -> LmmFit {
        let fixed_effects = self
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let beta = profile.beta[j];
                let se = (profile.sigma2 * profile.a_inv[(j, j)]).max(0.0).sqrt();
                let z = beta / se;
                FixedEffect {
                    name: name.clone(),
                    beta,
                    se,
                    z,
                    p_value: normal_two_sided_p(z),
                }
            })
            .collect();
        LmmFit {
            fixed_effects,
            random_intercept_variance: ratio * profile.sigma2,
            residual_variance: profile.sigma2,
            log_reml: profile.objective,
            converged,
            iterations,
            n_obs: self.n_obs,
            n_groups: self.groups.len(),
        }
    }

    /// Maximizes the profiled criterion over the variance ratio.
    pub fn fit(&self) -> Result<LmmFit> {
        let at_zero = self.profile(0.0)?;
        if at_zero.derivative <= 0.0 {
            return Ok(self.finish(0.0, at_zero, true, 1));
        }

        let mut iterations = 1;
        let mut lo = (0.0, at_zero.derivative);
        let mut hi_ratio = 1.0;
        let mut best = (0.0, at_zero);
        let hi = loop {
            let pr = self.profile(hi_ratio)?;
            iterations += 1;
            let d = pr.derivative;
            if pr.objective > best.1.objective {
                best = (hi_ratio, pr);
            }
            if d <= 0.0 {
                break (hi_ratio, d);
            }
            lo = (hi_ratio, d);
            if hi_ratio >= MAX_RATIO || iterations >= MAX_ITERATIONS {
                let (ratio, pr) = best;
                return Err(Error::NonConvergence {
                    best: Box::new(self.finish(ratio, pr, false, iterations)),
                });
            }
            hi_ratio = (hi_ratio * 4.0).min(MAX_RATIO);
        };
        let mut hi = hi;
        if hi.1 == 0.0 {
            let pr = self.profile(hi.0)?;
            return Ok(self.finish(hi.0, pr, true, iterations));
        }

        // Illinois regula falsi on the derivative.
        let mut last_objective = best.1.objective;
        let mut last_ratio = best.0;
        let mut side = 0i8;
        while iterations < MAX_ITERATIONS {
            let x = (lo.0 * hi.1 - hi.0 * lo.1) / (hi.1 - lo.1);
            let x = if x > lo.0 && x < hi.0 { x } else { 0.5 * (lo.0 + hi.0) };
            let pr = self.profile(x)?;
            iterations += 1;
            let d = pr.derivative;
            let objective = pr.objective;
            let done = (objective - last_objective).abs() < OBJECTIVE_TOL
                && (x - last_ratio).abs() <= RATIO_TOL * (1.0 + x);
            if d == 0.0 || done || hi.0 - lo.0 <= RATIO_TOL * (1.0 + x) {
                return Ok(self.finish(x, pr, true, iterations));
            }
            if d > 0.0 {
                lo = (x, d);
                if side == 1 {
                    hi.1 *= 0.5;
                }
                side = 1;
            } else {
                hi = (x, d);
                if side == -1 {
                    lo.1 *= 0.5;
                }
                side = -1;
            }
            last_objective = objective;
            last_ratio = x;
            if objective > best.1.objective {
                best = (x, pr);
            }
        }
        let (ratio, pr) = best;
        Err(Error::NonConvergence {
            best: Box::new(self.finish(ratio, pr, false, iterations)),
        })
    }
}

/// Sequential Gram–Schmidt; names every column that is (numerically) a linear
/// combination of the columns before it.
fn check_rank(columns: &[Vec<f64>], names: &[String]) -> Result<()> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut collinear = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let rest = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || rest <= 1e-10 * norm {
            collinear.push(names.get(j).cloned().unwrap_or_else(|| format!("column {j}")));
        } else {
            basis.push(v.into_iter().map(|x| x / rest).collect());
        }
    }
    if collinear.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient { columns: collinear })
    }
}

/// Fits the random-intercept model by REML.
pub fn fit_lmm(data: &LmmData) -> Result<LmmFit> {
    RemlProblem::new(data)?.fit()
}

/// Token-level design with an intercept, raw 0-based position, and one dummy per
/// non-native proficiency level present (native speakers are the reference).
/// Each essay is its own random-intercept group.
pub fn proficiency_design<F>(records: &[EssayRecord], response: F) -> Result<LmmData>
where
    F: Fn(&crate::types::TokenScore) -> f64,
{
    if !records.iter().any(|r| r.label.is_native()) {
        return Err(Error::Config(
            "mixed model needs native essays as the reference level".into(),
        ));
    }
    let levels: Vec<Proficiency> = [Proficiency::Low, Proficiency::Medium, Proficiency::High]
        .into_iter()
        .filter(|p| records.iter().any(|r| r.label.proficiency == *p))
        .collect();

    let mut y = Vec::new();
    let mut groups = Vec::new();
    let mut position = Vec::new();
    let mut dummies = vec![Vec::new(); levels.len()];
    for r in records {
        for t in &r.scores {
            y.push(response(t));
            groups.push(r.essay_id.clone());
            position.push(t.position as f64);
            for (d, level) in dummies.iter_mut().zip(&levels) {
                d.push(if r.label.proficiency == *level { 1.0 } else { 0.0 });
            }
        }
    }
    let mut data = LmmData::new(y, groups).with_intercept().with_column("position", position);
    for (level, d) in levels.iter().zip(dummies) {
        data = data.with_column(level.as_str(), d);
    }
    Ok(data)
}
