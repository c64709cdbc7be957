//! Group comparisons: one-way ANOVA, Tukey HSD, and a random-intercept mixed model.

pub mod anova;
pub mod distributions;
pub mod lmm;
pub mod posthoc;
pub mod quadrature;

pub use anova::{eta_squared, one_way_anova, AnovaResult, GroupedValues};
pub use lmm::{fit_lmm, proficiency_design, FixedEffect, LmmData, LmmFit, RemlProblem};
pub use posthoc::{posthoc_pairwise, PairwiseComparison, PosthocTable, DEFAULT_ALPHA};
