//! One-way ANOVA with eta squared and Tukey-Kramer pairwise comparisons on
//! essay-level mean surprisal grouped by L1.
//!
//! `cargo run -p infodens --example anova_posthoc`

use infodens::metrics::essay_metrics;
use infodens::stats::{one_way_anova, posthoc_pairwise, GroupedValues, DEFAULT_ALPHA};
use infodens::synth::{synth_scores, ScoreSynthConfig};
use infodens::Factor;

fn main() -> infodens::Result<()> {
    let cfg = ScoreSynthConfig {
        l1_sd: 0.6,
        ..Default::default()
    };
    let (records, truth) = synth_scores(&cfg)?;
    println!("true L1 shifts: {:?}", truth.l1_shifts);

    let mut groups = GroupedValues::new();
    for r in records.iter().filter(|r| !r.label.is_native()) {
        let m = essay_metrics(r)?;
        groups.entry(Factor::L1.level(&r.label)).or_default().push(m.mean_surprisal_bits);
    }

    let a = one_way_anova(&groups)?;
    println!(
        "F({}, {}) = {:.3}, p = {:.3e}, eta^2 = {:.3}",
        a.df_between, a.df_within, a.f_value, a.p_value, a.eta_squared
    );

    let table = posthoc_pairwise(&groups, DEFAULT_ALPHA)?;
    for c in table.pairs() {
        println!(
            "  {} - {}: diff {:+.3}, q {:.3}, p_adj {:.3e}{}",
            c.row,
            c.col,
            c.diff,
            c.q,
            c.p_adj,
            if c.significant { "  *" } else { "" }
        );
    }
    Ok(())
}
