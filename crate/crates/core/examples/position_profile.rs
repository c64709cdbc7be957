//! Mean surprisal by token position for each proficiency level, raw and smoothed.
//!
//! `cargo run -p infodens --example position_profile`

use infodens::profile::{build_profiles, ProfileOptions, TokenMetric};
use infodens::synth::{synth_scores, ScoreSynthConfig};
use infodens::Factor;

fn main() -> infodens::Result<()> {
    let (records, _) = synth_scores(&ScoreSynthConfig::default())?;
    for window in [1, 9] {
        let opts = ProfileOptions { max_tokens: 40, window };
        let profiles = build_profiles(&records, Factor::Proficiency, TokenMetric::Surprisal, opts)?;
        println!("window {window}");
        for p in &profiles {
            let means = p.means();
            let shown: Vec<String> = means.iter().step_by(8).map(|m| format!("{m:.2}")).collect();
            println!(
                "  {:<7} first {} positions, every 8th: {}",
                p.group,
                p.rows.len(),
                shown.join(" ")
            );
        }
    }
    Ok(())
}
