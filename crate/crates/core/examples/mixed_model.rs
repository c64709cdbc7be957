//! Random-intercept mixed model on token surprisal: proficiency dummies against
//! the native reference, a position slope and a per-essay intercept.
//!
//! `cargo run -p infodens --example mixed_model`

use infodens::ingestion::truncate_for_position_analysis;
use infodens::stats::{fit_lmm, proficiency_design};
use infodens::synth::{synth_scores, ScoreSynthConfig};

fn main() -> infodens::Result<()> {
    let (records, truth) = synth_scores(&ScoreSynthConfig::default())?;
    let records: Vec<_> = records
        .iter()
        .map(|r| truncate_for_position_analysis(r, 300))
        .collect();

    let data = proficiency_design(&records, |t| t.surprisal_bits)?;
    let fit = fit_lmm(&data)?;
    println!(
        "{} tokens in {} essays, converged {} after {} iterations",
        fit.n_obs, fit.n_groups, fit.converged, fit.iterations
    );
    println!("{:<14} {:>9} {:>9} {:>9} {:>10}", "term", "beta", "se", "z", "p");
    for e in &fit.fixed_effects {
        println!("{:<14} {:>9.4} {:>9.4} {:>9.2} {:>10.2e}", e.name, e.beta, e.se, e.z, e.p_value);
    }
    println!("essay intercept variance {:.4}", fit.random_intercept_variance);
    println!("residual variance        {:.4}", fit.residual_variance);
    println!("true contrasts vs native {:?}", truth.surprisal_contrasts);
    Ok(())
}
