//! Surprisal, entropy and UID for hand-built inputs.
//!
//! `cargo run -p infodens --example metrics`

use infodens::metrics::{entropy_bits, essay_metrics, surprisal_bits, uid_score};
use infodens::{EssayRecord, GroupLabel, Proficiency};

fn main() -> infodens::Result<()> {
    println!("surprisal(0.25)        = {} bits", surprisal_bits(0.25)?);
    println!("entropy(uniform of 4)  = {} bits", entropy_bits(&[0.25; 4])?);
    println!("entropy([1, 0, 0])     = {} bits", entropy_bits(&[1.0, 0.0, 0.0])?);
    println!("uid([1, 2, 3, 4])      = {}", uid_score(&[1.0, 2.0, 3.0, 4.0])?);

    match surprisal_bits(0.0) {
        Ok(_) => unreachable!(),
        Err(e) => println!("surprisal(0) rejected: {e}"),
    }
    match entropy_bits(&[0.5, 0.4]) {
        Ok(_) => unreachable!(),
        Err(e) => println!("unnormalized distribution rejected: {e}"),
    }

    let record = EssayRecord::from_values(
        "demo",
        GroupLabel::new("DEU", Proficiency::Medium),
        &[2.0, 4.0, 6.0, 8.0],
        &[5.0, 5.5, 6.0, 6.5],
    );
    let m = essay_metrics(&record)?;
    println!(
        "essay {}: mean surprisal {} bits, mean entropy {} bits, UID {} over {} tokens",
        m.essay_id, m.mean_surprisal_bits, m.mean_entropy_bits, m.uid_score, m.token_count
    );
    Ok(())
}
