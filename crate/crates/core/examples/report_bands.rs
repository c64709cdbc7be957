//! Boxplot summaries per proficiency level with the native reference band,
//! written as the CSV the pipeline produces.
//!
//! `cargo run -p infodens --example report_bands`

use infodens::metrics::essay_metrics;
use infodens::report::{boxplot_csv, boxplot_summary, native_reference_band};
use infodens::synth::{synth_scores, ScoreSynthConfig};
use infodens::types::EssayMeasure;
use infodens::Factor;

fn main() -> infodens::Result<()> {
    let cfg = ScoreSynthConfig {
        essays_per_group: 25,
        ..Default::default()
    };
    let (records, _) = synth_scores(&cfg)?;
    let metrics = records.iter().map(essay_metrics).collect::<infodens::Result<Vec<_>>>()?;
    let learners: Vec<_> = metrics.iter().filter(|m| !m.label.is_native()).cloned().collect();

    let mut summaries = Vec::new();
    let mut bands = Vec::new();
    for measure in EssayMeasure::ALL {
        summaries.extend(boxplot_summary(&learners, Factor::Proficiency, measure)?);
        let band = native_reference_band(&metrics, measure)?;
        if let Some(w) = &band.warning {
            eprintln!("warning: {w}");
        }
        bands.push(band);
    }
    print!("{}", String::from_utf8_lossy(&boxplot_csv(&summaries, &bands)?));
    Ok(())
}
