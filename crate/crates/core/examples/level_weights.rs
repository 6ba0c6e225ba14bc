//! Stage two: learns one influence weight per hierarchy node for a target dataset and
//! prints them. The target has no 5-15 year olds, so that column is identically zero
//! in training and its weight is exactly 0.
//!
//! `cargo run --release --example level_weights -- [target] [proportion]`

use hierda::config::ModelConfig;
use hierda::data::{split_labelled, SplitSpec};
use hierda::evaluation::auc;
use hierda::hierarchy::Shape;
use hierda::predictor::{fit_two_stage, predict_proba};
use hierda::synth::{generate, SynthSpec};

fn main() -> hierda::Result<()> {
    let mut args = std::env::args().skip(1);
    let target = args.next().unwrap_or_else(|| "goviral".into());
    let proportion: f64 = args.next().and_then(|p| p.parse().ok()).unwrap_or(0.2);

    let spec = SynthSpec::benchmark();
    let (datasets, _) = generate(&spec)?;
    let vocab = spec.vocabulary()?;
    let (target_ds, sources): (Vec<_>, Vec<_>) = datasets.into_iter().partition(|d| d.dataset_id == target);
    let target_ds = target_ds
        .into_iter()
        .next()
        .ok_or_else(|| hierda::Error::validation(format!("no dataset `{target}`")))?;
    let (labelled, heldout) = split_labelled(&target_ds, &SplitSpec::new(proportion, 0)?)?;

    let config = ModelConfig::default();
    let (_, model) = fit_two_stage(&sources, &labelled, &vocab, &config, Shape::PopulationAware)?;
    println!("target `{target}`: {} labelled, {} heldout", labelled.len(), heldout.len());
    println!("intercept {:+.4}", model.weights.intercept);
    for (col, w) in model.encoding.columns.iter().zip(&model.weights.coefficients) {
        println!("  {:<26} {:+.4}", col.node_id, w);
    }

    let scores = heldout
        .observations
        .iter()
        .map(|o| predict_proba(o, &model))
        .collect::<hierda::Result<Vec<_>>>()?;
    println!("heldout AUC {:.3}", auc(&scores, &heldout.labels()?)?);
    Ok(())
}
