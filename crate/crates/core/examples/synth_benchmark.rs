//! Generates the built-in four-dataset benchmark and summarizes it: sizes, positive
//! counts, demographic make-up, and how close each dataset's empirical symptom PPVs
//! are to the generator's analytic values.
//!
//! `cargo run --release --example synth_benchmark -- [spec.json] [--write-spec PATH]`

use hierda::data::{AgeGroup, Gender};
use hierda::evaluation::auc;
use hierda::hierarchy::empirical_ppv;
use hierda::synth::{generate, oracle_scores, SynthSpec};

fn main() -> hierda::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut spec = SynthSpec::benchmark();
    let mut write_to = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--write-spec" {
            write_to = it.next().cloned();
        } else {
            spec = SynthSpec::from_json(&std::fs::read_to_string(a)?)?;
        }
    }
    if let Some(path) = write_to {
        std::fs::write(&path, spec.to_json() + "\n")?;
        println!("wrote {path}");
    }

    let (datasets, truth) = generate(&spec)?;
    let vocab = spec.vocabulary()?;
    for (i, d) in datasets.iter().enumerate() {
        let labels = d.labels()?;
        let positives = labels.iter().filter(|&&y| y).count();
        let slice: Vec<_> = d.observations.iter().collect();
        let empirical = empirical_ppv(&slice, &vocab)?.ppv;
        let analytic = spec.analytic_dataset_ppv(i, &truth)?;
        let worst = empirical
            .iter()
            .zip(&analytic)
            .map(|(e, a)| (e - a).abs())
            .fold(0.0, f64::max);
        let oracle = auc(&oracle_scores(d, &truth)?, &labels)?;
        println!(
            "{:<10} {:<16} n={:<5} positive={:<5} oracle AUC {:.3}  max |PPV − analytic| {:.3}",
            d.dataset_id,
            d.domain.label(),
            d.len(),
            positives,
            oracle,
            worst
        );
        let mut line = String::from("           ");
        for a in AgeGroup::ALL {
            for g in Gender::ALL {
                let n = d
                    .observations
                    .iter()
                    .filter(|o| o.age_group == a && o.gender == g)
                    .count();
                line.push_str(&format!("{}/{}:{:<5}", a.label(), &g.label()[..1], n));
            }
        }
        println!("{line}");
    }
    Ok(())
}
