//! Runs all six methods on the synthetic benchmark at 20% target labels and prints
//! a method × dataset AUC grid plus paired comparisons.
//!
//! `cargo run --release --example compare_methods -- [jobs]`

use hierda::baselines::MethodId;
use hierda::evaluation::{compare_methods, run_experiment, ExperimentSpec};
use hierda::synth::{generate, SynthSpec};

fn main() -> hierda::Result<()> {
    let jobs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let spec = SynthSpec::benchmark();
    let (datasets, _) = generate(&spec)?;
    let experiment = ExperimentSpec {
        targets: datasets.iter().map(|d| d.dataset_id.clone()).collect(),
        methods: MethodId::ALL.to_vec(),
        proportions: vec![0.2],
        seeds: (0..20).collect(),
        config: Default::default(),
    };
    let table = run_experiment(&experiment, &datasets, &spec.vocabulary()?, jobs)?;
    println!("{}", table.method_grid_markdown(0.2));

    for (a, b) in [
        (MethodId::HierP, MethodId::Hier),
        (MethodId::HierP, MethodId::TargetOnly),
        (MethodId::FedaP, MethodId::Feda),
    ] {
        for c in compare_methods(&table, a, b, 0.2)? {
            println!(
                "{:>10} {} − {}: {:+.4} (positive in {:.0}% of seeds)",
                c.target,
                a.short_name(),
                b.short_name(),
                c.mean_difference,
                100.0 * c.fraction_positive()
            );
        }
    }
    if table.error_count() > 0 {
        eprintln!("{} cells failed; see the error column of results", table.error_count());
    }
    Ok(())
}
