//! Compares the two demographic-aware methods as the labelled share of the target
//! grows, printed as a proportion × dataset grid.
//!
//! `cargo run --release --example proportion_sweep -- [seeds] [jobs]`

use hierda::baselines::MethodId;
use hierda::evaluation::{run_experiment, ExperimentSpec};
use hierda::synth::{generate, SynthSpec};

fn main() -> hierda::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let jobs: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let spec = SynthSpec::benchmark();
    let (datasets, _) = generate(&spec)?;
    let experiment = ExperimentSpec {
        targets: datasets.iter().map(|d| d.dataset_id.clone()).collect(),
        methods: vec![MethodId::FedaP, MethodId::HierP],
        proportions: vec![0.1, 0.15, 0.2, 0.25],
        seeds: (0..seeds).collect(),
        config: Default::default(),
    };
    let table = run_experiment(&experiment, &datasets, &spec.vocabulary()?, jobs)?;
    print!("{}", table.proportion_grid_markdown());
    Ok(())
}
