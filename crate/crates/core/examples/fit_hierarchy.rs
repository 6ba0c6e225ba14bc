//! Stage one on the synthetic benchmark: fits the node parameters at several
//! divergence weights and shows how parents and children are pulled together.
//!
//! `cargo run --release --example fit_hierarchy`

use hierda::config::ModelConfig;
use hierda::hierarchy::{build_hierarchy, center_priors, compute_stats};
use hierda::mapfit::{edge_divergences, fit_map};
use hierda::synth::{generate, SynthSpec};

fn main() -> hierda::Result<()> {
    let spec = SynthSpec::benchmark();
    let (datasets, _) = generate(&spec)?;
    let vocab = spec.vocabulary()?;
    let skeleton = build_hierarchy(&datasets, &vocab)?;
    let stats = compute_stats(&skeleton, &datasets)?;
    let centered = center_priors(&skeleton, &stats, 1.0)?;
    println!("{} nodes × {} symptoms", centered.len(), vocab.len());

    println!("{:>6}  {:>12}  {:>10}  {:>11}  {:>5}", "beta", "objective", "Σ edge div", "max edge", "iters");
    for beta in [0.0, 0.05, 0.2, 1.0, 10.0, 100.0] {
        let mut h = centered.clone();
        let config = ModelConfig {
            beta,
            ..ModelConfig::default()
        };
        let fitted = fit_map(&mut h, &stats, &config)?;
        let edges = edge_divergences(&h, config.divergence);
        let total: f64 = edges.iter().map(|e| e.2).sum();
        let max = edges.iter().map(|e| e.2).fold(0.0, f64::max);
        println!(
            "{beta:>6}  {:>12.4}  {total:>10.5}  {max:>11.2e}  {:>5}",
            fitted.final_objective, fitted.iterations
        );
    }

    let mut h = centered.clone();
    let fitted = fit_map(&mut h, &stats, &ModelConfig::default())?;
    println!("\nfitted symptom distributions at the default weight (softmax of each node):");
    print!("{:<26}", "node");
    for name in vocab.names().iter().take(6) {
        print!("{:>12}", name);
    }
    println!();
    for (node, theta) in &fitted.node_params {
        let z: f64 = theta.iter().map(|t| t.exp()).sum();
        print!("{node:<26}");
        for t in theta.iter().take(6) {
            print!("{:>12.4}", t.exp() / z);
        }
        println!();
    }
    Ok(())
}
