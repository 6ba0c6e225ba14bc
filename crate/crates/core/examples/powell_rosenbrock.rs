//! The derivative-free optimizer on its own: Rosenbrock's valley from the classic
//! starting point, printing the objective trace.
//!
//! `cargo run --example powell_rosenbrock`

use hierda::powell::{powell_minimize, PowellOptions};

fn main() -> hierda::Result<()> {
    let rosenbrock = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let out = powell_minimize(rosenbrock, &[-1.2, 1.0], &PowellOptions::default())?;
    for (i, f) in out.trace.iter().enumerate() {
        println!("iter {i:>3}  f = {f:.3e}");
    }
    println!(
        "minimum at ({:.6}, {:.6}), f = {:.3e}, {} evaluations, converged: {}",
        out.x[0], out.x[1], out.f, out.evaluations, out.converged
    );
    Ok(())
}
