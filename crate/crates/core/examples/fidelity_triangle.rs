//! Compares the triangle-inequality bound with the best isometry for a tilted configuration.

use kcbs_selftest::analysis::{optimal_isometry_fidelity, triangle_lower_bound};
use kcbs_selftest::kcbs_model::tilted_configuration;
use kcbs_selftest::linalg::c;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tilted = tilted_configuration(150.612, &[c(-0.649), c(-0.400), c(-0.649)])?;
    let fit = optimal_isometry_fidelity(&tilted)?;
    println!(
        "best isometry total {:.6} ({} starts, converged {})",
        fit.total, fit.starts, fit.converged
    );
    for (k, t) in fit.terms.iter().enumerate() {
        println!("  term {k}: {t:.6}");
    }

    let device = [0.99; 6];
    let terms: [f64; 6] = fit.terms.as_slice().try_into()?;
    let bound = triangle_lower_bound(&device, &terms)?;
    println!(
        "triangle bound with device fidelities 0.99: {:.4} (vacuous {})",
        bound.value, bound.vacuous
    );
    Ok(())
}
