//! Reconstructs a state and a measurement from noisy probe frequencies.

use kcbs_selftest::analysis::{
    fidelity, povm_frequencies, povm_tomography, probe_expectations, state_tomography,
};
use kcbs_selftest::kcbs_model::{depolarized_state, ideal_configuration};
use kcbs_selftest::linalg::{self, min_eigenvalue};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut jitter = |v: f64| (v + rng.random_range(-0.01..0.01)).clamp(0.0, 1.0);

    let truth = depolarized_state(0.05)?;
    let freqs: Vec<f64> = probe_expectations(truth.entries())
        .iter()
        .map(|&f| jitter(f))
        .collect();
    let rho = state_tomography(&freqs)?;
    println!(
        "state fidelity {:.5}, min eigenvalue {:.2e}",
        fidelity(&rho, &truth)?,
        min_eigenvalue(rho.entries())
    );

    let config = ideal_configuration(5)?;
    let click = config.projector(0);
    let elements = vec![click.clone(), linalg::identity(3) - click];
    let rows: Vec<Vec<f64>> = povm_frequencies(&elements)
        .iter()
        .map(|row| row.iter().map(|&f| jitter(f)).collect())
        .collect();
    let fit = povm_tomography(
        &rows,
        Some(&[
            config.directions()[0].clone(),
            config.directions()[0].clone(),
        ]),
    )?;
    println!(
        "POVM: {} rounds, completeness defect {:.1e}, min eigenvalue {:.2e}, click fidelity {:.5}",
        fit.rounds,
        fit.completeness_defect,
        fit.min_eigenvalue,
        fit.fidelities[0].unwrap_or(f64::NAN)
    );
    Ok(())
}
