//! Prints the ideal and tilted configurations with their witness values.

use kcbs_selftest::kcbs_model::{
    classical_value, depolarized_state, ideal_configuration, quantum_value, tilted_configuration,
    witness_value,
};
use kcbs_selftest::linalg::c;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "classical {:.4}, quantum {:.7}",
        classical_value(5)?,
        quantum_value(5)?
    );

    let ideal = ideal_configuration(5)?;
    println!(
        "ideal: witness {:.7}",
        witness_value(&ideal, &ideal.state_density())?
    );

    let tilted = tilted_configuration(150.612, &[c(-0.649), c(-0.400), c(-0.649)])?;
    println!(
        "tilted: witness {:.7}, max overlap {:.1e}",
        witness_value(&tilted, &tilted.state_density())?,
        tilted.max_cyclic_overlap()
    );
    println!("{}", tilted.to_json()?);

    for p in [0.1, 0.3] {
        let rho = depolarized_state(p)?;
        println!(
            "depolarized p={p}: witness {:.4}, eigenvalues {:?}",
            witness_value(&ideal, &rho)?,
            rho.eigenvalues()
        );
    }
    Ok(())
}
