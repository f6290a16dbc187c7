//! Builds the swap isometry symbolically and evaluates it on the ideal qutrit realization.

use kcbs_selftest::isometry::{
    build_swap_blocks, decompose_translation, numeric_swap_check, objective_coefficients,
    Realization,
};
use kcbs_selftest::kcbs_model::ideal_configuration;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ideal_configuration(5)?;
    let decomp = decompose_translation(5, 3)?;
    println!(
        "translation residual {:.2e}, words up to length {}",
        decomp.residual(),
        decomp.max_word_len()
    );

    let blocks = build_swap_blocks(&decomp)?;
    println!("symbolic Σ B_k†B_k − I: {:.2e}", blocks.isometry_defect());

    let objective = objective_coefficients(&blocks, &config)?;
    println!("objective: {} terms", objective.terms().len());

    let realization = Realization::ideal(&config, &decomp)?;
    let d = numeric_swap_check(&realization, &blocks, &config)?;
    println!("numeric S†S − I: {:.2e}", d.isometry_defect);
    for (k, t) in d.terms.iter().enumerate() {
        let label = if k == 0 {
            "state".to_string()
        } else {
            format!("P{k}")
        };
        println!("  {label:<6}{t:.9}");
    }
    println!("total {:.9}", d.total);
    Ok(())
}
