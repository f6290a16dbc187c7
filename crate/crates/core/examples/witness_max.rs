//! Maximizes the KCBS witness over the first two relaxation levels and compares
//! with the closed-form quantum value.

use kcbs_selftest::kcbs_model::quantum_value;
use kcbs_selftest::moment_relax::{assemble_max_witness, WitnessAlphabet};
use kcbs_selftest::sdp_solver::{solve, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q5 = quantum_value(5)?;
    println!("Q_5 = {q5:.7}");
    for level in 1..=2 {
        let problem = assemble_max_witness(5, level, WitnessAlphabet::ProjectorOnly)?;
        let r = solve(&problem, &SolverSettings::default())?;
        println!(
            "level {level}: {:.7} ({}, {} iterations, {:.2?}), error {:.1e}",
            r.bound,
            r.status,
            r.iterations,
            r.wall_time,
            (r.bound - q5).abs()
        );
    }
    Ok(())
}
