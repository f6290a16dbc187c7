//! Lower-bounds the total self-testing fidelity at one observed witness value.
//!
//! ```text
//! cargo run --release --example fidelity_bound -- [LEVEL] [C] [sum|equal]
//! ```

use kcbs_selftest::isometry::{build_swap_blocks, decompose_translation, objective_coefficients};
use kcbs_selftest::kcbs_model::ideal_configuration;
use kcbs_selftest::moment_relax::{assemble, Statistic};
use kcbs_selftest::sdp_solver::{solve, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let level: usize = args.first().map_or(Ok(2), |s| s.parse())?;
    let c: f64 = args.get(1).map_or(Ok(2.15), |s| s.parse())?;
    let statistic = match args.get(2).map(String::as_str) {
        Some("equal") => Statistic::Equal { c },
        _ => Statistic::Sum { c },
    };

    let config = ideal_configuration(5)?;
    let decomposition = decompose_translation(5, 3)?;
    let blocks = build_swap_blocks(&decomposition)?;
    let objective = objective_coefficients(&blocks, &config)?;
    let problem = assemble(&objective, &decomposition, &statistic, level)?;
    let counts = problem.counts();
    println!(
        "level {level}: {} index words, {} moment classes, localizing {}x{}",
        counts.index_size, counts.classes, counts.localizing_size, counts.localizing_size
    );

    let result = solve(&problem, &SolverSettings::default())?;
    println!("statistic     {statistic}");
    println!("status        {}", result.status);
    println!("bound         {:.6}", result.bound);
    println!("certified     {:.6}", result.certified_bound);
    println!("iterations    {}", result.iterations);
    println!(
        "residuals     {:.2e} / {:.2e}, gap {:.2e}",
        result.primal_residual, result.dual_residual, result.gap
    );
    println!("time          {:.2?}", result.wall_time);
    Ok(())
}
