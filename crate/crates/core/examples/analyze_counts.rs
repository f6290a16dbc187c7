//! Simulates a KCBS run on a depolarized state and estimates the witness and noise metrics.
//!
//! ```text
//! cargo run --example analyze_counts -- [P] [SHOTS]
//! ```

use kcbs_selftest::analysis::{estimate, noise_metrics, sample_counts, ContextPlan};
use kcbs_selftest::kcbs_model::{depolarized_state, ideal_configuration, witness_value};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p: f64 = args.first().map_or(Ok(0.1), |s| s.parse())?;
    let shots: u64 = args.get(1).map_or(Ok(10_000), |s| s.parse())?;

    let config = ideal_configuration(5)?;
    let state = depolarized_state(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let counts = sample_counts(&config, &state, shots, ContextPlan::default(), &mut rng)?;

    let est = estimate(&counts)?;
    println!("analytic Σp = {:.4}", witness_value(&config, &state)?);
    println!(
        "estimated Σp = {:.4} ± {:.4}, μ−1.96σ = {:.4}",
        est.sum,
        est.sum_sigma,
        est.conservative()
    );

    let noise = noise_metrics(&counts)?;
    if let Some(r) = noise.repeatability_summary {
        println!("R   mean {:.5}", r.mean);
    }
    if let Some(d) = noise.order_deviation_summary {
        println!("δ   mean {:.5}", d.mean);
    }
    if let Some(o) = noise.joint_click_summary {
        println!("o   mean {:.5}", o.mean);
    }
    Ok(())
}
