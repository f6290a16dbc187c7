//! Checks a stream of context choices for uniformity.

use kcbs_selftest::analysis::{context_for_symbol, context_stream_check, SYMBOLS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fair: Vec<u8> = (0..50_000)
        .map(|_| rng.random_range(1..=SYMBOLS as u8))
        .collect();
    let biased: Vec<u8> = fair
        .iter()
        .map(|&m| {
            if m == 10 && rng.random_bool(0.1) {
                1
            } else {
                m
            }
        })
        .collect();

    for (name, stream) in [("fair", &fair), ("biased", &biased)] {
        let r = context_stream_check(stream)?;
        println!(
            "{name}: χ² = {:.2}, p = {:.3e}, flagged {}",
            r.chi_squared, r.p_value, r.flagged
        );
    }
    println!("symbol 7 selects context {:?}", context_for_symbol(7)?);
    Ok(())
}
