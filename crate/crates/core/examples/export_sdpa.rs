//! Writes the level-1 witness maximization in SDPA sparse format and reads it back.
//!
//! ```text
//! cargo run --example export_sdpa -- /tmp/witness.dat-s
//! ```

use std::path::PathBuf;

use kcbs_selftest::moment_relax::{assemble_max_witness, export_sdpa, parse_sdpa, WitnessAlphabet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dest = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("kcbs_witness.dat-s"));
    let problem = assemble_max_witness(5, 1, WitnessAlphabet::Full)?;
    let manifest = export_sdpa(&problem, &dest)?;
    println!("wrote {} and {}", dest.display(), manifest.display());

    let text = std::fs::read_to_string(&dest)?;
    let parsed = parse_sdpa(&text)?;
    println!(
        "{} variables, block sizes {:?}",
        parsed.num_vars, parsed.block_sizes
    );
    Ok(())
}
