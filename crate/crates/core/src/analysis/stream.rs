use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Number of symbols in the context-selection scheme.
pub const SYMBOLS: usize = 10;

/// p-values below this raise the uniformity flag.
pub const FLAG_LEVEL: f64 = 1e-3;

/// Context `(i, j)` chosen by symbol `m ∈ 1..=10`: `i = m mod 5` (0 read as 5),
/// `j = i + 1` when `m < 5.5`, else `i − 1`.
pub fn context_for_symbol(m: u8) -> Result<(usize, usize)> {
    if !(1..=SYMBOLS as u8).contains(&m) {
        return Err(Error::InvalidParameter(format!(
            "symbol {m} outside 1..=10"
        )));
    }
    let i = match m as usize % 5 {
        0 => 5,
        r => r,
    };
    let j = if m <= 5 { i % 5 + 1 } else { (i + 3) % 5 + 1 };
    Ok((i, j))
}

/// Inverse of [`context_for_symbol`].
pub fn symbol_for_context(i: usize, j: usize) -> Result<u8> {
    (1..=SYMBOLS as u8)
        .find(|&m| context_for_symbol(m).ok() == Some((i, j)))
        .ok_or_else(|| Error::InvalidParameter(format!("({i},{j}) is not a five-cycle context")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub draws: usize,
    pub counts: [u64; SYMBOLS],
    pub chi_squared: f64,
    pub p_value: f64,
    pub flagged: bool,
}

/// Pearson χ² test of a symbol stream against the uniform distribution on ten symbols.
pub fn context_stream_check(symbols: &[u8]) -> Result<StreamReport> {
    if symbols.is_empty() {
        return Err(Error::InvalidParameter("empty stream".into()));
    }
    let mut counts = [0u64; SYMBOLS];
    for &m in symbols {
        context_for_symbol(m)?;
        counts[m as usize - 1] += 1;
    }
    let expected = symbols.len() as f64 / SYMBOLS as f64;
    let chi_squared: f64 = counts
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((SYMBOLS - 1) as f64).expect("positive degrees of freedom");
    let p_value = dist.sf(chi_squared);
    Ok(StreamReport {
        draws: symbols.len(),
        counts,
        chi_squared,
        p_value,
        flagged: p_value < FLAG_LEVEL,
    })
}

/// As [`context_stream_check`] for a stream of ordered context pairs.
pub fn context_pair_stream_check(pairs: &[(usize, usize)]) -> Result<StreamReport> {
    let symbols = pairs
        .iter()
        .map(|&(i, j)| symbol_for_context(i, j))
        .collect::<Result<Vec<_>>>()?;
    context_stream_check(&symbols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symbol_seven_selects_two_then_one() {
        assert_eq!(context_for_symbol(7).unwrap(), (2, 1));
        assert_eq!(context_for_symbol(5).unwrap(), (5, 1));
        assert_eq!(context_for_symbol(10).unwrap(), (5, 4));
        assert_eq!(context_for_symbol(1).unwrap(), (1, 2));
        assert!(context_for_symbol(0).is_err());
        assert!(context_for_symbol(11).is_err());
    }

    #[test]
    fn symbols_cover_every_ordered_edge_once() {
        let mut pairs: Vec<_> = (1..=10).map(|m| context_for_symbol(m).unwrap()).collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), 10);
        for m in 1..=10u8 {
            let (i, j) = context_for_symbol(m).unwrap();
            assert_eq!(symbol_for_context(i, j).unwrap(), m);
        }
    }

    #[test]
    fn uniform_stream_passes_and_constant_stream_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let uniform: Vec<u8> = (0..100_000).map(|_| rng.random_range(1..=10)).collect();
        assert!(!context_stream_check(&uniform).unwrap().flagged);
        let constant = vec![3u8; 1000];
        assert!(context_stream_check(&constant).unwrap().flagged);
    }
}
