use std::collections::BTreeMap;
use std::fmt;

use super::word::Word;

/// Coefficients below this magnitude are dropped.
pub const DEFAULT_PRUNE: f64 = 1e-14;

/// A real linear combination of canonical words.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NcPoly {
    terms: BTreeMap<Word, f64>,
    prune: f64,
}

impl NcPoly {
    pub fn zero() -> Self {
        NcPoly {
            terms: BTreeMap::new(),
            prune: DEFAULT_PRUNE,
        }
    }

    pub fn one() -> Self {
        Self::from_word(Word::identity())
    }

    pub fn from_word(w: Word) -> Self {
        Self::term(w, 1.0)
    }

    pub fn term(w: Word, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(w, c);
        p.pruned()
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune = threshold;
        self.pruned()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, f64)> + '_ {
        self.terms.iter().map(|(w, &c)| (w, c))
    }

    pub fn coefficient(&self, w: &Word) -> f64 {
        self.terms.get(w).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_word_len(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    /// Accumulates without pruning; call [`NcPoly::pruned`] when done.
    pub fn add_term(&mut self, w: Word, c: f64) {
        *self.terms.entry(w).or_insert(0.0) += c;
    }

    pub fn pruned(mut self) -> Self {
        let thr = self.prune;
        self.terms.retain(|_, c| c.abs() >= thr);
        self
    }

    pub fn add(&self, other: &NcPoly) -> NcPoly {
        let mut out = self.clone();
        for (w, c) in other.terms() {
            out.add_term(w.clone(), c);
        }
        out.pruned()
    }

    pub fn sub(&self, other: &NcPoly) -> NcPoly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> NcPoly {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.pruned()
    }

    /// Termwise adjoint; coefficients are real so they are unchanged.
    pub fn adjoint(&self) -> NcPoly {
        let mut out = NcPoly {
            terms: BTreeMap::new(),
            prune: self.prune,
        };
        for (w, c) in self.terms() {
            out.add_term(w.adjoint(), c);
        }
        out.pruned()
    }

    /// `(p + p†) / 2`.
    pub fn hermitian_part(&self) -> NcPoly {
        self.add(&self.adjoint()).scale(0.5)
    }

    /// Largest coefficient difference against `other`.
    pub fn distance(&self, other: &NcPoly) -> f64 {
        let mut d: f64 = 0.0;
        for (w, c) in self.terms() {
            d = d.max((c - other.coefficient(w)).abs());
        }
        for (w, c) in other.terms() {
            d = d.max((c - self.coefficient(w)).abs());
        }
        d
    }
}

impl fmt::Display for NcPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*{w}")?;
        }
        Ok(())
    }
}

impl FromIterator<(Word, f64)> for NcPoly {
    fn from_iter<T: IntoIterator<Item = (Word, f64)>>(iter: T) -> Self {
        let mut p = NcPoly::zero();
        for (w, c) in iter {
            p.add_term(w, c);
        }
        p.pruned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word_algebra::Algebra;

    fn p(alg: &Algebra, s: &str) -> NcPoly {
        NcPoly::from_word(alg.parse_word(s).unwrap().unwrap())
    }

    #[test]
    fn sum_of_adjacent_projectors_is_idempotent() {
        let alg = Algebra::new(5).unwrap();
        let s = p(&alg, "P1").add(&p(&alg, "P2"));
        assert_eq!(alg.multiply(&s, &s), s);
    }

    #[test]
    fn identity_is_neutral() {
        let alg = Algebra::new(5).unwrap();
        let q = p(&alg, "P1.P3").add(&p(&alg, "Ph.P4").scale(-2.5));
        assert_eq!(alg.multiply(&NcPoly::one(), &q), q);
        assert_eq!(alg.multiply(&q, &NcPoly::one()), q);
    }

    #[test]
    fn cancellation_gives_empty() {
        let alg = Algebra::new(5).unwrap();
        let zero = p(&alg, "P1").sub(&p(&alg, "P1"));
        assert!(zero.is_empty());
        let q = p(&alg, "P3.Ph");
        assert!(alg.multiply(&zero, &q).is_empty());
    }

    #[test]
    fn prune_threshold_is_configurable() {
        let w = Word::identity();
        let q = NcPoly::term(w.clone(), 1e-10);
        assert_eq!(q.len(), 1);
        assert!(q.with_prune_threshold(1e-8).is_empty());
        assert!(NcPoly::term(w, 1e-15).is_empty());
    }
}
