//! Noncommutative monomials over `{I, Π_1..Π_n, P̂, P̂†}`.
//!
//! Words are kept in a canonical form obtained by the shrinking rewrites
//!
//! * `Π_i Π_i → Π_i` (repeatable measurements),
//! * `Π_i Π_j → 0` for `{i, j}` an edge of the n-cycle (exclusivity),
//! * `P̂ P̂† → I`, `P̂† P̂ → I` (unitarity),
//! * `I` letters are dropped.
//!
//! The system is terminating and locally confluent, so a single left-to-right
//! stack pass reaches the normal form.

mod eval;
mod poly;
mod word;

pub use eval::{evaluate, Assignment};
pub use poly::{NcPoly, DEFAULT_PRUNE};
pub use word::{parse_letters, Letter, Word};

use crate::error::{Error, Result};

/// Rewrite context: the cycle length fixes which projector pairs annihilate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Algebra {
    n: u16,
}

impl Algebra {
    /// `n` must be odd and at least 5.
    pub fn new(n: usize) -> Result<Self> {
        if n < 5 || n % 2 == 0 || n > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "cycle length must be odd and >= 5, got {n}"
            )));
        }
        Ok(Algebra { n: n as u16 })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    /// Whether `{i, j}` (1-based) is an edge of the n-cycle.
    pub fn is_edge(&self, i: u16, j: u16) -> bool {
        let n = self.n;
        i != j && ((i % n) + 1 == j || (j % n) + 1 == i)
    }

    /// Every letter of the alphabet except `I`, in alphabet order.
    pub fn letters(&self, with_unitary: bool) -> Vec<Letter> {
        let mut out: Vec<Letter> = (1..=self.n).map(Letter::Proj).collect();
        if with_unitary {
            out.push(Letter::PHat);
            out.push(Letter::PHatAdj);
        }
        out
    }

    /// Reduces a raw letter sequence to its normal form; `None` is the zero word.
    pub fn canonicalize(&self, raw: &[Letter]) -> Option<Word> {
        let mut stack: Vec<Letter> = Vec::with_capacity(raw.len());
        for &letter in raw {
            if !self.push(&mut stack, letter) {
                return None;
            }
        }
        Some(Word::from_canonical(stack))
    }

    /// Appends one letter to a canonical stack. Returns false on annihilation.
    fn push(&self, stack: &mut Vec<Letter>, letter: Letter) -> bool {
        if let Letter::Proj(i) = letter {
            assert!(
                i >= 1 && i <= self.n,
                "projector index {i} outside 1..={}",
                self.n
            );
        }
        match (stack.last().copied(), letter) {
            (_, Letter::Identity) => {}
            (Some(Letter::Proj(a)), Letter::Proj(b)) if a == b => {}
            (Some(Letter::Proj(a)), Letter::Proj(b)) if self.is_edge(a, b) => return false,
            (Some(Letter::PHat), Letter::PHatAdj) | (Some(Letter::PHatAdj), Letter::PHat) => {
                stack.pop();
            }
            _ => stack.push(letter),
        }
        true
    }

    /// Canonical product `a · b`.
    pub fn mul_words(&self, a: &Word, b: &Word) -> Option<Word> {
        let mut stack = a.letters().to_vec();
        for &letter in b.letters() {
            if !self.push(&mut stack, letter) {
                return None;
            }
        }
        Some(Word::from_canonical(stack))
    }

    /// Canonical `a† · b`, the entry of a moment matrix at `(a, b)`.
    pub fn gram_word(&self, a: &Word, b: &Word) -> Option<Word> {
        self.mul_words(&a.adjoint(), b)
    }

    /// Bilinear product with every term canonicalized.
    pub fn multiply(&self, a: &NcPoly, b: &NcPoly) -> NcPoly {
        let mut out = NcPoly::zero();
        for (wa, ca) in a.terms() {
            for (wb, cb) in b.terms() {
                if let Some(w) = self.mul_words(wa, wb) {
                    out.add_term(w, ca * cb);
                }
            }
        }
        out.pruned()
    }

    /// Product of several polynomials, left to right.
    pub fn product(&self, factors: &[&NcPoly]) -> NcPoly {
        factors
            .iter()
            .fold(NcPoly::one(), |acc, f| self.multiply(&acc, f))
    }

    pub fn parse_word(&self, s: &str) -> Result<Option<Word>> {
        let letters = parse_letters(s)?;
        for l in &letters {
            if let Letter::Proj(i) = l {
                if *i > self.n {
                    return Err(Error::Parse(format!(
                        "projector P{i} outside 1..={}",
                        self.n
                    )));
                }
            }
        }
        Ok(self.canonicalize(&letters))
    }

    /// All canonical non-zero words with at most `max_len` letters, sorted.
    pub fn words_up_to(&self, max_len: usize, with_unitary: bool) -> Vec<Word> {
        let alphabet = self.letters(with_unitary);
        let mut all = vec![Word::identity()];
        let mut frontier = vec![Word::identity()];
        for len in 1..=max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for l in &alphabet {
                    if let Some(ext) = self.canonicalize_append(w, *l) {
                        if ext.len() == len {
                            next.push(ext);
                        }
                    }
                }
            }
            all.extend(next.iter().cloned());
            frontier = next;
        }
        all.sort();
        all.dedup();
        all
    }

    fn canonicalize_append(&self, w: &Word, l: Letter) -> Option<Word> {
        let mut stack = w.letters().to_vec();
        if self.push(&mut stack, l) {
            Some(Word::from_canonical(stack))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alg() -> Algebra {
        Algebra::new(5).unwrap()
    }

    fn w(s: &str) -> Option<Word> {
        alg().parse_word(s).unwrap()
    }

    #[test]
    fn rejects_bad_cycle_lengths() {
        assert!(Algebra::new(4).is_err());
        assert!(Algebra::new(3).is_err());
        assert!(Algebra::new(7).is_ok());
    }

    #[test]
    fn edges_wrap_around() {
        let a = alg();
        assert!(a.is_edge(1, 2) && a.is_edge(2, 1) && a.is_edge(5, 1) && a.is_edge(1, 5));
        assert!(!a.is_edge(1, 3) && !a.is_edge(2, 5) && !a.is_edge(3, 3));
    }

    #[test]
    fn idempotence() {
        assert_eq!(w("P1.P1.P3").unwrap().to_string(), "P1.P3");
    }

    #[test]
    fn edge_annihilation() {
        assert_eq!(w("P1.P2"), None);
        assert_eq!(w("P5.P1"), None);
        assert_eq!(w("P3.P1.P1.P2"), None);
    }

    #[test]
    fn unitary_cancellation() {
        assert_eq!(w("Ph.Ph†.P4").unwrap().to_string(), "P4");
        assert_eq!(w("P1.Ph.Ph†.P1").unwrap().to_string(), "P1");
        assert_eq!(w("P1.Ph†.Ph.P2"), None);
        assert_eq!(w("Ph.Ph.Ph†").unwrap().to_string(), "Ph");
    }

    #[test]
    fn identity_letters_vanish() {
        assert_eq!(w("I.P2.I").unwrap().to_string(), "P2");
        assert!(w("I.I").unwrap().is_identity());
    }

    #[test]
    fn word_counts() {
        let a = alg();
        assert_eq!(a.words_up_to(1, true).len(), 8);
        // 1 + 5 + (25 - 5 repeated - 10 edge-killed)
        assert_eq!(a.words_up_to(2, false).len(), 16);
        assert_eq!(a.words_up_to(3, true).len(), 192);
    }

    fn letter_strategy() -> impl Strategy<Value = Letter> {
        prop_oneof![
            Just(Letter::Identity),
            (1u16..=5).prop_map(Letter::Proj),
            Just(Letter::PHat),
            Just(Letter::PHatAdj),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn canonical_form_is_a_fixed_point(raw in prop::collection::vec(letter_strategy(), 0..12)) {
            let a = alg();
            if let Some(c) = a.canonicalize(&raw) {
                prop_assert_eq!(a.canonicalize(c.letters()), Some(c.clone()));
                prop_assert_eq!(a.canonicalize(c.adjoint().letters()), Some(c.adjoint()));
            }
        }

        #[test]
        fn reduction_is_confluent(
            raw in prop::collection::vec(letter_strategy(), 0..14),
            split in 0usize..15,
        ) {
            let a = alg();
            let at = split.min(raw.len());
            let whole = a.canonicalize(&raw);
            let left = a.canonicalize(&raw[..at]);
            let right = a.canonicalize(&raw[at..]);
            let joined = match (left, right) {
                (Some(l), Some(r)) => a.mul_words(&l, &r),
                _ => None,
            };
            prop_assert_eq!(whole, joined);
        }

        #[test]
        fn evaluation_is_a_morphism(raw in prop::collection::vec(letter_strategy(), 0..10)) {
            let a = alg();
            let asg = ideal_assignment();
            let mut direct = crate::linalg::identity(3);
            for l in &raw {
                direct = direct * asg.get(*l).unwrap();
            }
            let reduced = match a.canonicalize(&raw) {
                Some(w) => asg.evaluate_word(&w).unwrap(),
                None => CMat::zeros(3, 3),
            };
            prop_assert!(crate::linalg::max_abs(&(direct - reduced)) < 1e-9);
        }

        #[test]
        fn adjoint_commutes_with_evaluation(raw in prop::collection::vec(letter_strategy(), 0..10)) {
            let asg = ideal_assignment();
            if let Some(w) = alg().canonicalize(&raw) {
                let m = asg.evaluate_word(&w).unwrap();
                let madj = asg.evaluate_word(&w.adjoint()).unwrap();
                prop_assert!(crate::linalg::max_abs(&(m.adjoint() - madj)) < 1e-12);
            }
        }
    }

    use crate::linalg::CMat;

    fn ideal_assignment() -> Assignment {
        let cfg = crate::kcbs_model::ideal_configuration(5).unwrap();
        let mut asg = Assignment::new(3);
        for (i, p) in cfg.projectors().into_iter().enumerate() {
            asg = asg.with_projector(i as u16 + 1, p).unwrap();
        }
        let seed = cfg.projector(0)
            + cfg.projector(2).scale(0.5)
            + cfg.projector(3) * num_complex::Complex64::new(0.0, 0.3);
        asg.with_unitary(crate::linalg::polar_unitary(&seed))
            .unwrap()
    }

    #[test]
    fn exclusive_product_evaluates_to_zero() {
        let asg = ideal_assignment();
        let p = NcPoly::from_word(alg().parse_word("P1.P3").unwrap().unwrap());
        let zero_word_image = asg.get(Letter::Proj(1)).unwrap() * asg.get(Letter::Proj(2)).unwrap();
        assert!(crate::linalg::max_abs(&zero_word_image) < 1e-12);
        assert!(crate::linalg::max_abs(&evaluate(&p, &asg).unwrap()) > 1e-3);
        let id = evaluate(&NcPoly::one(), &asg).unwrap();
        assert!(crate::linalg::max_abs(&(id - crate::linalg::identity(3))) < 1e-15);
        assert!(matches!(
            Assignment::new(3).evaluate_word(&alg().parse_word("P1").unwrap().unwrap()),
            Err(Error::MissingLetter(_))
        ));
    }
}
