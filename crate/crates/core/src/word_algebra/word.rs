use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One generator of the operator algebra.
///
/// The derived ordering is the alphabet order used everywhere:
/// `I < Π_1 < … < Π_n < P̂ < P̂†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    Identity,
    /// Projector `Π_i`, 1-based.
    Proj(u16),
    PHat,
    PHatAdj,
}

impl Letter {
    pub fn adjoint(self) -> Letter {
        match self {
            Letter::PHat => Letter::PHatAdj,
            Letter::PHatAdj => Letter::PHat,
            other => other,
        }
    }

    pub fn is_projector(self) -> bool {
        matches!(self, Letter::Proj(_))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Identity => write!(f, "I"),
            Letter::Proj(i) => write!(f, "P{i}"),
            Letter::PHat => write!(f, "Ph"),
            Letter::PHatAdj => write!(f, "Ph†"),
        }
    }
}

impl FromStr for Letter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Letter::Identity),
            "Ph" => Ok(Letter::PHat),
            "Ph†" => Ok(Letter::PHatAdj),
            _ => {
                let idx = s
                    .strip_prefix('P')
                    .and_then(|rest| rest.parse::<u16>().ok())
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| Error::Parse(format!("unknown letter {s:?}")))?;
                Ok(Letter::Proj(idx))
            }
        }
    }
}

/// A canonical, non-zero monomial. The empty letter sequence is the identity.
///
/// Instances are produced by [`super::Algebra::canonicalize`]; annihilated
/// products are represented by `None` at that level rather than a sentinel
/// word, so a `Word` is never zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity() -> Self {
        Word {
            letters: Vec::new(),
        }
    }

    /// Wraps letters that are already known to be canonical.
    pub(crate) fn from_canonical(letters: Vec<Letter>) -> Self {
        debug_assert!(!letters.contains(&Letter::Identity));
        Word { letters }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    /// Number of letters; the identity has length zero.
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_identity()
    }

    /// Reverses the word and swaps `P̂ ↔ P̂†`; projectors are Hermitian.
    ///
    /// The rewrite rules are symmetric under this map, so the adjoint of a
    /// canonical word is canonical.
    pub fn adjoint(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.adjoint()).collect(),
        }
    }

    /// The lesser of `w` and `w†`; real moments identify the two.
    pub fn hermitian_representative(&self) -> Word {
        let adj = self.adjoint();
        if adj < *self {
            adj
        } else {
            self.clone()
        }
    }

    pub fn contains_unitary(&self) -> bool {
        self.letters
            .iter()
            .any(|l| matches!(l, Letter::PHat | Letter::PHatAdj))
    }

    /// Splits into `(head, tail)` with `head.len() == at`.
    pub fn split_at(&self, at: usize) -> (Word, Word) {
        let (a, b) = self.letters.split_at(at);
        (
            Word::from_canonical(a.to_vec()),
            Word::from_canonical(b.to_vec()),
        )
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters
            .len()
            .cmp(&other.letters.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "I");
        }
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, ".")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = Error;

    /// Parses the rendered form. Only canonical words are accepted here; use
    /// [`parse_letters`] plus [`super::Algebra::canonicalize`] for raw input.
    fn try_from(s: String) -> Result<Self> {
        let letters = parse_letters(&s)?;
        if letters == [Letter::Identity] {
            return Ok(Word::identity());
        }
        if letters.contains(&Letter::Identity) {
            return Err(Error::Parse(format!("{s:?} is not canonical")));
        }
        Ok(Word::from_canonical(letters))
    }
}

/// Parses `"P1.P3.Ph†"`-style strings into raw letters (no rewriting).
pub fn parse_letters(s: &str) -> Result<Vec<Letter>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty word".into()));
    }
    s.split('.').map(|tok| tok.trim().parse()).collect()
}
