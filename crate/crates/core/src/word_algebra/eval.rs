use std::collections::BTreeMap;

use super::poly::NcPoly;
use super::word::{Letter, Word};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

const OPERATOR_TOL: f64 = 1e-10;

/// Concrete matrices for the letters of a polynomial.
///
/// Projector and unitary images are validated on insertion; supplying `P̂`
/// also defines `P̂†`.
#[derive(Debug, Clone)]
pub struct Assignment {
    dim: usize,
    matrices: BTreeMap<Letter, CMat>,
}

impl Assignment {
    /// `I` maps to the identity; every other letter must be supplied.
    pub fn new(dim: usize) -> Self {
        let mut matrices = BTreeMap::new();
        matrices.insert(Letter::Identity, linalg::identity(dim));
        Assignment { dim, matrices }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, m: &CMat) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.nrows().max(m.ncols()),
            });
        }
        Ok(())
    }

    pub fn with_projector(mut self, i: u16, m: CMat) -> Result<Self> {
        self.check_dim(&m)?;
        let defect = linalg::projector_defect(&m);
        if defect > OPERATOR_TOL {
            return Err(Error::InvalidOperator {
                what: format!("P{i}"),
                defect,
            });
        }
        self.matrices.insert(Letter::Proj(i), m);
        Ok(self)
    }

    pub fn with_unitary(mut self, m: CMat) -> Result<Self> {
        self.check_dim(&m)?;
        let defect = linalg::unitary_defect(&m);
        if defect > OPERATOR_TOL {
            return Err(Error::InvalidOperator {
                what: "Ph".into(),
                defect,
            });
        }
        self.matrices.insert(Letter::PHatAdj, m.adjoint());
        self.matrices.insert(Letter::PHat, m);
        Ok(self)
    }

    pub fn get(&self, l: Letter) -> Result<&CMat> {
        self.matrices
            .get(&l)
            .ok_or_else(|| Error::MissingLetter(l.to_string()))
    }

    pub fn evaluate_word(&self, w: &Word) -> Result<CMat> {
        let mut out = linalg::identity(self.dim);
        for &l in w.letters() {
            out = out * self.get(l)?;
        }
        Ok(out)
    }
}

/// Evaluates `p` with ordinary matrix products.
pub fn evaluate(p: &NcPoly, assignment: &Assignment) -> Result<CMat> {
    let mut out = CMat::zeros(assignment.dim, assignment.dim);
    for (w, coef) in p.terms() {
        out += assignment.evaluate_word(w)?.scale(coef);
    }
    Ok(out)
}
