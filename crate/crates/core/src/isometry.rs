//! Translation-operator decomposition, swap blocks and the linear fidelity objective.
//!
//! The swap is `S = T·U·V·U` on `A ⊗ A′` with `A′ = C³`. Only its column
//! `|0⟩_{A′}` matters for fidelities, so it is stored as three polynomials
//! `B_k = ⟨k|_{A′} S |0⟩_{A′}` over `{Π_i, P̂, P̂†}`.
//!
//! Targets live in the orthonormal frame `e_0 = u_1`, `e_1 = u_2`,
//! `e_2 ∝ (ū_1 × ū_2)` and the translation is `P = Σ_k |e_{k+1}⟩⟨e_k|`.
//! In that frame the ideal swap sends `|φ⟩|0⟩` to `|e_0⟩ ⊗ W|φ⟩` with
//! `W = Σ_k |k⟩⟨e_k|`, so each objective term equals one at the ideal point.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kcbs_model::{self, KcbsConfiguration};
use crate::linalg::{self, c, CMat, CVec};
use crate::word_algebra::{evaluate, Algebra, Assignment, Letter, NcPoly, Word};

/// Largest tolerated operator-norm residual of the decomposition.
pub const DECOMPOSITION_TOL: f64 = 1e-8;
/// Default cap on projector-word length in the decomposition.
pub const DEFAULT_TRANSLATION_LEN: usize = 3;

/// Orthonormal basis adapted to the first two directions of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    vectors: [CVec; 3],
}

impl Frame {
    pub fn from_configuration(config: &KcbsConfiguration) -> Result<Self> {
        let u1 = config.directions()[0].clone();
        let u2 = config.directions()[1].clone();
        let a = u1.map(|z| z.conj());
        let b = u2.map(|z| z.conj());
        let cross = CVec::from_vec(vec![
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]);
        let norm = cross.norm();
        if norm < 1e-9 {
            return Err(Error::InvalidParameter(
                "first two directions are parallel".into(),
            ));
        }
        Ok(Frame {
            vectors: [u1, u2, cross.unscale(norm)],
        })
    }

    pub fn vector(&self, k: usize) -> &CVec {
        &self.vectors[k]
    }

    /// `(⟨e_k|v⟩)_k`.
    pub fn coordinates(&self, v: &CVec) -> CVec {
        CVec::from_iterator(3, self.vectors.iter().map(|e| e.dotc(v)))
    }

    /// `Σ_k |e_{k+1}⟩⟨e_k|`.
    pub fn translation(&self) -> CMat {
        let mut p = CMat::zeros(3, 3);
        for k in 0..3 {
            p += linalg::outer(&self.vectors[(k + 1) % 3], &self.vectors[k]);
        }
        p
    }

    /// `W = Σ_k |k⟩⟨e_k|`, the change of basis into frame coordinates.
    pub fn to_coordinates(&self) -> CMat {
        CMat::from_fn(3, 3, |k, j| self.vectors[k][j].conj())
    }
}

/// Computational-basis translation `Σ_k |k+1 mod 3⟩⟨k|`.
pub fn computational_translation() -> CMat {
    let mut p = CMat::zeros(3, 3);
    for k in 0..3 {
        p[((k + 1) % 3, k)] = c(1.0);
    }
    p
}

/// `P_A = Σ_l α_l l` over projector words.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationDecomposition {
    algebra: Algebra,
    coefficients: NcPoly,
    residual: f64,
    max_word_len: usize,
}

impl TranslationDecomposition {
    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn coefficients(&self) -> &NcPoly {
        &self.coefficients
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }
}

/// Decomposes the frame translation of the ideal `n`-configuration.
pub fn decompose_translation(n: usize, max_word_len: usize) -> Result<TranslationDecomposition> {
    let config = kcbs_model::ideal_configuration(n)?;
    let target = Frame::from_configuration(&config)?.translation();
    decompose_translation_for(&config, &target, max_word_len)
}

/// Minimum-norm least-squares fit of `target` by projector words of length `≤ max_word_len`.
pub fn decompose_translation_for(
    config: &KcbsConfiguration,
    target: &CMat,
    max_word_len: usize,
) -> Result<TranslationDecomposition> {
    if max_word_len == 0 {
        return Err(Error::InvalidParameter("max_word_len must be >= 1".into()));
    }
    let algebra = Algebra::new(config.n())?;
    let assignment = projector_assignment(config)?;
    let words = algebra.words_up_to(max_word_len, false);
    let images: Vec<CMat> = words
        .iter()
        .map(|w| assignment.evaluate_word(w))
        .collect::<Result<_>>()?;

    let rows = 18;
    let design = DMatrix::<f64>::from_fn(rows, words.len(), |r, col| {
        let z = images[col][((r % 9) / 3, r % 3)];
        if r < 9 {
            z.re
        } else {
            z.im
        }
    });
    let rhs = nalgebra::DVector::<f64>::from_fn(rows, |r, _| {
        let z = target[((r % 9) / 3, r % 3)];
        if r < 9 {
            z.re
        } else {
            z.im
        }
    });
    let alpha = design
        .svd(true, true)
        .solve(&rhs, 1e-10)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let coefficients: NcPoly = words.iter().cloned().zip(alpha.iter().copied()).collect();
    let fitted = evaluate(&coefficients, &assignment)?;
    let residual = linalg::spectral_norm(&(fitted - target));
    if residual > DECOMPOSITION_TOL {
        return Err(Error::SpanDeficiency { residual });
    }
    Ok(TranslationDecomposition {
        algebra,
        coefficients,
        residual,
        max_word_len,
    })
}

fn projector_assignment(config: &KcbsConfiguration) -> Result<Assignment> {
    let mut a = Assignment::new(3);
    for (i, p) in config.projectors().into_iter().enumerate() {
        a = a.with_projector(i as u16 + 1, p)?;
    }
    Ok(a)
}

/// `B_k = ⟨k|S|0⟩` for `k = 0, 1, 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapBlocks {
    algebra: Algebra,
    blocks: [NcPoly; 3],
}

impl SwapBlocks {
    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn block(&self, k: usize) -> &NcPoly {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[NcPoly; 3] {
        &self.blocks
    }

    /// `Σ_k B_k† B_k` reduced by the rewrite rules.
    pub fn gram(&self) -> NcPoly {
        let mut out = NcPoly::zero();
        for b in &self.blocks {
            out = out.add(&self.algebra.multiply(&b.adjoint(), b));
        }
        out
    }

    /// Largest coefficient deviation of [`SwapBlocks::gram`] from `I`.
    pub fn isometry_defect(&self) -> f64 {
        self.gram().distance(&NcPoly::one())
    }
}

type PolyMat = [[NcPoly; 3]; 3];

fn poly_mat_mul(alg: &Algebra, a: &PolyMat, b: &PolyMat) -> PolyMat {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            (0..3).fold(NcPoly::zero(), |acc, k| {
                acc.add(&alg.multiply(&a[i][k], &b[k][j]))
            })
        })
    })
}

fn letter(l: Letter) -> NcPoly {
    NcPoly::from_word(Word::from_canonical(vec![l]))
}

/// Symbolic `S = T·U·V·U` with `P_A` replaced by the unitary letter `P̂`.
pub fn build_swap_blocks(decomp: &TranslationDecomposition) -> Result<SwapBlocks> {
    if decomp.residual() > DECOMPOSITION_TOL {
        return Err(Error::SpanDeficiency {
            residual: decomp.residual(),
        });
    }
    let alg = decomp.algebra();
    let zero = NcPoly::zero;
    let one = NcPoly::one();
    let p1 = letter(Letter::Proj(1));
    let p2 = letter(Letter::Proj(2));
    let q = one.sub(&p1).sub(&p2);
    let ph = letter(Letter::PHat);
    let ph2 = alg.multiply(&ph, &ph);

    let t: PolyMat = std::array::from_fn(|k| {
        std::array::from_fn(|j| {
            if (k + j) % 3 == 0 {
                one.clone()
            } else {
                zero()
            }
        })
    });
    let powers = [one.clone(), ph.clone(), ph2];
    let u: PolyMat = std::array::from_fn(|k| {
        std::array::from_fn(|j| if k == j { powers[k].clone() } else { zero() })
    });
    let v: PolyMat = std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            if a == b {
                p1.clone()
            } else if (a + 1) % 3 == b {
                p2.clone()
            } else {
                q.clone()
            }
        })
    });
    let s = poly_mat_mul(
        &alg,
        &poly_mat_mul(&alg, &poly_mat_mul(&alg, &t, &u), &v),
        &u,
    );
    let blocks = std::array::from_fn(|k| s[k][0].clone());
    Ok(SwapBlocks {
        algebra: alg,
        blocks,
    })
}

/// The linear functional `f = Σ_w f_w ⟨w⟩` plus a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveFunctional {
    terms: NcPoly,
    offset: f64,
    parts: Vec<NcPoly>,
}

impl ObjectiveFunctional {
    pub fn new(terms: NcPoly, offset: f64) -> Self {
        ObjectiveFunctional {
            parts: vec![terms.clone()],
            terms,
            offset,
        }
    }

    pub fn terms(&self) -> &NcPoly {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// State term first, then one term per measurement.
    pub fn parts(&self) -> &[NcPoly] {
        &self.parts
    }

    /// `Σ_w f_w m(w) + offset`.
    pub fn value(&self, moment: impl Fn(&Word) -> f64) -> f64 {
        self.offset + self.terms.terms().map(|(w, c)| c * moment(w)).sum::<f64>()
    }

    pub fn part_values(&self, moment: impl Fn(&Word) -> f64) -> Vec<f64> {
        self.parts
            .iter()
            .map(|p| p.terms().map(|(w, c)| c * moment(w)).sum())
            .collect()
    }

    /// `{word: coefficient}`; the offset is folded into `"I"`.
    pub fn to_json(&self) -> Result<String> {
        let mut map: BTreeMap<String, f64> = self
            .terms
            .terms()
            .map(|(w, c)| (w.to_string(), c))
            .collect();
        if self.offset != 0.0 {
            *map.entry("I".to_string()).or_insert(0.0) += self.offset;
        }
        Ok(serde_json::to_string_pretty(&map)?)
    }

    pub fn from_json(alg: &Algebra, s: &str) -> Result<Self> {
        let map: BTreeMap<String, f64> = serde_json::from_str(s)?;
        let mut terms = NcPoly::zero();
        for (k, v) in map {
            match alg.parse_word(&k)? {
                Some(w) => terms.add_term(w, v),
                None => return Err(Error::Parse(format!("word {k} is zero"))),
            }
        }
        Ok(ObjectiveFunctional::new(terms.pruned(), 0.0))
    }
}

/// `Σ_{k,k'} Re(t̄_k t_{k'}) · L·B_{k'}†B_k·R`, symmetrized.
fn overlap_poly(
    alg: &Algebra,
    blocks: &SwapBlocks,
    target: &CVec,
    left: &NcPoly,
    right: &NcPoly,
) -> NcPoly {
    let mut out = NcPoly::zero();
    for k in 0..3 {
        for kp in 0..3 {
            let weight = (target[k].conj() * target[kp]).re;
            if weight.abs() < 1e-15 {
                continue;
            }
            let inner = alg.product(&[left, &blocks.block(kp).adjoint(), blocks.block(k), right]);
            out = out.add(&inner.scale(weight));
        }
    }
    out.hermitian_part()
}

/// How each measurement term `⟨ψ'_i|σ_i|ψ'_i⟩` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementNormalization {
    /// Divided by the ideal outcome probability, so every term is 1 at the ideal point.
    #[default]
    IdealProbability,
    /// The subnormalized post-measurement overlap as written; the ideal total is `1 + Q_n`.
    Literal,
}

/// State overlap plus one normalized overlap per measurement.
pub fn objective_coefficients(
    blocks: &SwapBlocks,
    config: &KcbsConfiguration,
) -> Result<ObjectiveFunctional> {
    objective_coefficients_with(blocks, config, MeasurementNormalization::IdealProbability)
}

pub fn objective_coefficients_with(
    blocks: &SwapBlocks,
    config: &KcbsConfiguration,
    normalization: MeasurementNormalization,
) -> Result<ObjectiveFunctional> {
    let alg = blocks.algebra();
    if alg.n() != config.n() {
        return Err(Error::DimensionMismatch {
            expected: alg.n(),
            found: config.n(),
        });
    }
    let frame = Frame::from_configuration(config)?;
    let one = NcPoly::one();
    let mut parts = vec![overlap_poly(
        &alg,
        blocks,
        &frame.coordinates(config.state()),
        &one,
        &one,
    )];
    for (i, p_ideal) in config.outcome_probabilities().into_iter().enumerate() {
        if p_ideal < 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "direction {} has zero ideal probability",
                i + 1
            )));
        }
        let pi = letter(Letter::Proj(i as u16 + 1));
        let t = frame.coordinates(&config.directions()[i]);
        let scale = match normalization {
            MeasurementNormalization::IdealProbability => 1.0 / p_ideal,
            MeasurementNormalization::Literal => 1.0,
        };
        parts.push(overlap_poly(&alg, blocks, &t, &pi, &pi).scale(scale));
    }
    let terms = parts.iter().fold(NcPoly::zero(), |acc, p| acc.add(p));
    Ok(ObjectiveFunctional {
        terms,
        offset: 0.0,
        parts,
    })
}

/// A concrete state with projectors and a unitary `P̂`.
#[derive(Debug, Clone)]
pub struct Realization {
    rho: CMat,
    assignment: Assignment,
    n: usize,
}

impl Realization {
    /// `P̂` is the polar factor of `P_A` evaluated on the given projectors.
    pub fn new(
        rho: CMat,
        projectors: Vec<CMat>,
        decomp: &TranslationDecomposition,
    ) -> Result<Self> {
        let (assignment, n) = Self::projectors(&rho, projectors)?;
        let pa = evaluate(decomp.coefficients(), &assignment)?;
        let assignment = assignment.with_unitary(linalg::polar_unitary(&pa))?;
        Ok(Realization { rho, assignment, n })
    }

    pub fn with_unitary(rho: CMat, projectors: Vec<CMat>, phat: CMat) -> Result<Self> {
        let (assignment, n) = Self::projectors(&rho, projectors)?;
        Ok(Realization {
            rho,
            assignment: assignment.with_unitary(phat)?,
            n,
        })
    }

    fn projectors(rho: &CMat, projectors: Vec<CMat>) -> Result<(Assignment, usize)> {
        let d = rho.nrows();
        if rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.ncols(),
            });
        }
        let n = projectors.len();
        let mut a = Assignment::new(d);
        for (i, p) in projectors.into_iter().enumerate() {
            a = a.with_projector(i as u16 + 1, p)?;
        }
        Ok((a, n))
    }

    /// The configuration's own state and projectors.
    pub fn ideal(config: &KcbsConfiguration, decomp: &TranslationDecomposition) -> Result<Self> {
        Self::new(
            config.state_density().entries().clone(),
            config.projectors(),
            decomp,
        )
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn with_state(&self, rho: CMat) -> Result<Self> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.nrows(),
            });
        }
        Ok(Realization {
            rho,
            assignment: self.assignment.clone(),
            n: self.n,
        })
    }

    /// `Re tr(ρ w)`, the real moment shared by `w` and `w†`.
    pub fn moment(&self, w: &Word) -> Result<f64> {
        let m = self.assignment.evaluate_word(w)?;
        Ok((&self.rho * m).trace().re)
    }

    pub fn poly_moment(&self, p: &NcPoly) -> Result<f64> {
        p.terms()
            .try_fold(0.0, |acc, (w, c)| Ok(acc + c * self.moment(w)?))
    }

    /// Full `S = T·U·V·U` on `A ⊗ C³`, row index `a·3 + k`.
    pub fn swap_matrix(&self) -> Result<CMat> {
        let d = self.dim();
        let id = linalg::identity(d);
        let p1 = self.assignment.get(Letter::Proj(1))?;
        let p2 = self.assignment.get(Letter::Proj(2))?;
        let q = &id - p1 - p2;
        let ph = self.assignment.get(Letter::PHat)?;
        let x = CMat::from_fn(3, 3, |a, b| if (a + 1) % 3 == b { c(1.0) } else { c(0.0) });
        let t3 = CMat::from_fn(3, 3, |k, j| if (k + j) % 3 == 0 { c(1.0) } else { c(0.0) });
        let t = linalg::kron(&id, &t3);
        let mut u = CMat::zeros(3 * d, 3 * d);
        let mut power = id.clone();
        for k in 0..3 {
            let mut e = CMat::zeros(3, 3);
            e[(k, k)] = c(1.0);
            u += linalg::kron(&power, &e);
            power = &power * ph;
        }
        let v = linalg::kron(p1, &linalg::identity(3))
            + linalg::kron(p2, &x)
            + linalg::kron(&q, &(&x * &x));
        Ok(t * &u * v * u)
    }
}

/// Numeric check of the swap on a concrete realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapDiagnostics {
    /// Max-abs entry of `S†S − I` for the full swap.
    pub isometry_defect: f64,
    /// Max-abs entry of `Σ_k B_k†B_k − I` with the symbolic blocks evaluated.
    pub block_defect: f64,
    /// Largest deviation between the numeric column `S|·⟩|0⟩` and the evaluated blocks.
    pub block_mismatch: f64,
    /// State term then one term per measurement.
    pub terms: Vec<f64>,
    pub total: f64,
}

/// Evaluates the swap numerically and reports each fidelity term directly.
pub fn numeric_swap_check(
    realization: &Realization,
    blocks: &SwapBlocks,
    config: &KcbsConfiguration,
) -> Result<SwapDiagnostics> {
    let d = realization.dim();
    let s = realization.swap_matrix()?;
    let isometry_defect = linalg::max_abs(&(s.adjoint() * &s - linalg::identity(3 * d)));

    let evaluated: Vec<CMat> = blocks
        .blocks()
        .iter()
        .map(|b| evaluate(b, realization.assignment()))
        .collect::<Result<_>>()?;
    let mut gram = CMat::zeros(d, d);
    for b in &evaluated {
        gram += b.adjoint() * b;
    }
    let block_defect = linalg::max_abs(&(gram - linalg::identity(d)));
    let mut block_mismatch: f64 = 0.0;
    for (k, b) in evaluated.iter().enumerate() {
        let column = CMat::from_fn(d, d, |r, col| s[(r * 3 + k, col * 3)]);
        block_mismatch = block_mismatch.max(linalg::max_abs(&(column - b)));
    }

    let frame = Frame::from_configuration(config)?;
    let fidelity = |rho: &CMat, target: &CVec| -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            for kp in 0..3 {
                let sigma = (&evaluated[k] * rho * evaluated[kp].adjoint()).trace();
                total += target[k].conj() * sigma * target[kp];
            }
        }
        total.re
    };
    let rho = realization.rho();
    let mut terms = vec![fidelity(rho, &frame.coordinates(config.state()))];
    for (i, p_ideal) in config.outcome_probabilities().into_iter().enumerate() {
        let pi = realization.assignment().get(Letter::Proj(i as u16 + 1))?;
        let post = pi * rho * pi;
        terms.push(fidelity(&post, &frame.coordinates(&config.directions()[i])) / p_ideal);
    }
    let total = terms.iter().sum();
    Ok(SwapDiagnostics {
        isometry_defect,
        block_defect,
        block_mismatch,
        terms,
        total,
    })
}
