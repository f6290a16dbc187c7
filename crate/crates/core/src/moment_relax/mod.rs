//! Moment and localizing matrices, statistic constraints and problem assembly.
//!
//! Moments are real: `⟨w⟩` and `⟨w†⟩` share one variable, the class of the
//! Hermitian representative. Class `0` is always the identity and is fixed to one.

mod sdpa;

pub use sdpa::{
    export_sdpa, manifest_path, parse_sdpa, write_sdpa, SdpaEntry, SdpaFile, SdpaManifest,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::isometry::{
    build_swap_blocks, decompose_translation, objective_coefficients_with,
    MeasurementNormalization, ObjectiveFunctional, Realization, TranslationDecomposition,
    DEFAULT_TRANSLATION_LEN,
};
use crate::kcbs_model::ideal_configuration;
use crate::word_algebra::{Algebra, Letter, NcPoly, Word};

/// What to do when a required word cannot be written as `v†w` inside the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClosurePolicy {
    /// Add `(head†, tail)` of the balanced split of every required word.
    #[default]
    Extend,
    /// Report the offending words.
    Strict,
}

/// Ordered, duplicate-free list of canonical words indexing the moment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentIndex {
    level: usize,
    with_unitary: bool,
    words: Vec<Word>,
    base_len: usize,
}

impl MomentIndex {
    /// All canonical words of length `≤ level`, closed over `required`.
    pub fn build(
        alg: &Algebra,
        level: usize,
        with_unitary: bool,
        required: &[Word],
        policy: ClosurePolicy,
    ) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidParameter("level must be >= 1".into()));
        }
        let base = alg.words_up_to(level, with_unitary);
        let base_len = base.len();
        let mut set: BTreeSet<Word> = base.into_iter().collect();
        match policy {
            ClosurePolicy::Extend => {
                for w in required {
                    let (head, tail) = w.split_at(w.len().div_ceil(2));
                    set.insert(head.adjoint());
                    set.insert(tail);
                }
            }
            ClosurePolicy::Strict => {
                let missing: Vec<String> = required
                    .iter()
                    .filter(|w| factor_in(&set, w).is_none())
                    .map(|w| w.to_string())
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::Unfactorable(missing));
                }
            }
        }
        Ok(MomentIndex {
            level,
            with_unitary,
            words: set.into_iter().collect(),
            base_len,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn with_unitary(&self) -> bool {
        self.with_unitary
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words added beyond the full level-`k` set.
    pub fn extension_len(&self) -> usize {
        self.words.len() - self.base_len
    }

    pub fn position(&self, w: &Word) -> Option<usize> {
        self.words.binary_search(w).ok()
    }

    /// Positions `(a, b)` with `words[a]† · words[b] = w` by a contiguous split.
    pub fn factorization(&self, w: &Word) -> Option<(usize, usize)> {
        (0..=w.len()).find_map(|s| {
            let (head, tail) = w.split_at(s);
            Some((self.position(&head.adjoint())?, self.position(&tail)?))
        })
    }
}

fn factor_in(set: &BTreeSet<Word>, w: &Word) -> Option<usize> {
    (0..=w.len()).find(|&s| {
        let (head, tail) = w.split_at(s);
        set.contains(&head.adjoint()) && set.contains(&tail)
    })
}

/// `k` index over the full alphabet, extended to factor the objective if given.
pub fn build_index(
    alg: &Algebra,
    level: usize,
    objective: Option<&ObjectiveFunctional>,
    policy: ClosurePolicy,
) -> Result<MomentIndex> {
    let required: Vec<Word> = objective
        .map(|o| o.terms().terms().map(|(w, _)| w.clone()).collect())
        .unwrap_or_default();
    MomentIndex::build(alg, level, true, &required, policy)
}

/// Moment variables keyed by Hermitian representative; class `0` is `I`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentClasses {
    reps: Vec<Word>,
    lookup: HashMap<Word, usize>,
}

impl MomentClasses {
    fn new() -> Self {
        let mut c = MomentClasses::default();
        c.intern(&Word::identity());
        c
    }

    fn intern(&mut self, w: &Word) -> usize {
        let rep = w.hermitian_representative();
        if let Some(&id) = self.lookup.get(&rep) {
            return id;
        }
        let id = self.reps.len();
        self.lookup.insert(rep.clone(), id);
        self.reps.push(rep);
        id
    }

    /// Class of `w` or `w†`.
    pub fn id(&self, w: &Word) -> Option<usize> {
        self.lookup.get(&w.hermitian_representative()).copied()
    }

    pub fn representative(&self, id: usize) -> &Word {
        &self.reps[id]
    }

    pub fn representatives(&self) -> &[Word] {
        &self.reps
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    /// Sparse coefficients of `p` over classes; fails on an unknown word.
    pub fn linearize(&self, p: &NcPoly) -> Result<Vec<(usize, f64)>> {
        let mut acc: Vec<(usize, f64)> = Vec::with_capacity(p.len());
        let mut missing = Vec::new();
        for (w, c) in p.terms() {
            match self.id(w) {
                Some(id) => acc.push((id, c)),
                None => missing.push(w.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Unfactorable(missing));
        }
        Ok(merge(acc))
    }
}

fn merge(mut terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (id, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == id => last.1 += c,
            _ => out.push((id, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Cell-to-class map of `Γ`; `None` cells are pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    size: usize,
    cells: Vec<Option<u32>>,
}

impl MomentMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell(&self, a: usize, b: usize) -> Option<usize> {
        self.cells[a * self.size + b].map(|c| c as usize)
    }

    /// Number of cells with `a ≤ b` that are pinned to zero.
    pub fn zero_cells(&self) -> usize {
        (0..self.size)
            .flat_map(|a| (a..self.size).map(move |b| (a, b)))
            .filter(|&(a, b)| self.cell(a, b).is_none())
            .count()
    }

    pub fn dense(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |a, b| {
            self.cell(a, b).map_or(0.0, |c| y[c])
        })
    }
}

/// Partitions the cells of `Γ` by the canonical form of `v†w`.
pub fn build_moment_constraints(
    alg: &Algebra,
    index: &MomentIndex,
) -> (MomentClasses, MomentMatrix) {
    let mut classes = MomentClasses::new();
    let n = index.len();
    let mut cells = vec![None; n * n];
    let words = index.words();
    for a in 0..n {
        for b in a..n {
            if let Some(w) = alg.gram_word(&words[a], &words[b]) {
                let id = classes.intern(&w) as u32;
                cells[a * n + b] = Some(id);
                cells[b * n + a] = Some(id);
            }
        }
    }
    (classes, MomentMatrix { size: n, cells })
}

/// `Γ(P̂†P_A)` over a small index, stored as the symmetric part of each entry.
///
/// A real positive semidefinite block is symmetric, so the skew part of every
/// off-diagonal entry is pinned to zero by [`LocalizingBlock::hermiticity`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizingBlock {
    words: Vec<Word>,
    entries: Vec<Vec<(usize, f64)>>,
    hermiticity: Vec<LinearConstraint>,
}

impl LocalizingBlock {
    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn entry(&self, a: usize, b: usize) -> &[(usize, f64)] {
        &self.entries[a * self.words.len() + b]
    }

    /// `⟨v_a† X v_b⟩ = ⟨v_b† X v_a⟩` for every `a < b` where the two sides differ.
    pub fn hermiticity(&self) -> &[LinearConstraint] {
        &self.hermiticity
    }

    pub fn dense(&self, y: &[f64]) -> DMatrix<f64> {
        let m = self.size();
        DMatrix::from_fn(m, m, |a, b| {
            self.entry(a, b).iter().map(|&(c, v)| v * y[c]).sum()
        })
    }
}

/// `P̂† · P_A`, the operator whose localizing matrix is constrained.
pub fn localizing_operator(decomp: &TranslationDecomposition) -> NcPoly {
    let alg = decomp.algebra();
    let ph_adj = NcPoly::from_word(alg.canonicalize(&[Letter::PHatAdj]).expect("non-zero"));
    alg.multiply(&ph_adj, decomp.coefficients())
}

/// Raw entries `v† X w` for `v, w` over the given words.
pub fn localizing_polynomials(alg: &Algebra, words: &[Word], x: &NcPoly) -> Vec<NcPoly> {
    let mut out = Vec::with_capacity(words.len() * words.len());
    for v in words {
        let left = NcPoly::from_word(v.adjoint());
        for w in words {
            out.push(alg.product(&[&left, x, &NcPoly::from_word(w.clone())]));
        }
    }
    out
}

/// Links the localizing entries to moment classes.
pub fn build_localizing(
    alg: &Algebra,
    decomp: &TranslationDecomposition,
    words: &[Word],
    classes: &MomentClasses,
) -> Result<LocalizingBlock> {
    let raw = localizing_polynomials(alg, words, &localizing_operator(decomp));
    let m = words.len();
    let mut entries = Vec::with_capacity(m * m);
    let mut hermiticity = Vec::new();
    for a in 0..m {
        for b in 0..m {
            let sym = raw[a * m + b].add(&raw[b * m + a]).scale(0.5);
            entries.push(classes.linearize(&sym)?);
            if a < b {
                let skew = raw[a * m + b].add(&raw[b * m + a].scale(-1.0));
                let coeffs: Vec<(usize, f64)> = classes
                    .linearize(&skew)?
                    .into_iter()
                    .filter(|&(_, v)| v.abs() > 1e-12)
                    .collect();
                if !coeffs.is_empty() {
                    hermiticity.push(LinearConstraint::equal(
                        format!("localizing-hermitian[{a},{b}]"),
                        coeffs,
                        0.0,
                    ));
                }
            }
        }
    }
    Ok(LocalizingBlock {
        words: words.to_vec(),
        entries,
        hermiticity,
    })
}

/// Largest `ℓ ≤ k − 1` whose localizing words fit in `Γ`'s length range, at least 0.
pub fn default_localizing_level(level: usize, translation_len: usize) -> usize {
    (0..level)
        .rev()
        .find(|&l| 2 * l + 1 + translation_len <= 2 * level)
        .unwrap_or(0)
}

/// Observed statistics imposed on `⟨Π_i⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Statistic {
    None,
    /// `Σ⟨Π_i⟩ = c`.
    Sum {
        c: f64,
    },
    /// `⟨Π_i⟩ = c/n` for every `i`.
    Equal {
        c: f64,
    },
    /// `⟨Π_i⟩ = p_i`.
    PerMeasurement {
        p: Vec<f64>,
    },
    /// `lower ≤ Σ⟨Π_i⟩ ≤ upper`.
    Interval {
        lower: f64,
        upper: f64,
    },
}

impl Statistic {
    pub fn validate(&self, n: usize) -> Result<()> {
        let nf = n as f64;
        let in_range = |v: f64| (0.0..=nf).contains(&v);
        match self {
            Statistic::None => Ok(()),
            Statistic::Sum { c } | Statistic::Equal { c } if !in_range(*c) => Err(
                Error::InconsistentStatistics(format!("c = {c} outside [0, {n}]")),
            ),
            Statistic::Sum { .. } | Statistic::Equal { .. } => Ok(()),
            Statistic::PerMeasurement { p } => {
                if p.len() != n {
                    return Err(Error::InconsistentStatistics(format!(
                        "{} values for {n} measurements",
                        p.len()
                    )));
                }
                if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::InconsistentStatistics(format!(
                        "probability {bad} outside [0, 1]"
                    )));
                }
                let total: f64 = p.iter().sum();
                if !in_range(total) {
                    return Err(Error::InconsistentStatistics(format!(
                        "sum {total} outside [0, {n}]"
                    )));
                }
                Ok(())
            }
            Statistic::Interval { lower, upper } => {
                if !(lower <= upper && in_range(*lower) && in_range(*upper)) {
                    return Err(Error::InconsistentStatistics(format!(
                        "interval [{lower}, {upper}] invalid for n = {n}"
                    )));
                }
                Ok(())
            }
        }
    }

    fn constraints(&self, classes: &MomentClasses, n: usize) -> Result<Vec<LinearConstraint>> {
        let proj = |i: usize| -> Result<usize> {
            let w = Word::from_canonical(vec![Letter::Proj(i as u16 + 1)]);
            classes
                .id(&w)
                .ok_or_else(|| Error::Unfactorable(vec![w.to_string()]))
        };
        let all = || -> Result<Vec<(usize, f64)>> { (0..n).map(|i| Ok((proj(i)?, 1.0))).collect() };
        Ok(match self {
            Statistic::None => Vec::new(),
            Statistic::Sum { c } => vec![LinearConstraint::equal("sum", all()?, *c)],
            Statistic::Equal { c } => (0..n)
                .map(|i| {
                    Ok(LinearConstraint::equal(
                        format!("p{}", i + 1),
                        vec![(proj(i)?, 1.0)],
                        c / n as f64,
                    ))
                })
                .collect::<Result<_>>()?,
            Statistic::PerMeasurement { p } => (0..n)
                .map(|i| {
                    Ok(LinearConstraint::equal(
                        format!("p{}", i + 1),
                        vec![(proj(i)?, 1.0)],
                        p[i],
                    ))
                })
                .collect::<Result<_>>()?,
            Statistic::Interval { lower, upper } => vec![LinearConstraint {
                label: "sum".into(),
                coeffs: all()?,
                lower: *lower,
                upper: *upper,
            }],
        })
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::None => write!(f, "none"),
            Statistic::Sum { c } => write!(f, "sum={c}"),
            Statistic::Equal { c } => write!(f, "equal={c}"),
            Statistic::PerMeasurement { p } => write!(f, "per={p:?}"),
            Statistic::Interval { lower, upper } => write!(f, "interval=[{lower},{upper}]"),
        }
    }
}

/// `lower ≤ Σ coeffs·y ≤ upper`; equal bounds make an equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub label: String,
    pub coeffs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl LinearConstraint {
    pub fn equal(label: impl Into<String>, coeffs: Vec<(usize, f64)>, value: f64) -> Self {
        LinearConstraint {
            label: label.into(),
            coeffs,
            lower: value,
            upper: value,
        }
    }

    pub fn is_equality(&self) -> bool {
        self.lower == self.upper
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, v)| v * y[c]).sum()
    }

    /// Distance of the constraint value from `[lower, upper]`.
    pub fn violation(&self, y: &[f64]) -> f64 {
        let v = self.value(y);
        (self.lower - v).max(v - self.upper).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Options for [`assemble_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssembleOptions {
    /// `None` picks [`default_localizing_level`]; the localizing block is skipped when `include_localizing` is false.
    pub localizing_level: Option<usize>,
    pub include_localizing: bool,
    pub closure: ClosurePolicy,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            localizing_level: None,
            include_localizing: true,
            closure: ClosurePolicy::Extend,
        }
    }
}

/// A complete moment SDP.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblem {
    n: usize,
    level: usize,
    sense: Sense,
    index: MomentIndex,
    classes: MomentClasses,
    gamma: MomentMatrix,
    localizing: Option<LocalizingBlock>,
    objective: Vec<(usize, f64)>,
    offset: f64,
    constraints: Vec<LinearConstraint>,
    statistic: Statistic,
    provenance: String,
}

/// Sizes reported next to a problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProblemCounts {
    pub index_size: usize,
    pub index_extension: usize,
    pub classes: usize,
    /// Cells `(a, b)` with `a < b`.
    pub off_diagonal_cells: usize,
    /// Pairwise equalities implied by the class partition (upper triangle incl. diagonal, minus classes and zero pins).
    pub equality_relations: usize,
    pub zero_cells: usize,
    pub localizing_size: usize,
    pub localizing_cells: usize,
    pub linear_constraints: usize,
}

impl MomentProblem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn index(&self) -> &MomentIndex {
        &self.index
    }

    pub fn classes(&self) -> &MomentClasses {
        &self.classes
    }

    pub fn gamma(&self) -> &MomentMatrix {
        &self.gamma
    }

    pub fn localizing(&self) -> Option<&LocalizingBlock> {
        self.localizing.as_ref()
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn statistic(&self) -> &Statistic {
        &self.statistic
    }

    /// SHA-256 over the problem data, hex encoded.
    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn counts(&self) -> ProblemCounts {
        let n = self.gamma.size;
        let upper = n * (n + 1) / 2;
        let zero = self.gamma.zero_cells();
        ProblemCounts {
            index_size: n,
            index_extension: self.index.extension_len(),
            classes: self.classes.len(),
            off_diagonal_cells: n * (n - 1) / 2,
            equality_relations: upper - zero - self.classes.len(),
            zero_cells: zero,
            localizing_size: self.localizing.as_ref().map_or(0, |l| l.size()),
            localizing_cells: self
                .localizing
                .as_ref()
                .map_or(0, |l| l.size() * (l.size() + 1) / 2),
            linear_constraints: self.constraints.len(),
        }
    }

    /// `Σ f_c y_c + offset`.
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.offset + self.objective.iter().map(|&(c, v)| v * y[c]).sum::<f64>()
    }

    /// Moment vector of a concrete realization, one entry per class.
    pub fn moments_from(&self, realization: &Realization) -> Result<Vec<f64>> {
        self.classes
            .reps
            .iter()
            .map(|w| realization.moment(w))
            .collect()
    }

    /// Moment vector from any real-valued word functional.
    pub fn moments_with(&self, f: impl Fn(&Word) -> f64) -> Vec<f64> {
        self.classes.reps.iter().map(f).collect()
    }

    /// Equality violations, pin violations and PSD margins of a candidate vector.
    pub fn certify(&self, y: &[f64]) -> Result<Certificate> {
        if y.len() != self.classes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.classes.len(),
                found: y.len(),
            });
        }
        let normalization = (y[0] - 1.0).abs();
        let mut max_violation = normalization;
        let mut worst = "normalization".to_string();
        for c in &self.constraints {
            let v = c.violation(y);
            if v > max_violation {
                max_violation = v;
                worst = c.label.clone();
            }
        }
        let gamma_min = min_eig(self.gamma.dense(y));
        let localizing_min = self.localizing.as_ref().map(|l| min_eig(l.dense(y)));
        Ok(Certificate {
            max_equality_violation: max_violation,
            worst_constraint: worst,
            gamma_min_eigenvalue: gamma_min,
            localizing_min_eigenvalue: localizing_min,
            objective: self.objective_value(y),
        })
    }
}

fn min_eig(m: DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Residual report produced by [`MomentProblem::certify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub max_equality_violation: f64,
    pub worst_constraint: String,
    pub gamma_min_eigenvalue: f64,
    pub localizing_min_eigenvalue: Option<f64>,
    pub objective: f64,
}

impl Certificate {
    /// All equalities within `tol` and all blocks PSD up to `−tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_equality_violation <= tol
            && self.gamma_min_eigenvalue >= -tol
            && self.localizing_min_eigenvalue.is_none_or(|v| v >= -tol)
    }
}

fn provenance_hash(
    n: usize,
    level: usize,
    sense: Sense,
    index: &MomentIndex,
    objective: &[(usize, f64)],
    offset: f64,
    constraints: &[LinearConstraint],
    localizing: Option<&LocalizingBlock>,
) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "n={n};k={level};sense={sense:?};offset={offset:e}\n"
    ));
    for w in index.words() {
        h.update(w.to_string());
        h.update(b",");
    }
    h.update(b"\nobjective:");
    for (c, v) in objective {
        h.update(format!("{c}:{v:e},"));
    }
    for c in constraints {
        h.update(format!(
            "\n{}:{:?}:{:e}:{:e}",
            c.label, c.coeffs, c.lower, c.upper
        ));
    }
    if let Some(l) = localizing {
        h.update(b"\nlocalizing:");
        for w in l.words() {
            h.update(w.to_string());
            h.update(b",");
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The fidelity minimization with default options.
pub fn assemble(
    objective: &ObjectiveFunctional,
    decomp: &TranslationDecomposition,
    statistic: &Statistic,
    level: usize,
) -> Result<MomentProblem> {
    assemble_with(
        objective,
        decomp,
        statistic,
        level,
        &AssembleOptions::default(),
    )
}

/// `min f(y)` subject to `Γ ⪰ 0`, `Γ(P̂†P_A) ⪰ 0` and the statistic.
pub fn assemble_with(
    objective: &ObjectiveFunctional,
    decomp: &TranslationDecomposition,
    statistic: &Statistic,
    level: usize,
    options: &AssembleOptions,
) -> Result<MomentProblem> {
    let alg = decomp.algebra();
    statistic.validate(alg.n())?;

    let mut required: Vec<Word> = objective.terms().terms().map(|(w, _)| w.clone()).collect();
    let loc_words = if options.include_localizing {
        let l = options
            .localizing_level
            .unwrap_or_else(|| default_localizing_level(level, decomp.max_word_len()));
        let words = alg.words_up_to(l, true);
        for p in localizing_polynomials(&alg, &words, &localizing_operator(decomp)) {
            required.extend(p.terms().map(|(w, _)| w.clone()));
        }
        Some(words)
    } else {
        None
    };
    required.sort();
    required.dedup();

    let index = MomentIndex::build(&alg, level, true, &required, options.closure)?;
    let (classes, gamma) = build_moment_constraints(&alg, &index);
    let localizing = loc_words
        .map(|w| build_localizing(&alg, decomp, &w, &classes))
        .transpose()?;
    let obj = classes.linearize(objective.terms())?;
    let mut constraints = statistic.constraints(&classes, alg.n())?;
    if let Some(l) = &localizing {
        constraints.extend_from_slice(l.hermiticity());
    }
    let provenance = provenance_hash(
        alg.n(),
        level,
        Sense::Minimize,
        &index,
        &obj,
        objective.offset(),
        &constraints,
        localizing.as_ref(),
    );
    Ok(MomentProblem {
        n: alg.n(),
        level,
        sense: Sense::Minimize,
        index,
        classes,
        gamma,
        localizing,
        objective: obj,
        offset: objective.offset(),
        constraints,
        statistic: statistic.clone(),
        provenance,
    })
}

/// The fidelity minimization for the ideal `n`-cycle configuration, translation words of length ≤ 3.
pub fn assemble_fidelity(n: usize, level: usize, statistic: &Statistic) -> Result<MomentProblem> {
    assemble_fidelity_with(
        n,
        level,
        statistic,
        MeasurementNormalization::IdealProbability,
    )
}

pub fn assemble_fidelity_with(
    n: usize,
    level: usize,
    statistic: &Statistic,
    normalization: MeasurementNormalization,
) -> Result<MomentProblem> {
    let decomp = decompose_translation(n, DEFAULT_TRANSLATION_LEN)?;
    let blocks = build_swap_blocks(&decomp)?;
    let objective = objective_coefficients_with(&blocks, &ideal_configuration(n)?, normalization)?;
    assemble(&objective, &decomp, statistic, level)
}

/// Letters allowed in the witness-maximization index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WitnessAlphabet {
    /// Projectors plus `P̂`, `P̂†`.
    #[default]
    Full,
    ProjectorOnly,
}

/// `max Σ⟨Π_i⟩` subject to `Γ ⪰ 0` only.
pub fn assemble_max_witness(
    n: usize,
    level: usize,
    alphabet: WitnessAlphabet,
) -> Result<MomentProblem> {
    let alg = Algebra::new(n)?;
    let with_unitary = alphabet == WitnessAlphabet::Full;
    let index = MomentIndex::build(&alg, level, with_unitary, &[], ClosurePolicy::Strict)?;
    let (classes, gamma) = build_moment_constraints(&alg, &index);
    let objective: Vec<(usize, f64)> = (1..=n as u16)
        .map(|i| {
            let w = Word::from_canonical(vec![Letter::Proj(i)]);
            (
                classes.id(&w).expect("level >= 1 contains every projector"),
                1.0,
            )
        })
        .collect();
    let objective = merge(objective);
    let provenance = provenance_hash(
        n,
        level,
        Sense::Maximize,
        &index,
        &objective,
        0.0,
        &[],
        None,
    );
    Ok(MomentProblem {
        n,
        level,
        sense: Sense::Maximize,
        index,
        classes,
        gamma,
        localizing: None,
        objective,
        offset: 0.0,
        constraints: Vec::new(),
        statistic: Statistic::None,
        provenance,
    })
}

/// A problem with a zero objective and only `Γ ⪰ 0`, useful as a solver smoke test.
pub fn assemble_feasibility(n: usize, level: usize) -> Result<MomentProblem> {
    let mut p = assemble_max_witness(n, level, WitnessAlphabet::ProjectorOnly)?;
    p.objective.clear();
    p.sense = Sense::Minimize;
    p.provenance = provenance_hash(n, level, p.sense, &p.index, &[], 0.0, &[], None);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isometry::{build_swap_blocks, decompose_translation, objective_coefficients};
    use crate::kcbs_model;

    struct Fixture {
        obj: ObjectiveFunctional,
        dec: TranslationDecomposition,
        real: Realization,
    }

    fn fixture() -> Fixture {
        let cfg = kcbs_model::ideal_configuration(5).unwrap();
        let dec = decompose_translation(5, 3).unwrap();
        let blocks = build_swap_blocks(&dec).unwrap();
        let obj = objective_coefficients(&blocks, &cfg).unwrap();
        let real = Realization::ideal(&cfg, &dec).unwrap();
        Fixture { obj, dec, real }
    }

    #[test]
    fn level_one_index_has_eight_words() {
        let alg = Algebra::new(5).unwrap();
        let idx = build_index(&alg, 1, None, ClosurePolicy::Strict).unwrap();
        assert_eq!(idx.len(), 8);
        assert_eq!(idx.words()[0], Word::identity());
    }

    #[test]
    fn projector_only_level_two() {
        let alg = Algebra::new(5).unwrap();
        let idx = MomentIndex::build(&alg, 2, false, &[], ClosurePolicy::Strict).unwrap();
        assert_eq!(idx.len(), 16);
    }

    #[test]
    fn strict_policy_reports_unfactorable_words() {
        let f = fixture();
        let alg = f.dec.algebra();
        match build_index(&alg, 1, Some(&f.obj), ClosurePolicy::Strict) {
            Err(Error::Unfactorable(words)) => assert!(!words.is_empty()),
            other => panic!("expected unfactorable error, got {other:?}"),
        }
        let idx = build_index(&alg, 3, Some(&f.obj), ClosurePolicy::Strict).unwrap();
        assert_eq!(idx.len(), 192);
    }

    #[test]
    fn extension_factors_every_objective_word() {
        let f = fixture();
        let alg = f.dec.algebra();
        for k in 1..=3 {
            let idx = build_index(&alg, k, Some(&f.obj), ClosurePolicy::Extend).unwrap();
            for (w, _) in f.obj.terms().terms() {
                let (a, b) = idx.factorization(w).expect("factorable");
                assert_eq!(
                    alg.gram_word(&idx.words()[a], &idx.words()[b]).as_ref(),
                    Some(w)
                );
            }
        }
    }

    #[test]
    fn cell_classes_and_pins() {
        let alg = Algebra::new(5).unwrap();
        let idx = MomentIndex::build(&alg, 1, true, &[], ClosurePolicy::Strict).unwrap();
        let (classes, gamma) = build_moment_constraints(&alg, &idx);
        let pos = |s: &str| idx.position(&alg.parse_word(s).unwrap().unwrap()).unwrap();
        let i = pos("I");
        let p1 = pos("P1");
        let p2 = pos("P2");
        assert_eq!(gamma.cell(p1, p1), gamma.cell(i, p1));
        assert_eq!(gamma.cell(p1, p2), None);
        assert_eq!(gamma.cell(i, i), Some(0));
        assert_eq!(classes.representative(0), &Word::identity());
        let ph = pos("Ph");
        let phd = pos("Ph†");
        // Ph†·Ph = I
        assert_eq!(gamma.cell(ph, ph), Some(0));
        assert_eq!(gamma.cell(i, ph), gamma.cell(phd, i));
    }

    #[test]
    fn localizing_level_rule() {
        assert_eq!(default_localizing_level(1, 3), 0);
        assert_eq!(default_localizing_level(2, 3), 0);
        assert_eq!(default_localizing_level(3, 3), 1);
        assert_eq!(default_localizing_level(4, 3), 2);
        assert_eq!(default_localizing_level(3, 1), 2);
    }

    #[test]
    fn ideal_moments_are_feasible_at_levels_one_and_two() {
        let f = fixture();
        for k in 1..=2 {
            let p = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 5f64.sqrt() }, k).unwrap();
            let y = p.moments_from(&f.real).unwrap();
            let cert = p.certify(&y).unwrap();
            assert!(cert.is_feasible(1e-8), "{cert:?}");
            assert!((cert.objective - 6.0).abs() < 1e-6);
        }
    }

    #[test]
    fn skew_part_of_localizing_is_pinned_and_vanishes_on_ideal() {
        let f = fixture();
        let alg = f.dec.algebra();
        let words = alg.words_up_to(1, true);
        let x = localizing_operator(&f.dec);
        let raw = localizing_polynomials(&alg, &words, &x);
        let m = words.len();
        let skew: Vec<(usize, usize)> = (0..m)
            .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
            .filter(|&(a, b)| {
                let d = raw[a * m + b].add(&raw[b * m + a].scale(-1.0));
                let nonzero = d
                    .terms()
                    .any(|(w, c)| (c + d.coefficient(&w.adjoint())).abs() > 1e-12);
                nonzero
            })
            .collect();
        assert!(!skew.is_empty());
        for &(a, b) in &skew {
            let d = raw[a * m + b].add(&raw[b * m + a].scale(-1.0));
            assert!(f.real.poly_moment(&d).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn localizing_origin_cell() {
        let f = fixture();
        let p = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 2.0 }, 2).unwrap();
        let loc = p.localizing().unwrap();
        assert_eq!(loc.size(), 1);
        let y = p.moments_from(&f.real).unwrap();
        let direct = f.real.poly_moment(&localizing_operator(&f.dec)).unwrap();
        assert!((loc.dense(&y)[(0, 0)] - direct).abs() < 1e-12);
        // at the ideal point P̂†P_A = I
        assert!((direct - 1.0).abs() < 1e-8);
    }

    #[test]
    fn statistic_modes() {
        let f = fixture();
        let eq = assemble(&f.obj, &f.dec, &Statistic::Equal { c: 2.0 }, 1).unwrap();
        assert_eq!(eq.constraints().len(), 5);
        assert!(eq
            .constraints()
            .iter()
            .all(|c| (c.lower - 0.4).abs() < 1e-15));
        let sum = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 2.0 }, 1).unwrap();
        assert_eq!(sum.constraints().len(), 1);
        let bad = Statistic::PerMeasurement { p: vec![0.9; 5] };
        assert!(bad.validate(5).is_ok());
        assert!(Statistic::PerMeasurement { p: vec![1.2; 5] }
            .validate(5)
            .is_err());
        assert!(Statistic::Sum { c: 5.5 }.validate(5).is_err());
        assert!(Statistic::Interval {
            lower: 2.2,
            upper: 2.1
        }
        .validate(5)
        .is_err());
        assert!(matches!(
            assemble(&f.obj, &f.dec, &Statistic::Sum { c: -1.0 }, 1),
            Err(Error::InconsistentStatistics(_))
        ));
    }

    #[test]
    fn certify_detects_perturbations() {
        let f = fixture();
        let p = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 5f64.sqrt() }, 1).unwrap();
        let mut y = p.moments_from(&f.real).unwrap();
        let p1 = p
            .classes()
            .id(&Word::from_canonical(vec![Letter::Proj(1)]))
            .unwrap();
        y[p1] += 0.1;
        let cert = p.certify(&y).unwrap();
        assert!(cert.max_equality_violation >= 0.1 - 1e-9);
        assert!(p.certify(&y[1..]).is_err());
    }

    #[test]
    fn witness_problem_is_symmetric_in_projectors() {
        let p = assemble_max_witness(5, 1, WitnessAlphabet::Full).unwrap();
        assert_eq!(p.index().len(), 8);
        assert_eq!(p.sense(), Sense::Maximize);
        assert_eq!(p.objective().len(), 5);
        let q = assemble_max_witness(5, 1, WitnessAlphabet::ProjectorOnly).unwrap();
        assert_eq!(q.index().len(), 6);
    }

    #[test]
    fn provenance_is_stable_and_sensitive() {
        let f = fixture();
        let a = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 2.1 }, 1).unwrap();
        let b = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 2.1 }, 1).unwrap();
        let c = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 2.2 }, 1).unwrap();
        assert_eq!(a.provenance(), b.provenance());
        assert_ne!(a.provenance(), c.provenance());
        assert_eq!(a.provenance().len(), 64);
    }

    #[test]
    fn matrices_are_symmetric() {
        let f = fixture();
        let p = assemble(&f.obj, &f.dec, &Statistic::Sum { c: 2.1 }, 2).unwrap();
        let g = p.gamma();
        for a in 0..g.size() {
            for b in 0..g.size() {
                assert_eq!(g.cell(a, b), g.cell(b, a));
            }
        }
    }
}
