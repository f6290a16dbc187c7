use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fidelity::squared_fidelity_pure;
use crate::error::{Error, Result};
use crate::kcbs_model::DensityMatrix;
use crate::linalg::{self, c, CMat, CVec};

/// Tag for the nine-state probe set below.
pub const BASIS_VERSION: &str = "qutrit-9-v1";

/// `|0⟩, |1⟩, |2⟩` and the six two-level superpositions `(|a⟩ + |b⟩)/√2`, `(|a⟩ + i|b⟩)/√2`.
pub fn probe_states() -> [CVec; 9] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = |x: [Complex64; 3]| CVec::from_column_slice(&x);
    let (o, z, i) = (c(1.0), c(0.0), Complex64::new(0.0, s));
    [
        v([o, z, z]),
        v([z, o, z]),
        v([z, z, o]),
        v([c(s), c(s), z]),
        v([c(s), i, z]),
        v([c(s), z, c(s)]),
        v([c(s), z, i]),
        v([z, c(s), c(s)]),
        v([z, c(s), i]),
    ]
}

/// Real coordinates of a Hermitian 3×3 matrix: three diagonals, then `(Re, Im)` of `01, 02, 12`.
fn to_coords(m: &CMat) -> DVector<f64> {
    DVector::from_vec(vec![
        m[(0, 0)].re,
        m[(1, 1)].re,
        m[(2, 2)].re,
        m[(0, 1)].re,
        m[(0, 1)].im,
        m[(0, 2)].re,
        m[(0, 2)].im,
        m[(1, 2)].re,
        m[(1, 2)].im,
    ])
}

fn from_coords(x: &DVector<f64>) -> CMat {
    let mut m = CMat::zeros(3, 3);
    for k in 0..3 {
        m[(k, k)] = c(x[k]);
    }
    for (slot, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        let z = Complex64::new(x[3 + 2 * slot], x[4 + 2 * slot]);
        m[(a, b)] = z;
        m[(b, a)] = z.conj();
    }
    m
}

/// Row `j` maps coordinates of `X` to `⟨ψ_j|X|ψ_j⟩`.
fn design() -> &'static (DMatrix<f64>, DMatrix<f64>) {
    static DESIGN: OnceLock<(DMatrix<f64>, DMatrix<f64>)> = OnceLock::new();
    DESIGN.get_or_init(|| {
        let probes = probe_states();
        let mut a = DMatrix::zeros(9, 9);
        for col in 0..9 {
            let mut e = DVector::zeros(9);
            e[col] = 1.0;
            let basis_elem = from_coords(&e);
            for (row, psi) in probes.iter().enumerate() {
                a[(row, col)] = psi.dotc(&(&basis_elem * psi)).re;
            }
        }
        let inv = a
            .clone()
            .try_inverse()
            .expect("the nine probe states are informationally complete");
        (a, inv)
    })
}

/// `⟨ψ_j|X|ψ_j⟩` over the probe states.
pub fn probe_expectations(x: &CMat) -> [f64; 9] {
    let (a, _) = design();
    let f = a * to_coords(x);
    std::array::from_fn(|k| f[k])
}

fn check_frequencies(f: &[f64]) -> Result<()> {
    if f.len() != 9 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            found: f.len(),
        });
    }
    if let Some(bad) = f.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::InvalidParameter(format!(
            "frequency {bad} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Nearest (Frobenius) trace-`t` PSD matrix to a Hermitian `m`.
fn project_trace_psd(m: &CMat, t: f64) -> CMat {
    let (vals, vecs) = linalg::hermitian_eigen(m);
    let clipped = linalg::project_simplex(&vals, t);
    let d = CMat::from_diagonal(&CVec::from_iterator(3, clipped.into_iter().map(c)));
    let out = &vecs * d * vecs.adjoint();
    (&out + out.adjoint()) * c(0.5)
}

/// Least-squares inversion of nine probe frequencies under `tr ρ = 1`, then
/// projection onto trace-one PSD matrices.
pub fn state_tomography(frequencies: &[f64]) -> Result<DensityMatrix> {
    check_frequencies(frequencies)?;
    let (a, _) = design();
    let f = DVector::from_column_slice(frequencies);
    // KKT system of min ‖Ax − f‖² s.t. x0 + x1 + x2 = 1.
    let mut kkt = DMatrix::zeros(10, 10);
    let ata = a.transpose() * a;
    kkt.view_mut((0, 0), (9, 9)).copy_from(&ata);
    for k in 0..3 {
        kkt[(9, k)] = 1.0;
        kkt[(k, 9)] = 1.0;
    }
    let mut rhs = DVector::zeros(10);
    rhs.rows_mut(0, 9).copy_from(&(a.transpose() * f));
    rhs[9] = 1.0;
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("tomography system is singular".into()))?;
    let x = sol.rows(0, 9).into_owned();
    let rho = project_trace_psd(&from_coords(&x), 1.0);
    DensityMatrix::new(rho)
}

/// Probe-state frequency rows for each POVM element, `f[l][m] = tr(Π_l ρ_m)`.
pub fn povm_frequencies(elements: &[CMat]) -> Vec<[f64; 9]> {
    elements.iter().map(probe_expectations).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmEstimate {
    pub elements: Vec<CMat>,
    /// Squared fidelity of `Π_l / tr Π_l` to the supplied rank-one reference; `None` for vanishing elements.
    pub fidelities: Vec<Option<f64>>,
    pub rounds: usize,
    pub converged: bool,
    pub completeness_defect: f64,
    pub min_eigenvalue: f64,
}

/// Alternating-projection settings for [`povm_tomography`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmFitSettings {
    pub max_rounds: usize,
    pub tolerance: f64,
}

impl Default for PovmFitSettings {
    fn default() -> Self {
        PovmFitSettings {
            max_rounds: 500,
            tolerance: 1e-10,
        }
    }
}

/// Fits POVM elements to probe frequencies.
///
/// Each element is inverted linearly, then the set is alternately projected onto
/// PSD matrices and onto `Σ_l Π_l = I` until it stops moving.
pub fn povm_tomography(
    frequencies: &[Vec<f64>],
    references: Option<&[CVec]>,
) -> Result<PovmEstimate> {
    povm_tomography_with(frequencies, references, &PovmFitSettings::default())
}

pub fn povm_tomography_with(
    frequencies: &[Vec<f64>],
    references: Option<&[CVec]>,
    settings: &PovmFitSettings,
) -> Result<PovmEstimate> {
    if frequencies.is_empty() {
        return Err(Error::InvalidParameter("no outcomes".into()));
    }
    for row in frequencies {
        check_frequencies(row)?;
    }
    if let Some(r) = references {
        if r.len() != frequencies.len() {
            return Err(Error::DimensionMismatch {
                expected: frequencies.len(),
                found: r.len(),
            });
        }
    }
    let (_, inv) = design();
    let k = frequencies.len();
    let id = linalg::identity(3);
    let mut elems: Vec<CMat> = frequencies
        .iter()
        .map(|row| from_coords(&(inv * DVector::from_column_slice(row))))
        .collect();

    let complete = |elems: &mut [CMat]| {
        let total = elems.iter().fold(CMat::zeros(3, 3), |acc, e| acc + e);
        let fix = (&id - total) * c(1.0 / k as f64);
        for e in elems.iter_mut() {
            *e += &fix;
        }
    };
    let psd = |m: &CMat| linalg::hermitian_map(m, |v| v.max(0.0));

    complete(&mut elems);
    let mut rounds = 0;
    let mut converged = false;
    while rounds < settings.max_rounds {
        rounds += 1;
        let before = elems.clone();
        for e in elems.iter_mut() {
            *e = psd(e);
        }
        complete(&mut elems);
        let moved = elems
            .iter()
            .zip(&before)
            .map(|(a, b)| linalg::max_abs(&(a - b)))
            .fold(0.0, f64::max);
        if moved < settings.tolerance {
            converged = true;
            break;
        }
    }

    let total = elems.iter().fold(CMat::zeros(3, 3), |acc, e| acc + e);
    let completeness_defect = linalg::max_abs(&(total - &id));
    let min_eigenvalue = elems
        .iter()
        .map(linalg::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let fidelities = elems
        .iter()
        .enumerate()
        .map(|(l, e)| {
            let r = references?.get(l)?;
            let tr = linalg::trace(e).re;
            (tr > 1e-12).then(|| squared_fidelity_pure(r, &(e / c(tr))))
        })
        .collect();
    Ok(PovmEstimate {
        elements: elems,
        fidelities,
        rounds,
        converged,
        completeness_defect,
        min_eigenvalue,
    })
}

/// On-disk tomography frequencies, tagged with the probe-set version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyData {
    pub basis: String,
    /// Nine state-tomography frequencies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
    /// One row of nine frequencies per POVM outcome, for each measured observable.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<Vec<Vec<f64>>>,
}

impl TomographyData {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: TomographyData = serde_json::from_str(text)?;
        if d.basis != BASIS_VERSION {
            return Err(Error::Parse(format!(
                "unknown basis {:?}, expected {BASIS_VERSION:?}",
                d.basis
            )));
        }
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
