use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kcbs_model::{ideal_configuration, DensityMatrix, KcbsConfiguration};
use crate::linalg::{self, CMat, CVec};
use num_complex::Complex64;

/// Root (Uhlmann) fidelity `tr √(√a · b · √a)`, computed as the trace norm of `√a·√b`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let root = |m: &CMat| linalg::hermitian_map(m, |v| if v > 1e-14 { v.sqrt() } else { 0.0 });
    let prod = root(a.entries()) * root(b.entries());
    Ok(prod.svd(false, false).singular_values.sum())
}

/// `fidelity(a, b)²`, the convention of the Fuchs–van de Graaf bounds.
pub fn squared_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    Ok(fidelity(a, b)?.powi(2))
}

/// `⟨v|ρ|v⟩` for a (normalized) pure reference `v`.
pub fn squared_fidelity_pure(v: &CVec, rho: &CMat) -> f64 {
    let u = v.unscale(v.norm());
    u.dotc(&(rho * &u)).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleBound {
    pub value: f64,
    /// The bound is below zero and says nothing.
    pub vacuous: bool,
}

/// `6 − Σ√(1 − F_i^{E,θ}) − Σ√(1 − F_i^{θ,O})` with squared fidelities.
pub fn triangle_lower_bound(f_e_theta: &[f64; 6], f_theta_o: &[f64; 6]) -> Result<TriangleBound> {
    for &f in f_e_theta.iter().chain(f_theta_o) {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!(
                "fidelity {f} outside [0, 1]"
            )));
        }
    }
    let loss: f64 = f_e_theta
        .iter()
        .chain(f_theta_o)
        .map(|f| (1.0 - f).sqrt())
        .sum();
    let value = 6.0 - loss;
    Ok(TriangleBound {
        value,
        vacuous: value < 0.0,
    })
}

/// The six pure elements of a configuration: state first, then the directions.
fn elements(config: &KcbsConfiguration) -> Vec<CVec> {
    std::iter::once(config.state().clone())
        .chain(config.directions().iter().cloned())
        .collect()
}

/// `|⟨a_j|W b_j⟩|²` for each pair.
fn overlap_terms(w: &CMat, a: &[CVec], b: &[CVec]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.dotc(&(w * y)).norm_sqr())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryFit {
    /// `Σ_{i=0}^{5} F_i^{θ,O}` (squared fidelities).
    pub total: f64,
    pub terms: Vec<f64>,
    /// `W` such that the reference configuration is `W·(ideal)`.
    pub rotation: CMat,
    pub starts: usize,
    /// Starts whose gradient norm fell below tolerance.
    pub converged: usize,
    /// Lowest final total among the starts.
    pub worst_start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentSettings {
    pub starts: usize,
    pub max_steps: usize,
    pub gradient_tol: f64,
    /// Seed of the first start; start `s` uses `seed + s`.
    pub seed: u64,
}

impl Default for AscentSettings {
    fn default() -> Self {
        AscentSettings {
            starts: 32,
            max_steps: 3000,
            gradient_tol: 1e-10,
            seed: 0,
        }
    }
}

/// Haar-random unitary from the QR factor of a complex Gaussian matrix.
fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMat::from_fn(d, d, |i, j| {
        if i == j {
            let z = r[(i, i)];
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                linalg::c(1.0)
            }
        } else {
            linalg::c(0.0)
        }
    });
    q * phases
}

/// `exp(i·H)` for Hermitian `H`.
fn unitary_exp(h: &CMat) -> CMat {
    let (vals, vecs) = linalg::hermitian_eigen(h);
    let d = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&l| Complex64::from_polar(1.0, l)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Riemannian ascent of `Σ|⟨a_j|W b_j⟩|²` over SU(d) from `w`.
fn ascend(mut w: CMat, a: &[CVec], b: &[CVec], s: &AscentSettings) -> (CMat, f64, bool) {
    let d = w.nrows();
    let value = |w: &CMat| overlap_terms(w, a, b).iter().sum::<f64>();
    let mut f = value(&w);
    let mut step = 0.5;
    for _ in 0..s.max_steps {
        let mut x = CMat::zeros(d, d);
        for (aj, bj) in a.iter().zip(b) {
            let wj = &w * bj;
            let z = aj.dotc(&wj);
            x += linalg::outer(&wj, aj) * (Complex64::i() * z.conj());
        }
        let mut g = &x + x.adjoint();
        let tr = linalg::trace(&g) / d as f64;
        for k in 0..d {
            g[(k, k)] -= tr;
        }
        let gnorm = g.norm();
        if gnorm < s.gradient_tol {
            return (w, f, true);
        }
        loop {
            let cand = unitary_exp(&(&g * linalg::c(step))) * &w;
            let fc = value(&cand);
            if fc >= f {
                w = cand;
                f = fc;
                step = (step * 1.5).min(10.0);
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                return (w, f, true);
            }
        }
    }
    (w, f, false)
}

/// Best unitary alignment of `config` with the ideal five-cycle configuration.
///
/// Multi-start gradient ascent with a fixed seed list; the same input always
/// returns the same value and rotation.
pub fn optimal_isometry_fidelity(config: &KcbsConfiguration) -> Result<IsometryFit> {
    optimal_isometry_fidelity_with(config, &AscentSettings::default())
}

pub fn optimal_isometry_fidelity_with(
    config: &KcbsConfiguration,
    settings: &AscentSettings,
) -> Result<IsometryFit> {
    if settings.starts == 0 {
        return Err(Error::InvalidParameter(
            "at least one start is needed".into(),
        ));
    }
    let ideal = ideal_configuration(config.n())?;
    let a = elements(config);
    let b = elements(&ideal);
    let d = a[0].len();
    if b[0].len() != d {
        return Err(Error::DimensionMismatch {
            expected: b[0].len(),
            found: d,
        });
    }
    let mut best: Option<(CMat, f64)> = None;
    let mut worst = f64::INFINITY;
    let mut converged = 0;
    for s in 0..settings.starts {
        let start = if s == 0 {
            linalg::identity(d)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed + s as u64);
            random_unitary(&mut rng, d)
        };
        let (w, f, ok) = ascend(start, &a, &b, settings);
        converged += ok as usize;
        worst = worst.min(f);
        if best.as_ref().is_none_or(|(_, fb)| f > *fb + 1e-12) {
            best = Some((w, f));
        }
    }
    let (rotation, total) = best.expect("at least one start");
    Ok(IsometryFit {
        total,
        terms: overlap_terms(&rotation, &a, &b),
        rotation,
        starts: settings.starts,
        converged,
        worst_start: worst,
    })
}
