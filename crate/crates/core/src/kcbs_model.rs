//! Closed-form KCBS configurations, witness values and noisy variants.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};

const NORM_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;

/// A pure qutrit state together with `n` cyclically orthogonal projector directions.
#[derive(Debug, Clone, PartialEq)]
pub struct KcbsConfiguration {
    n: usize,
    state: CVec,
    directions: Vec<CVec>,
}

impl KcbsConfiguration {
    /// Validates unit norms and cyclic orthogonality.
    pub fn new(state: CVec, directions: Vec<CVec>) -> Result<Self> {
        let n = directions.len();
        if n < 5 || n % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "need an odd number >= 5 of directions, got {n}"
            )));
        }
        for (k, v) in std::iter::once(&state).chain(directions.iter()).enumerate() {
            if v.len() != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    found: v.len(),
                });
            }
            let defect = (v.norm() - 1.0).abs();
            if defect > NORM_TOL {
                let what = if k == 0 {
                    "state".to_string()
                } else {
                    format!("direction {k}")
                };
                return Err(Error::InvalidOperator {
                    what: format!("{what} (unit norm)"),
                    defect,
                });
            }
        }
        for i in 0..n {
            let j = (i + 1) % n;
            let overlap = directions[i].dotc(&directions[j]).norm();
            if overlap > ORTHO_TOL {
                return Err(Error::InvalidOperator {
                    what: format!("directions {} and {} (orthogonality)", i + 1, j + 1),
                    defect: overlap,
                });
            }
        }
        Ok(KcbsConfiguration {
            n,
            state: snap_real(state),
            directions: directions.into_iter().map(snap_real).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn state(&self) -> &CVec {
        &self.state
    }

    pub fn directions(&self) -> &[CVec] {
        &self.directions
    }

    /// `|u_i⟩⟨u_i|`, 0-based.
    pub fn projector(&self, i: usize) -> CMat {
        linalg::outer(&self.directions[i], &self.directions[i])
    }

    pub fn projectors(&self) -> Vec<CMat> {
        (0..self.n).map(|i| self.projector(i)).collect()
    }

    pub fn state_density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: linalg::outer(&self.state, &self.state),
        }
    }

    /// Largest `|⟨u_i|u_{i+1}⟩|` over the cycle.
    pub fn max_cyclic_overlap(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.directions[i]
                    .dotc(&self.directions[(i + 1) % self.n])
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation of any stored vector from unit norm.
    pub fn max_norm_defect(&self) -> f64 {
        std::iter::once(&self.state)
            .chain(self.directions.iter())
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `|⟨u_i|ψ⟩|²` for each direction.
    pub fn outcome_probabilities(&self) -> Vec<f64> {
        self.directions
            .iter()
            .map(|u| u.dotc(&self.state).norm_sqr())
            .collect()
    }

    /// Applies a 3×3 unitary to the state and all directions.
    pub fn rotated(&self, w: &CMat) -> KcbsConfiguration {
        KcbsConfiguration {
            n: self.n,
            state: w * &self.state,
            directions: self.directions.iter().map(|u| w * u).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ConfigurationDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ConfigurationDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

fn snap_real(v: CVec) -> CVec {
    v.map(|z| {
        if z.im.abs() < 1e-14 {
            Complex64::new(z.re, 0.0)
        } else {
            z
        }
    })
}

/// Wire form: every complex number is `[re, im]`.
#[derive(Debug, Serialize, Deserialize)]
struct ConfigurationDoc {
    n: usize,
    state: Vec<[f64; 2]>,
    directions: Vec<Vec<[f64; 2]>>,
}

fn to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|p| Complex64::new(p[0], p[1])))
}

impl From<&KcbsConfiguration> for ConfigurationDoc {
    fn from(c: &KcbsConfiguration) -> Self {
        ConfigurationDoc {
            n: c.n,
            state: to_pairs(&c.state),
            directions: c.directions.iter().map(to_pairs).collect(),
        }
    }
}

impl TryFrom<ConfigurationDoc> for KcbsConfiguration {
    type Error = Error;

    fn try_from(doc: ConfigurationDoc) -> Result<Self> {
        if doc.directions.len() != doc.n {
            return Err(Error::Parse(format!(
                "n = {} but {} directions given",
                doc.n,
                doc.directions.len()
            )));
        }
        KcbsConfiguration::new(
            from_pairs(&doc.state),
            doc.directions.iter().map(|d| from_pairs(d)).collect(),
        )
    }
}

/// A 3×3 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMat,
}

impl DensityMatrix {
    /// Checks Hermiticity (1e-12), unit trace (1e-10) and eigenvalues ≥ −1e-9.
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let herm = linalg::hermiticity_defect(&entries);
        if herm > 1e-12 {
            return Err(Error::InvalidOperator {
                what: "density matrix (Hermitian)".into(),
                defect: herm,
            });
        }
        let tr = linalg::trace(&entries);
        if (tr - c(1.0)).norm() > 1e-10 {
            return Err(Error::InvalidOperator {
                what: "density matrix (trace)".into(),
                defect: (tr - c(1.0)).norm(),
            });
        }
        let min = linalg::min_eigenvalue(&entries);
        if min < -1e-9 {
            return Err(Error::InvalidOperator {
                what: "density matrix (positivity)".into(),
                defect: -min,
            });
        }
        Ok(DensityMatrix { entries })
    }

    pub fn pure(v: &CVec) -> Result<Self> {
        if v.norm() == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        DensityMatrix::new(linalg::projector(v))
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.entries).0
    }

    /// `⟨v|ρ|v⟩` for a unit vector.
    pub fn expectation(&self, v: &CVec) -> f64 {
        v.dotc(&(&self.entries * v)).re
    }
}

/// How the identity component of the depolarized state is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepolarizingConvention {
    /// `(1−p)|0⟩⟨0| + (p/3)·I`, a valid qutrit state.
    #[default]
    TraceNormalized,
    /// `(1−p)|0⟩⟨0| + (p/9)·I` as printed; trace is `1 − 2p/3`.
    LiteralNinth,
}

fn check_unit_interval(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "{name} = {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Raw operator under the chosen convention. Only the trace-normalized form is a state.
pub fn depolarized_operator(p: f64, convention: DepolarizingConvention) -> Result<CMat> {
    check_unit_interval(p, "p")?;
    let weight = match convention {
        DepolarizingConvention::TraceNormalized => p / 3.0,
        DepolarizingConvention::LiteralNinth => p / 9.0,
    };
    let mut m = linalg::identity(3).scale(weight);
    m[(0, 0)] += c(1.0 - p);
    Ok(m)
}

/// `(1−p)|0⟩⟨0| + (p/3)·I`.
pub fn depolarized_state(p: f64) -> Result<DensityMatrix> {
    DensityMatrix::new(depolarized_operator(
        p,
        DepolarizingConvention::TraceNormalized,
    )?)
}

fn check_n(n: usize) -> Result<()> {
    if n < 5 || n % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "n must be odd and >= 5, got {n}"
        )));
    }
    Ok(())
}

/// `Q_n = n cos(π/n) / (1 + cos(π/n))`.
pub fn quantum_value(n: usize) -> Result<f64> {
    check_n(n)?;
    let cp = (PI / n as f64).cos();
    Ok(n as f64 * cp / (1.0 + cp))
}

/// `C_n = (n − 1) / 2`.
pub fn classical_value(n: usize) -> Result<f64> {
    check_n(n)?;
    Ok((n as f64 - 1.0) / 2.0)
}

/// `cos²θ` of the ideal configuration.
pub fn ideal_cos2_theta(n: usize) -> Result<f64> {
    check_n(n)?;
    let cp = (PI / n as f64).cos();
    Ok(cp / (1.0 + cp))
}

/// State `|0⟩` with `|u_l⟩ = cosθ|0⟩ + sinθ sinφ_l|1⟩ + sinθ cosφ_l|2⟩`, `φ_l = lπ(n−1)/n`.
pub fn ideal_configuration(n: usize) -> Result<KcbsConfiguration> {
    let cos2 = ideal_cos2_theta(n)?;
    let (ct, st) = (cos2.sqrt(), (1.0 - cos2).sqrt());
    let directions = (1..=n)
        .map(|l| {
            let phi = l as f64 * PI * (n as f64 - 1.0) / n as f64;
            CVec::from_vec(vec![c(ct), c(st * phi.sin()), c(st * phi.cos())])
        })
        .collect();
    KcbsConfiguration::new(CVec::from_vec(vec![c(1.0), c(0.0), c(0.0)]), directions)
}

/// The five-direction tilted family; `theta_deg` is in degrees.
///
/// `u0` is normalized; the published vectors carry three decimals.
pub fn tilted_configuration(theta_deg: f64, u0: &[Complex64; 3]) -> Result<KcbsConfiguration> {
    let state = CVec::from_column_slice(u0);
    let norm = state.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidParameter(
            "u0 must be a non-zero vector".into(),
        ));
    }
    let state = state.unscale(norm);
    let t = theta_deg.to_radians();
    let (s, co) = (t.sin(), t.cos());
    let r = (1.0 + s * s).sqrt();
    let v = |a: f64, b: f64, cc: f64| CVec::from_vec(vec![c(a), c(b), c(cc)]);
    let directions = vec![
        v(1.0, 0.0, 0.0),
        v(0.0, 0.0, 1.0),
        v(-co, s, 0.0),
        v(s / r, co / r, s / r),
        v(0.0, s, -co),
    ];
    KcbsConfiguration::new(state, directions)
}

/// `Σ_i tr(Π_i ρ)` with `Π_i = |u_i⟩⟨u_i|`.
pub fn witness_value(config: &KcbsConfiguration, state: &DensityMatrix) -> Result<f64> {
    witness_value_operator(config, state.entries())
}

/// As [`witness_value`] but for any 3×3 operator (e.g. the literal-convention mixture).
pub fn witness_value_operator(config: &KcbsConfiguration, rho: &CMat) -> Result<f64> {
    if rho.nrows() != 3 || rho.ncols() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: rho.nrows(),
        });
    }
    Ok(config
        .directions
        .iter()
        .map(|u| u.dotc(&(rho * u)).re)
        .sum())
}
