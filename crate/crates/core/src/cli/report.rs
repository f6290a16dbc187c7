use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    estimate, fidelity, noise_metrics, povm_tomography, squared_fidelity, squared_fidelity_pure,
    state_tomography, ExperimentCounts, NoiseReport, Order, TomographyData, WitnessEstimate,
};
use crate::cli::curve::{load_curve, lookup, CurveLookup};
use crate::error::{Error, Result};
use crate::kcbs_model::{
    depolarized_state, ideal_configuration, tilted_configuration, witness_value, DensityMatrix,
    KcbsConfiguration,
};
use crate::linalg::{self, min_eigenvalue};

/// Fidelities of reconstructed objects to the ideal configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyReport {
    pub source: PathBuf,
    pub state: Option<FidelityPair>,
    pub state_min_eigenvalue: Option<f64>,
    /// Click element of measurement `i`, indexed by `i − 1`; `None` if it vanished.
    pub measurements: Vec<Option<FidelityPair>>,
    pub povm_converged: Vec<bool>,
    pub povm_completeness_defect: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityPair {
    pub root: f64,
    pub squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LookupReport {
    pub curve: PathBuf,
    pub mode: String,
    /// `None` when the observed value lies left of every solved grid point.
    pub lookup: Option<CurveLookup>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub order: Order,
    pub estimate: WitnessEstimate,
    /// `μ − 1.96σ` of the sum, used for sum-mode curves.
    pub conservative_sum: f64,
    /// `Σ_i (p_i − 1.96σ_i)`, used for equal-mode curves.
    pub conservative_equal: f64,
    pub noise: Option<NoiseReport>,
    pub tomography: Vec<TomographyReport>,
    pub lookups: Vec<LookupReport>,
    /// The largest certified value among the lookups.
    pub best: Option<CurveLookup>,
}

pub fn analyze(
    counts: &Path,
    tomography: &[PathBuf],
    curves: &[PathBuf],
    order: Option<Order>,
) -> Result<AnalyzeReport> {
    let mut data = ExperimentCounts::load(counts).map_err(|e| annotate(counts, e))?;
    if let Some(o) = order {
        data.set_order(o);
    }
    let est = estimate(&data)?;
    let noise = match noise_metrics(&data) {
        Ok(r) => Some(r),
        Err(Error::MissingData(_)) => None,
        Err(e) => return Err(e),
    };
    let conservative_sum = est.conservative();
    let conservative_equal = est.conservative_each().iter().sum();

    let ideal = ideal_configuration(data.n())?;
    let tomography = tomography
        .iter()
        .map(|p| tomography_report(p, &ideal))
        .collect::<Result<Vec<_>>>()?;

    let mut lookups = Vec::new();
    for path in curves {
        let (header, points) = load_curve(path)?;
        let header = header.ok_or_else(|| {
            Error::Parse(format!(
                "{}: missing '# kcbs curve' header line",
                path.display()
            ))
        })?;
        if header.n != data.n() {
            return Err(Error::Parse(format!(
                "{}: curve is for n = {}, counts for n = {}",
                path.display(),
                header.n,
                data.n()
            )));
        }
        let observed = match header.mode.as_str() {
            "sum" => conservative_sum,
            "equal" => conservative_equal,
            other => {
                return Err(Error::Parse(format!(
                    "{}: mode {other:?} cannot be looked up from counts",
                    path.display()
                )))
            }
        };
        lookups.push(LookupReport {
            curve: path.clone(),
            mode: header.mode,
            lookup: lookup(&points, observed),
        });
    }
    let best = lookups
        .iter()
        .filter_map(|l| l.lookup.clone())
        .max_by(|a, b| a.certified_bound.total_cmp(&b.certified_bound));

    Ok(AnalyzeReport {
        order: data.order(),
        estimate: est,
        conservative_sum,
        conservative_equal,
        noise,
        tomography,
        lookups,
        best,
    })
}

fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::Json(j) => Error::Parse(format!(
            "{}: line {}, column {}: {j}",
            path.display(),
            j.line(),
            j.column()
        )),
        other => other,
    }
}

fn tomography_report(path: &Path, ideal: &KcbsConfiguration) -> Result<TomographyReport> {
    let data = TomographyData::load(path).map_err(|e| annotate(path, e))?;
    let (state, state_min_eigenvalue) = match &data.state {
        Some(freqs) => {
            let rho = state_tomography(freqs)?;
            let target = ideal.state_density();
            let pair = FidelityPair {
                root: fidelity(&rho, &target)?,
                squared: squared_fidelity(&rho, &target)?,
            };
            (Some(pair), Some(min_eigenvalue(rho.entries())))
        }
        None => (None, None),
    };
    if data.measurements.len() > ideal.n() {
        return Err(Error::Parse(format!(
            "{}: {} measurements for n = {}",
            path.display(),
            data.measurements.len(),
            ideal.n()
        )));
    }
    let mut measurements = Vec::new();
    let mut povm_converged = Vec::new();
    let mut povm_completeness_defect = Vec::new();
    for (i, rows) in data.measurements.iter().enumerate() {
        let fit = povm_tomography(rows, None).map_err(|e| annotate(path, e))?;
        let click = &fit.elements[0];
        let tr = linalg::trace(click).re;
        measurements.push((tr > 1e-12).then(|| {
            let sq = squared_fidelity_pure(&ideal.directions()[i], &click.unscale(tr));
            FidelityPair {
                root: sq.max(0.0).sqrt(),
                squared: sq,
            }
        }));
        povm_converged.push(fit.converged);
        povm_completeness_defect.push(fit.completeness_defect);
    }
    Ok(TomographyReport {
        source: path.to_path_buf(),
        state,
        state_min_eigenvalue,
        measurements,
        povm_converged,
        povm_completeness_defect,
    })
}

pub fn render_analyze(r: &AnalyzeReport) -> String {
    let mut s = String::new();
    let order = match r.order {
        Order::Normal => "normal",
        Order::Reverse => "reverse",
    };
    s += &format!("order: {order}\n");
    for (k, (p, sigma)) in r.estimate.p.iter().zip(&r.estimate.sigma).enumerate() {
        let (a, b) = r.estimate.sources[k];
        s += &format!("p{} = {p:.6} ± {sigma:.6}  from ({a},{b})\n", k + 1);
    }
    s += &format!(
        "sum = {:.6} ± {:.6}; μ−1.96σ = {:.6}; Σ(p_i−1.96σ_i) = {:.6}\n",
        r.estimate.sum, r.estimate.sum_sigma, r.conservative_sum, r.conservative_equal
    );
    match &r.noise {
        Some(n) => {
            let fmt = |a: &Option<crate::analysis::Aggregate>| match a {
                Some(a) => format!("{:.6} ± {:.6} (n={})", a.mean, a.std, a.count),
                None => "missing".to_string(),
            };
            s += &format!("repeatability R: {}\n", fmt(&n.repeatability_summary));
            s += &format!("order deviation δ: {}\n", fmt(&n.order_deviation_summary));
            s += &format!("joint click o: {}\n", fmt(&n.joint_click_summary));
        }
        None => s += "noise metrics: no repeated or reversed contexts\n",
    }
    for t in &r.tomography {
        s += &format!("tomography {}\n", t.source.display());
        if let Some(f) = t.state {
            s += &format!("  state: F = {:.6}, F² = {:.6}\n", f.root, f.squared);
        }
        for (i, m) in t.measurements.iter().enumerate() {
            match m {
                Some(f) => {
                    s += &format!("  P{}: F = {:.6}, F² = {:.6}\n", i + 1, f.root, f.squared)
                }
                None => s += &format!("  P{}: vanishing click element\n", i + 1),
            }
        }
    }
    for l in &r.lookups {
        match &l.lookup {
            Some(x) => {
                s += &format!(
                    "curve {} ({}): at {:.6} -> grid {:.6}, certified {:.6} (raw {:.6}, {})\n",
                    l.curve.display(),
                    l.mode,
                    x.observed,
                    x.grid_point,
                    x.certified_bound,
                    x.bound,
                    x.status
                )
            }
            None => {
                s += &format!(
                    "curve {} ({}): no solved grid point at or below the observed value\n",
                    l.curve.display(),
                    l.mode
                )
            }
        }
    }
    if let Some(b) = &r.best {
        s += &format!(
            "fidelity lower bound: {:.6} ({}, raw {:.6})\n",
            b.certified_bound, b.status, b.bound
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfigKind {
    Ideal { n: usize },
    Tilted { theta_deg: f64, u0: [f64; 3] },
    Depolarized { n: usize, p: f64 },
}

/// Builds the configuration and its validation report as JSON.
pub fn config_report(kind: ConfigKind) -> Result<Value> {
    let (name, config, rho): (&str, KcbsConfiguration, DensityMatrix) = match kind {
        ConfigKind::Ideal { n } => {
            let c = ideal_configuration(n)?;
            let rho = c.state_density();
            ("ideal", c, rho)
        }
        ConfigKind::Tilted { theta_deg, u0 } => {
            let u = u0.map(linalg::c);
            let c = tilted_configuration(theta_deg, &u)?;
            let rho = c.state_density();
            ("tilted", c, rho)
        }
        ConfigKind::Depolarized { n, p } => (
            "depolarized",
            ideal_configuration(n)?,
            depolarized_state(p)?,
        ),
    };
    let configuration: Value = serde_json::from_str(&config.to_json()?)?;
    let matrix: Vec<Vec<[f64; 2]>> = (0..rho.dim())
        .map(|r| {
            (0..rho.dim())
                .map(|c| {
                    let z = rho.entries()[(r, c)];
                    [z.re, z.im]
                })
                .collect()
        })
        .collect();
    Ok(json!({
        "kind": name,
        "configuration": configuration,
        "state_matrix": matrix,
        "state_eigenvalues": rho.eigenvalues(),
        "validation": {
            "max_norm_defect": config.max_norm_defect(),
            "max_cyclic_overlap": config.max_cyclic_overlap(),
            "valid": true,
        },
        "outcome_probabilities": config.outcome_probabilities(),
        "witness": witness_value(&config, &rho)?,
    }))
}

pub fn render_config(v: &Value) -> String {
    let mut s = format!("kind: {}\n", v["kind"].as_str().unwrap_or("?"));
    let val = &v["validation"];
    s += &format!(
        "max norm defect: {:.3e}\nmax cyclic overlap: {:.3e}\n",
        val["max_norm_defect"].as_f64().unwrap_or(f64::NAN),
        val["max_cyclic_overlap"].as_f64().unwrap_or(f64::NAN)
    );
    if let Some(ev) = v["state_eigenvalues"].as_array() {
        let ev: Vec<String> = ev
            .iter()
            .map(|x| format!("{:.6}", x.as_f64().unwrap_or(f64::NAN)))
            .collect();
        s += &format!("state eigenvalues: {}\n", ev.join(", "));
    }
    s += &format!(
        "witness: {:.7}\n",
        v["witness"].as_f64().unwrap_or(f64::NAN)
    );
    s
}
