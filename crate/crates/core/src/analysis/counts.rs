use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kcbs_model::{DensityMatrix, KcbsConfiguration};
use crate::linalg::{self, CMat};

/// Which of the two orders in an edge context is treated as primary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    #[default]
    Normal,
    Reverse,
}

/// Counts of the four outcome pairs `(a, b)`: first measurement `a`, second `b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    #[serde(rename = "00")]
    pub n00: f64,
    #[serde(rename = "01")]
    pub n01: f64,
    #[serde(rename = "10")]
    pub n10: f64,
    #[serde(rename = "11")]
    pub n11: f64,
}

impl OutcomeCounts {
    pub fn total(&self) -> f64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    pub fn get(&self, a: u8, b: u8) -> f64 {
        match (a, b) {
            (0, 0) => self.n00,
            (0, 1) => self.n01,
            (1, 0) => self.n10,
            _ => self.n11,
        }
    }

    /// `Pr(ab)` as a relative frequency.
    pub fn prob(&self, a: u8, b: u8) -> f64 {
        self.get(a, b) / self.total()
    }

    fn add(&mut self, other: &OutcomeCounts) {
        self.n00 += other.n00;
        self.n01 += other.n01;
        self.n10 += other.n10;
        self.n11 += other.n11;
    }

    fn validate(&self, i: usize, j: usize) -> Result<()> {
        let all = [self.n00, self.n01, self.n10, self.n11];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "context ({i},{j}): counts must be finite and non-negative"
            )));
        }
        if self.total() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "context ({i},{j}): no shots recorded"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ContextRecord {
    i: usize,
    j: usize,
    counts: OutcomeCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CountsDoc {
    n: usize,
    #[serde(default)]
    order: Order,
    contexts: Vec<ContextRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repetitions: Option<u64>,
}

/// Sequential-measurement counts `N(ab|ij)`, keyed by the ordered pair `(i, j)` (1-based).
///
/// Keys are either cycle edges in either orientation or repeated contexts `(i, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentCounts {
    n: usize,
    order: Order,
    contexts: BTreeMap<(usize, usize), OutcomeCounts>,
    repetitions: Option<u64>,
}

impl ExperimentCounts {
    pub fn new(n: usize, order: Order) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("n = {n} is too small")));
        }
        Ok(ExperimentCounts {
            n,
            order,
            contexts: BTreeMap::new(),
            repetitions: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn set_order(&mut self, order: Order) {
        self.order = order;
    }

    pub fn repetitions(&self) -> Option<u64> {
        self.repetitions
    }

    pub fn set_repetitions(&mut self, r: Option<u64>) {
        self.repetitions = r;
    }

    pub fn next(&self, i: usize) -> usize {
        i % self.n + 1
    }

    pub fn prev(&self, i: usize) -> usize {
        (i + self.n - 2) % self.n + 1
    }

    fn check_key(&self, i: usize, j: usize) -> Result<()> {
        let in_range = (1..=self.n).contains(&i) && (1..=self.n).contains(&j);
        if !in_range || !(i == j || self.next(i) == j || self.prev(i) == j) {
            return Err(Error::InvalidParameter(format!(
                "({i},{j}) is neither a cycle edge nor a repeated context for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Adds counts to context `(i, j)`, accumulating with anything already there.
    pub fn record(&mut self, i: usize, j: usize, counts: OutcomeCounts) -> Result<()> {
        self.check_key(i, j)?;
        counts.validate(i, j)?;
        self.contexts.entry((i, j)).or_default().add(&counts);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&OutcomeCounts> {
        self.contexts.get(&(i, j))
    }

    pub fn contexts(&self) -> impl Iterator<Item = ((usize, usize), &OutcomeCounts)> {
        self.contexts.iter().map(|(k, v)| (*k, v))
    }

    /// Sums counts context-wise; the result keeps `self`'s order tag.
    pub fn merge(&mut self, other: &ExperimentCounts) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        for (&(i, j), c) in &other.contexts {
            self.contexts.entry((i, j)).or_default().add(c);
        }
        self.repetitions = match (self.repetitions, other.repetitions) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CountsDoc {
            n: self.n,
            order: self.order,
            contexts: self
                .contexts
                .iter()
                .map(|(&(i, j), &counts)| ContextRecord { i, j, counts })
                .collect(),
            repetitions: self.repetitions,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CountsDoc = serde_json::from_str(text)?;
        let mut out = ExperimentCounts::new(doc.n, doc.order)?;
        out.repetitions = doc.repetitions;
        for (k, rec) in doc.contexts.into_iter().enumerate() {
            out.record(rec.i, rec.j, rec.counts)
                .map_err(|e| Error::Parse(format!("contexts[{k}]: {e}")))?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Per-measurement and summed witness estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEstimate {
    pub p: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Shots behind each `p_i`.
    pub shots: Vec<f64>,
    /// The context each `p_i` was read from, as `(first, second)`.
    pub sources: Vec<(usize, usize)>,
    pub sum: f64,
    pub sum_sigma: f64,
}

/// The `z` multiplier for a one-sided 95% lower value.
pub const CONFIDENCE_Z: f64 = 1.96;

impl WitnessEstimate {
    /// `μ − 1.96σ` of the sum.
    pub fn conservative(&self) -> f64 {
        self.sum - CONFIDENCE_Z * self.sum_sigma
    }

    /// `p_i − 1.96σ_i` for each measurement.
    pub fn conservative_each(&self) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.sigma)
            .map(|(p, s)| p - CONFIDENCE_Z * s)
            .collect()
    }
}

/// Estimates `p_i` from the designated context of each measurement.
///
/// `i` measured first with its forward neighbour is preferred under normal order,
/// its backward neighbour under reverse order; contexts where `i` comes second
/// (read through `N(01|ji)`) are the last resort.
pub fn estimate(counts: &ExperimentCounts) -> Result<WitnessEstimate> {
    let n = counts.n();
    let mut est = WitnessEstimate {
        p: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        shots: Vec::with_capacity(n),
        sources: Vec::with_capacity(n),
        sum: 0.0,
        sum_sigma: 0.0,
    };
    let mut var = 0.0;
    for i in 1..=n {
        let (a, b) = match counts.order() {
            Order::Normal => (counts.next(i), counts.prev(i)),
            Order::Reverse => (counts.prev(i), counts.next(i)),
        };
        let candidates = [(i, a, true), (i, b, true), (a, i, false), (b, i, false)];
        let (key, ctx, first) = candidates
            .iter()
            .find_map(|&(x, y, first)| counts.get(x, y).map(|c| ((x, y), c, first)))
            .ok_or_else(|| Error::MissingData(format!("no context contains measurement {i}")))?;
        let total = ctx.total();
        let hits = if first { ctx.n10 } else { ctx.n01 };
        let p = hits / total;
        let s = (p * (1.0 - p) / total).sqrt();
        var += s * s;
        est.sum += p;
        est.p.push(p);
        est.sigma.push(s);
        est.shots.push(total);
        est.sources.push(key);
    }
    est.sum_sigma = var.sqrt();
    Ok(est)
}

/// Mean and population standard deviation of a metric over its available entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    fn of(values: impl Iterator<Item = f64>) -> Option<Aggregate> {
        let v: Vec<f64> = values.collect();
        if v.is_empty() {
            return None;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        Some(Aggregate {
            mean,
            std: var.sqrt(),
            count: v.len(),
        })
    }
}

/// Per-metric results; a metric is `None` when its contexts are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    /// `R_i = Pr(00|ii) + Pr(11|ii)`, indexed by `i − 1`.
    pub repeatability: Vec<Option<f64>>,
    /// `δ_ij = Σ_ab |Pr(ab|ij) − Pr(ba|ji)|` for edges `(i, i+1)`.
    pub order_deviation: Vec<((usize, usize), Option<f64>)>,
    /// `o_ij = Pr(11|ij)` for every recorded ordered edge context.
    pub joint_click: Vec<((usize, usize), f64)>,
    pub repeatability_summary: Option<Aggregate>,
    pub order_deviation_summary: Option<Aggregate>,
    pub joint_click_summary: Option<Aggregate>,
}

impl NoiseReport {
    pub fn missing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.repeatability_summary.is_none() {
            out.push("repeatability (no (i,i) contexts)");
        }
        if self.order_deviation_summary.is_none() {
            out.push("order deviation (no edge recorded in both orders)");
        }
        if self.joint_click_summary.is_none() {
            out.push("joint clicks (no edge contexts)");
        }
        out
    }
}

/// Repeatability, order dependence and joint clicks; each metric is computed independently.
///
/// Errors only when none of the three can be computed.
pub fn noise_metrics(counts: &ExperimentCounts) -> Result<NoiseReport> {
    let n = counts.n();
    let repeatability: Vec<Option<f64>> = (1..=n)
        .map(|i| counts.get(i, i).map(|c| c.prob(0, 0) + c.prob(1, 1)))
        .collect();
    let order_deviation: Vec<((usize, usize), Option<f64>)> = (1..=n)
        .map(|i| {
            let j = counts.next(i);
            let d = match (counts.get(i, j), counts.get(j, i)) {
                (Some(x), Some(y)) => Some(
                    [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|&(a, b)| (x.prob(a, b) - y.prob(b, a)).abs())
                        .sum(),
                ),
                _ => None,
            };
            ((i, j), d)
        })
        .collect();
    let joint_click: Vec<((usize, usize), f64)> = counts
        .contexts()
        .filter(|((i, j), _)| i != j)
        .map(|(k, c)| (k, c.prob(1, 1)))
        .collect();
    let report = NoiseReport {
        repeatability_summary: Aggregate::of(repeatability.iter().flatten().copied()),
        order_deviation_summary: Aggregate::of(order_deviation.iter().filter_map(|(_, d)| *d)),
        joint_click_summary: Aggregate::of(joint_click.iter().map(|(_, o)| *o)),
        repeatability,
        order_deviation,
        joint_click,
    };
    if report.missing().len() == 3 {
        return Err(Error::MissingData(
            "no context supports any noise metric".into(),
        ));
    }
    Ok(report)
}

/// Which contexts a simulated dataset contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextPlan {
    /// Adds `(i, i−1)` next to `(i, i+1)`, so every edge appears in both orders.
    pub both_orders: bool,
    /// Adds the repeated contexts `(i, i)`.
    pub repeats: bool,
}

impl Default for ContextPlan {
    fn default() -> Self {
        ContextPlan {
            both_orders: true,
            repeats: true,
        }
    }
}

impl ContextPlan {
    fn keys(&self, n: usize) -> Vec<(usize, usize)> {
        let mut keys = Vec::new();
        for i in 1..=n {
            keys.push((i, i % n + 1));
            if self.both_orders {
                keys.push((i, (i + n - 2) % n + 1));
            }
            if self.repeats {
                keys.push((i, i));
            }
        }
        keys.sort_unstable();
        keys
    }
}

/// `Pr(ab|ij)` for ideal sequential projective measurements (Lüders updates).
pub fn sequential_probabilities(rho: &CMat, first: &CMat, second: &CMat) -> [[f64; 2]; 2] {
    let d = rho.nrows();
    let id = linalg::identity(d);
    let ops = |p: &CMat| [&id - p, p.clone()];
    let (f, s) = (ops(first), ops(second));
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let k = &s[b] * &f[a];
            out[a][b] = linalg::trace(&(&k * rho * k.adjoint())).re.max(0.0);
        }
    }
    out
}

fn simulated_counts(
    config: &KcbsConfiguration,
    state: &DensityMatrix,
    plan: ContextPlan,
    order: Order,
    mut draw: impl FnMut([[f64; 2]; 2]) -> OutcomeCounts,
) -> Result<ExperimentCounts> {
    let projectors = config.projectors();
    let mut out = ExperimentCounts::new(config.n(), order)?;
    for (i, j) in plan.keys(config.n()) {
        let pr = sequential_probabilities(state.entries(), &projectors[i - 1], &projectors[j - 1]);
        out.record(i, j, draw(pr))?;
    }
    Ok(out)
}

/// Noise-free counts: `shots · Pr(ab|ij)` for every planned context.
pub fn exact_counts(
    config: &KcbsConfiguration,
    state: &DensityMatrix,
    shots: f64,
    plan: ContextPlan,
) -> Result<ExperimentCounts> {
    if !(shots > 0.0 && shots.is_finite()) {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    simulated_counts(config, state, plan, Order::Normal, |pr| OutcomeCounts {
        n00: shots * pr[0][0],
        n01: shots * pr[0][1],
        n10: shots * pr[1][0],
        n11: shots * pr[1][1],
    })
}

/// Multinomially sampled counts with `shots` per context.
pub fn sample_counts<R: Rng + ?Sized>(
    config: &KcbsConfiguration,
    state: &DensityMatrix,
    shots: u64,
    plan: ContextPlan,
    rng: &mut R,
) -> Result<ExperimentCounts> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    simulated_counts(config, state, plan, Order::Normal, |pr| {
        let probs = [pr[0][0], pr[0][1], pr[1][0], pr[1][1]];
        let total: f64 = probs.iter().sum();
        let mut left = shots;
        let mut mass = 1.0;
        let mut drawn = [0u64; 4];
        for (k, &p) in probs.iter().enumerate() {
            let p = p / total;
            if k == 3 || left == 0 {
                drawn[k] = left;
                break;
            }
            let q = if mass > 0.0 {
                (p / mass).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let x = Binomial::new(left, q)
                .expect("probability in [0, 1]")
                .sample(rng);
            drawn[k] = x;
            left -= x;
            mass -= p;
        }
        OutcomeCounts {
            n00: drawn[0] as f64,
            n01: drawn[1] as f64,
            n10: drawn[2] as f64,
            n11: drawn[3] as f64,
        }
    })
}
