use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_relax::{assemble_fidelity, export_sdpa, Statistic};
use crate::sdp_solver::{solve, SolverSettings};

/// How the observed value `c` constrains `⟨Π_i⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    Sum,
    Equal,
    /// `p_i = c · w_i / Σw`.
    PerValues(Vec<f64>),
}

impl ConstraintMode {
    pub fn statistic(&self, c: f64) -> Result<Statistic> {
        Ok(match self {
            ConstraintMode::Sum => Statistic::Sum { c },
            ConstraintMode::Equal => Statistic::Equal { c },
            ConstraintMode::PerValues(w) => {
                let total: f64 = w.iter().sum();
                if w.iter().any(|x| !(*x >= 0.0)) || !(total > 0.0) {
                    return Err(Error::InvalidParameter(
                        "per-value weights must be non-negative with a positive sum".into(),
                    ));
                }
                Statistic::PerMeasurement {
                    p: w.iter().map(|x| c * x / total).collect(),
                }
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstraintMode::Sum => "sum",
            ConstraintMode::Equal => "equal",
            ConstraintMode::PerValues(_) => "per-values",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    Internal,
    /// Writes one SDPA file per point instead of solving.
    ExportOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub n: usize,
    pub grid: Vec<f64>,
    pub level: usize,
    pub mode: ConstraintMode,
    pub solver: SolverChoice,
    pub out: PathBuf,
}

impl CurveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidParameter("empty grid".into()));
        }
        let nf = self.n as f64;
        if let Some(c) = self.grid.iter().find(|c| !(**c > 0.0 && **c <= nf)) {
            return Err(Error::InvalidParameter(format!(
                "grid value {c} outside (0, {})",
                self.n
            )));
        }
        if self.level == 0 {
            return Err(Error::InvalidParameter("level must be >= 1".into()));
        }
        Ok(())
    }
}

/// Parses `A:B:K` (K evenly spaced points, both ends included) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad grid value {t:?}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, k] => {
            let (a, b) = (num(a)?, num(b)?);
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad grid count {k:?}")))?;
            if k == 0 {
                return Err(Error::InvalidParameter("grid count must be >= 1".into()));
            }
            if k == 1 {
                return Ok(vec![a]);
            }
            Ok((0..k)
                .map(|i| {
                    if i + 1 == k {
                        b
                    } else {
                        a + (b - a) * i as f64 / (k - 1) as f64
                    }
                })
                .collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(Error::Parse(format!(
            "grid {text:?} is neither A:B:K nor a list"
        ))),
    }
}

/// One row of a curve file. Failed points keep their status and leave the numbers empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub c: f64,
    pub bound: Option<f64>,
    pub status: String,
    pub gap: Option<f64>,
    pub iterations: Option<usize>,
    pub seconds: Option<f64>,
    pub certified_bound: Option<f64>,
}

impl CurvePoint {
    pub fn is_solved(&self) -> bool {
        matches!(self.status.as_str(), "optimal" | "near-optimal")
    }

    fn failed(c: f64, status: String) -> Self {
        CurvePoint {
            c,
            bound: None,
            status,
            gap: None,
            iterations: None,
            seconds: None,
            certified_bound: None,
        }
    }
}

/// Metadata carried in the comment header of a curve file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveHeader {
    pub n: usize,
    pub level: usize,
    pub mode: String,
}

/// Solves (or exports) every grid point on a pool of `jobs` threads.
pub fn run_curve(
    spec: &CurveSpec,
    settings: &SolverSettings,
    jobs: usize,
) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    settings.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let points: Vec<Result<CurvePoint>> = pool.install(|| {
        spec.grid
            .par_iter()
            .enumerate()
            .map(|(k, &c)| curve_point(spec, settings, k, c))
            .collect()
    });
    points.into_iter().collect()
}

/// Path of the SDPA file for grid point `k` in export-only mode.
pub fn export_point_path(out: &Path, k: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    out.with_file_name(format!("{stem}.point{k}.dat-s"))
}

fn curve_point(
    spec: &CurveSpec,
    settings: &SolverSettings,
    k: usize,
    c: f64,
) -> Result<CurvePoint> {
    let start = Instant::now();
    let statistic = spec.mode.statistic(c)?;
    let problem = match assemble_fidelity(spec.n, spec.level, &statistic) {
        Ok(p) => p,
        Err(e @ Error::InconsistentStatistics(_)) => {
            return Ok(CurvePoint::failed(c, format!("rejected: {e}")))
        }
        Err(e) => return Err(e),
    };
    match spec.solver {
        SolverChoice::ExportOnly => {
            export_sdpa(&problem, &export_point_path(&spec.out, k))?;
            Ok(CurvePoint::failed(c, "exported".into()))
        }
        SolverChoice::Internal => {
            let r = solve(&problem, settings)?;
            Ok(CurvePoint {
                c,
                bound: Some(r.bound),
                status: r.status.to_string(),
                gap: Some(r.gap),
                iterations: Some(r.iterations),
                seconds: Some(start.elapsed().as_secs_f64()),
                certified_bound: Some(r.certified_bound),
            })
        }
    }
}

/// Writes the CSV with a comment header; `timestamp` adds a generation-time line.
pub fn write_curve<W: Write>(
    mut w: W,
    header: &CurveHeader,
    points: &[CurvePoint],
    timestamp: Option<u64>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<curve output>", e);
    writeln!(
        w,
        "# kcbs curve n={} level={} mode={}",
        header.n, header.level, header.mode
    )
    .map_err(io)?;
    if let Some(t) = timestamp {
        writeln!(w, "# generated unix={t}").map_err(io)?;
    }
    let mut cw = csv::Writer::from_writer(w);
    for p in points {
        cw.serialize(p)
            .map_err(|e| Error::Parse(format!("csv: {e}")))?;
    }
    cw.flush().map_err(io)?;
    Ok(())
}

/// Reads a curve CSV and the metadata from its header comment, if present.
pub fn read_curve<R: Read>(mut r: R) -> Result<(Option<CurveHeader>, Vec<CurvePoint>)> {
    let mut text = String::new();
    r.read_to_string(&mut text)
        .map_err(|e| Error::io("<curve input>", e))?;
    let header = text
        .lines()
        .find_map(|l| l.strip_prefix("# kcbs curve "))
        .map(parse_header)
        .transpose()?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (k, row) in reader.deserialize().enumerate() {
        let p: CurvePoint = row.map_err(|e| Error::Parse(format!("curve row {}: {e}", k + 1)))?;
        points.push(p);
    }
    Ok((header, points))
}

fn parse_header(s: &str) -> Result<CurveHeader> {
    let mut n = None;
    let mut level = None;
    let mut mode = None;
    for kv in s.split_whitespace() {
        match kv.split_once('=') {
            Some(("n", v)) => n = v.parse().ok(),
            Some(("level", v)) => level = v.parse().ok(),
            Some(("mode", v)) => mode = Some(v.to_string()),
            _ => {}
        }
    }
    match (n, level, mode) {
        (Some(n), Some(level), Some(mode)) => Ok(CurveHeader { n, level, mode }),
        _ => Err(Error::Parse(format!("malformed curve header {s:?}"))),
    }
}

pub fn load_curve(path: &Path) -> Result<(Option<CurveHeader>, Vec<CurvePoint>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_curve(f).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Bound looked up from a curve at an observed value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveLookup {
    pub observed: f64,
    /// Grid point whose value is used (the largest solved one not above `observed`).
    pub grid_point: f64,
    pub certified_bound: f64,
    pub bound: f64,
    pub status: String,
}

/// Looks up the bound at `c` by rounding down to the nearest solved grid point on the left.
///
/// Only solved points with a certified value take part; `None` when `c` lies
/// left of all of them.
pub fn lookup(points: &[CurvePoint], c: f64) -> Option<CurveLookup> {
    points
        .iter()
        .filter(|p| p.is_solved() && p.c <= c + 1e-12)
        .filter_map(|p| Some((p, p.certified_bound?, p.bound?)))
        .max_by(|a, b| a.0.c.total_cmp(&b.0.c))
        .map(|(p, cert, bound)| CurveLookup {
            observed: c,
            grid_point: p.c,
            certified_bound: cert,
            bound,
            status: p.status.clone(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(c: f64, cert: f64, status: &str) -> CurvePoint {
        CurvePoint {
            c,
            bound: Some(cert + 0.01),
            status: status.into(),
            gap: Some(1e-7),
            iterations: Some(100),
            seconds: None,
            certified_bound: Some(cert),
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("2.0, 2.1").unwrap(), vec![2.0, 2.1]);
        assert_eq!(parse_grid("2:3:1").unwrap(), vec![2.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("x").is_err());
        let g = parse_grid("2.0:2.2360679775:15").unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(*g.last().unwrap(), 2.2360679775);
    }

    #[test]
    fn csv_round_trip_with_failed_rows() {
        let header = CurveHeader {
            n: 5,
            level: 2,
            mode: "sum".into(),
        };
        let pts = vec![
            point(2.0, 1.0, "optimal"),
            CurvePoint::failed(2.1, "iteration-limit".into()),
        ];
        let mut buf = Vec::new();
        write_curve(&mut buf, &header, &pts, Some(7)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("c,bound,status,gap,iterations,seconds,certified_bound"));
        let (h, back) = read_curve(buf.as_slice()).unwrap();
        assert_eq!(h.unwrap(), header);
        assert_eq!(back, pts);
    }

    #[test]
    fn lookup_rounds_down_to_the_left_point() {
        let pts = vec![
            point(2.0, 1.0, "optimal"),
            point(2.1, 2.0, "iteration-limit"),
            point(2.2, 3.0, "near-optimal"),
        ];
        assert_eq!(lookup(&pts, 2.19).unwrap().certified_bound, 1.0);
        assert_eq!(lookup(&pts, 2.2).unwrap().certified_bound, 3.0);
        assert_eq!(lookup(&pts, 2.3).unwrap().grid_point, 2.2);
        assert!(lookup(&pts, 1.9).is_none());
    }

    #[test]
    fn per_value_weights_scale_to_c() {
        let m = ConstraintMode::PerValues(vec![1.0, 1.0, 2.0, 0.0, 0.0]);
        match m.statistic(2.0).unwrap() {
            Statistic::PerMeasurement { p } => assert_eq!(p, vec![0.5, 0.5, 1.0, 0.0, 0.0]),
            other => panic!("{other:?}"),
        }
        assert!(ConstraintMode::PerValues(vec![0.0; 5])
            .statistic(2.0)
            .is_err());
    }
}
