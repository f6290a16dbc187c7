//! Batch entry points behind the `kcbs` binary.
//!
//! The default solver tolerance can be overridden with `KCBS_SOLVER_TOL`
//! (sets `eps_abs` to the value and `eps_rel` to a tenth of it); `--tol` wins over it.

mod curve;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use curve::{
    export_point_path, load_curve, lookup, parse_grid, read_curve, run_curve, write_curve,
    ConstraintMode, CurveHeader, CurveLookup, CurvePoint, CurveSpec, SolverChoice,
};
pub use report::{
    analyze, config_report, render_analyze, render_config, AnalyzeReport, ConfigKind, FidelityPair,
    LookupReport, TomographyReport,
};

use crate::analysis::Order;
use crate::error::{Error, Result};
use crate::moment_relax::{assemble_fidelity, assemble_max_witness, export_sdpa, WitnessAlphabet};
use crate::sdp_solver::SolverSettings;

pub const TOLERANCE_ENV: &str = "KCBS_SOLVER_TOL";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNSOLVED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "kcbs",
    version,
    about = "Certified fidelity bounds for KCBS experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the robustness curve on a grid of witness values.
    Curve(CurveArgs),
    /// Estimate the witness and noise metrics from counts, optionally looking up bounds.
    Analyze(AnalyzeArgs),
    /// Write one relaxation in SDPA sparse format with a class manifest.
    Export(ExportArgs),
    /// Print a configuration and its validation report.
    Config(ConfigArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sum,
    Equal,
    Per,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Internal,
    Export,
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    /// Convergence tolerance (overrides KCBS_SOLVER_TOL).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub level: usize,
    /// `A:B:K` or a comma-separated list.
    #[arg(long, default_value = "2.0:2.2360679774997898:15")]
    pub grid: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Sum)]
    pub mode: ModeArg,
    /// Relative weights of the `p_i` for `--mode per`.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    #[arg(long, value_enum, default_value_t = SolverArg::Internal)]
    pub solver: SolverArg,
    /// Worker threads; defaults to the number of processors.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Omit the timestamp line and the timing column so reruns are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    #[command(flatten)]
    pub solver_flags: SolverFlags,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub counts: PathBuf,
    #[arg(long)]
    pub tomography: Vec<PathBuf>,
    #[arg(long)]
    pub curve: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Normal,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportMode {
    Sum,
    Equal,
    /// Maximize the witness with no fidelity objective.
    Witness,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long)]
    pub level: usize,
    #[arg(long, value_enum)]
    pub mode: ExportMode,
    /// Observed witness value; ignored in witness mode.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConfigKindArg {
    Ideal,
    Tilted,
    Depolarized,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(value_enum)]
    pub kind: ConfigKindArg,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 150.612)]
    pub theta: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.649, -0.400, -0.649])]
    pub u0: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    /// Print the full JSON instead of the summary.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps an error to the documented exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::Parse(_)
        | Error::Io { .. }
        | Error::Json(_)
        | Error::InconsistentStatistics(_)
        | Error::MissingData(_) => EXIT_INPUT,
        _ => EXIT_INTERNAL,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Solver settings from the environment and flags.
pub fn solver_settings(flags: &SolverFlags) -> Result<SolverSettings> {
    let mut s = SolverSettings::default();
    let env = std::env::var(TOLERANCE_ENV).ok();
    let tol = match (flags.tol, env) {
        (Some(t), _) => Some(t),
        (None, Some(v)) => Some(v.trim().parse::<f64>().map_err(|_| {
            Error::InvalidParameter(format!("{TOLERANCE_ENV}={v:?} is not a number"))
        })?),
        (None, None) => None,
    };
    if let Some(t) = tol {
        s.eps_abs = t;
        s.eps_rel = t / 10.0;
    }
    if let Some(m) = flags.max_iter {
        s.max_iter = m;
    }
    if let Some(t) = flags.time_limit {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time limit {t} must be positive"
            )));
        }
        s.time_limit = Some(Duration::from_secs_f64(t));
    }
    s.validate()?;
    Ok(s)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let io = |e: std::io::Error| Error::io("<stdout>", e);
    match cli.command {
        Command::Curve(a) => {
            let mode = match a.mode {
                ModeArg::Sum => ConstraintMode::Sum,
                ModeArg::Equal => ConstraintMode::Equal,
                ModeArg::Per => {
                    if a.weights.len() != a.n {
                        return Err(Error::InvalidParameter(format!(
                            "--mode per needs --weights with {} values",
                            a.n
                        )));
                    }
                    ConstraintMode::PerValues(a.weights.clone())
                }
            };
            let spec = CurveSpec {
                n: a.n,
                grid: parse_grid(&a.grid)?,
                level: a.level,
                mode,
                solver: match a.solver {
                    SolverArg::Internal => SolverChoice::Internal,
                    SolverArg::Export => SolverChoice::ExportOnly,
                },
                out: a.out.clone(),
            };
            let settings = solver_settings(&a.solver_flags)?;
            let jobs = a
                .jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let mut points = run_curve(&spec, &settings, jobs)?;
            let timestamp = if a.deterministic {
                for p in &mut points {
                    p.seconds = None;
                }
                None
            } else {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .ok()
                    .map(|d| d.as_secs())
            };
            let header = CurveHeader {
                n: spec.n,
                level: spec.level,
                mode: spec.mode.name().to_string(),
            };
            let file = std::fs::File::create(&spec.out).map_err(|e| Error::io(&spec.out, e))?;
            write_curve(std::io::BufWriter::new(file), &header, &points, timestamp)?;
            let mut unsolved = 0;
            for p in &points {
                match (p.bound, p.certified_bound) {
                    (Some(b), Some(cb)) => writeln!(
                        out,
                        "c={:.6} bound={b:.6} certified={cb:.6} {}",
                        p.c, p.status
                    )
                    .map_err(io)?,
                    _ => writeln!(out, "c={:.6} {}", p.c, p.status).map_err(io)?,
                }
                if spec.solver == SolverChoice::Internal && !p.is_solved() {
                    unsolved += 1;
                }
            }
            writeln!(out, "wrote {}", spec.out.display()).map_err(io)?;
            Ok(if unsolved > 0 { EXIT_UNSOLVED } else { EXIT_OK })
        }
        Command::Analyze(a) => {
            let order = a.order.map(|o| match o {
                OrderArg::Normal => Order::Normal,
                OrderArg::Reverse => Order::Reverse,
            });
            let r = analyze(&a.counts, &a.tomography, &a.curve, order)?;
            if a.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&r)?).map_err(io)?;
            } else {
                write!(out, "{}", render_analyze(&r)).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Command::Export(a) => {
            let problem = match a.mode {
                ExportMode::Witness => assemble_max_witness(a.n, a.level, WitnessAlphabet::Full)?,
                m => {
                    let c = a.c.ok_or_else(|| {
                        Error::InvalidParameter("--c is required for sum and equal modes".into())
                    })?;
                    let mode = if m == ExportMode::Sum {
                        ConstraintMode::Sum
                    } else {
                        ConstraintMode::Equal
                    };
                    assemble_fidelity(a.n, a.level, &mode.statistic(c)?)?
                }
            };
            let manifest = export_sdpa(&problem, &a.out)?;
            let counts = problem.counts();
            writeln!(
                out,
                "wrote {} ({} moment classes, {} linear constraints)\nmanifest {}",
                a.out.display(),
                counts.classes,
                counts.linear_constraints,
                manifest.display()
            )
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Config(a) => {
            let kind = match a.kind {
                ConfigKindArg::Ideal => ConfigKind::Ideal { n: a.n },
                ConfigKindArg::Depolarized => ConfigKind::Depolarized { n: a.n, p: a.p },
                ConfigKindArg::Tilted => {
                    let u0: [f64; 3] = a.u0.as_slice().try_into().map_err(|_| {
                        Error::InvalidParameter(format!(
                            "--u0 needs 3 components, got {}",
                            a.u0.len()
                        ))
                    })?;
                    ConfigKind::Tilted {
                        theta_deg: a.theta,
                        u0,
                    }
                }
            };
            let report = config_report(kind)?;
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(path) = &a.out {
                std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
            }
            if a.json {
                writeln!(out, "{text}").map_err(io)?;
            } else {
                write!(out, "{}", render_config(&report)).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
    }
}
