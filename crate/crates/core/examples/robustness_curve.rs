//! Computes a short level-1 robustness curve in both constraint modes and writes CSV to stdout.

use kcbs_selftest::cli::{
    parse_grid, run_curve, write_curve, ConstraintMode, CurveHeader, CurveSpec, SolverChoice,
};
use kcbs_selftest::sdp_solver::SolverSettings;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = parse_grid("2.0:2.2360679774997898:4")?;
    for mode in [ConstraintMode::Sum, ConstraintMode::Equal] {
        let spec = CurveSpec {
            n: 5,
            grid: grid.clone(),
            level: 1,
            mode,
            solver: SolverChoice::Internal,
            out: "unused.csv".into(),
        };
        let mut points = run_curve(&spec, &SolverSettings::default(), 1)?;
        points.iter_mut().for_each(|p| p.seconds = None);
        let header = CurveHeader {
            n: 5,
            level: 1,
            mode: spec.mode.name().into(),
        };
        write_curve(std::io::stdout().lock(), &header, &points, None)?;
    }
    Ok(())
}
