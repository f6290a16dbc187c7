//! First-order conic solver for assembled moment problems.
//!
//! The problem is put in the form `min cᵀy` s.t. `Ey = b`, `Ay + a₀ ∈ K`, with
//! `y` the free moment classes and `K` a product of PSD blocks and a
//! nonnegative orthant, then solved by over-relaxed ADMM with adaptive
//! penalty. The `y`-step uses `AᵀA = D + BᵀB`, where `D` is diagonal (every
//! `Γ` cell touches one class) and `B` collects the few remaining rows, so one
//! small factorization serves every iteration and every penalty value.
//!
//! Every moment of a normalized state under products of projections and
//! unitaries lies in `[−1, 1]`. A dual point `(Z, λ)` with `Z ∈ K` therefore
//! gives the bound `bᵀλ − ⟨Z, a₀⟩ − ‖c − AᵀZ − Eᵀλ‖₁`, reported as
//! [`SolveResult::certified_bound`].

mod cone;

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moment_relax::{Certificate, MomentProblem, Sense};
use cone::{Block, SQRT2};

/// Solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Over-relaxation in `(0, 2)`.
    pub alpha: f64,
    pub scaling: bool,
    /// Initial ADMM penalty.
    pub rho: f64,
    pub adaptive_rho: bool,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    pub time_limit: Option<Duration>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iter: 200_000,
            eps_abs: 1e-6,
            eps_rel: 1e-7,
            alpha: 1.6,
            scaling: true,
            rho: 0.1,
            adaptive_rho: true,
            check_every: 10,
            time_limit: None,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "over-relaxation {} outside (0, 2)",
                self.alpha
            )));
        }
        if !(self.rho > 0.0) || self.check_every == 0 {
            return Err(Error::InvalidParameter(
                "rho and check_every must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Same settings with both tolerances set to `tol`.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.eps_abs = tol;
        self.eps_rel = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Residuals within ten times the tolerances when the iteration budget ran out.
    NearOptimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near-optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of [`solve`]. Objective values are in the problem's own sense.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective at the returned iterate.
    pub bound: f64,
    /// Dual objective before residual correction.
    pub dual_bound: f64,
    /// Residual-corrected dual bound: a lower bound for minimization, an upper bound for maximization.
    pub certified_bound: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    /// One value per moment class; entry `0` is the identity.
    pub moments: Vec<f64>,
}

/// Standard-form data in original units.
struct StandardForm {
    m: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    a0: Vec<f64>,
    blocks: Vec<Block>,
    /// Rows below this index have at most one nonzero.
    diag_rows: usize,
    c: Vec<f64>,
    c0: f64,
    eq: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    block_of_row: Vec<usize>,
}

impl StandardForm {
    fn from_problem(p: &MomentProblem) -> Result<Self> {
        let m = p.num_classes() - 1;
        let sign = match p.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut c = vec![0.0; m];
        let mut c0 = sign * p.offset();
        for &(id, v) in p.objective() {
            if id == 0 {
                c0 += sign * v;
            } else {
                c[id - 1] += sign * v;
            }
        }

        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut a0 = Vec::new();
        let mut blocks = Vec::new();
        let mut push_row = |terms: &[(usize, f64)], scale: f64, constant: f64| {
            let mut k = constant;
            for &(id, v) in terms {
                if id == 0 {
                    k += scale * v;
                } else if v != 0.0 {
                    cols.push(id - 1);
                    vals.push(scale * v);
                }
            }
            a0.push(k);
            row_ptr.push(cols.len());
        };

        let g = p.gamma();
        let n = g.size();
        for a in 0..n {
            for bb in a..n {
                let w = if a == bb { 1.0 } else { SQRT2 };
                match g.cell(a, bb) {
                    Some(id) => push_row(&[(id, 1.0)], w, 0.0),
                    None => push_row(&[], w, 0.0),
                }
            }
        }
        blocks.push(Block::Psd { start: 0, n });
        let diag_rows = n * (n + 1) / 2;
        let mut next = diag_rows;

        if let Some(loc) = p.localizing() {
            let ml = loc.size();
            for a in 0..ml {
                for bb in a..ml {
                    let w = if a == bb { 1.0 } else { SQRT2 };
                    push_row(loc.entry(a, bb), w, 0.0);
                }
            }
            blocks.push(Block::Psd { start: next, n: ml });
            next += ml * (ml + 1) / 2;
        }

        let mut eq = Vec::new();
        let mut b = Vec::new();
        let mut ineq = 0;
        for con in p.constraints() {
            if con.is_equality() {
                let mut rhs = con.lower;
                let mut row = Vec::new();
                for &(id, v) in &con.coeffs {
                    if id == 0 {
                        rhs -= v;
                    } else {
                        row.push((id - 1, v));
                    }
                }
                eq.push(row);
                b.push(rhs);
            } else {
                if con.lower.is_finite() {
                    push_row(&con.coeffs, 1.0, -con.lower);
                    ineq += 1;
                }
                if con.upper.is_finite() {
                    push_row(&con.coeffs, -1.0, con.upper);
                    ineq += 1;
                }
            }
        }
        if ineq > 0 {
            blocks.push(Block::Nonneg {
                start: next,
                len: ineq,
            });
        }
        let rows = a0.len();
        let mut block_of_row = vec![0; rows];
        for (k, blk) in blocks.iter().enumerate() {
            for r in blk.start()..blk.start() + blk.len() {
                block_of_row[r] = k;
            }
        }
        Ok(StandardForm {
            m,
            row_ptr,
            cols,
            vals,
            a0,
            blocks,
            diag_rows,
            c,
            c0,
            eq,
            b,
            block_of_row,
        })
    }

    fn rows(&self) -> usize {
        self.a0.len()
    }
}

/// Scaled operator with its precomputed `y`-step factorization.
struct Scaled {
    m: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    a0: Vec<f64>,
    c: Vec<f64>,
    e_col: Vec<f64>,
    t_row: Vec<f64>,
    sigma: f64,
    eq: DMatrix<f64>,
    b: DVector<f64>,
    d_inv: Vec<f64>,
    /// Rows of `B` (rows not in the diagonal part), densified.
    b_dense: DMatrix<f64>,
    woodbury: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    hinv_et: DMatrix<f64>,
    schur: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Scaled {
    fn new(sf: &StandardForm, scaling: bool) -> Result<Self> {
        let m = sf.m;
        let rows = sf.rows();
        let nb = sf.blocks.len();
        let mut e_col = vec![1.0; m];
        let mut t_blk = vec![1.0; nb];
        if scaling {
            for _ in 0..15 {
                let mut colsq = vec![0.0; m];
                let mut blk_max = vec![0.0f64; nb];
                for r in 0..rows {
                    let t = t_blk[sf.block_of_row[r]];
                    let mut rowsq = 0.0;
                    for k in sf.row_ptr[r]..sf.row_ptr[r + 1] {
                        let v = t * sf.vals[k] * e_col[sf.cols[k]];
                        colsq[sf.cols[k]] += v * v;
                        rowsq += v * v;
                    }
                    let bi = sf.block_of_row[r];
                    blk_max[bi] = blk_max[bi].max(rowsq.sqrt());
                }
                for j in 0..m {
                    if colsq[j] > 0.0 {
                        e_col[j] = (e_col[j] / colsq[j].sqrt().sqrt()).clamp(1e-4, 1e4);
                    }
                }
                for bi in 0..nb {
                    if blk_max[bi] > 0.0 {
                        t_blk[bi] = (t_blk[bi] / blk_max[bi].sqrt()).clamp(1e-4, 1e4);
                    }
                }
            }
        }
        let t_row: Vec<f64> = (0..rows).map(|r| t_blk[sf.block_of_row[r]]).collect();
        let vals: Vec<f64> = (0..rows)
            .flat_map(|r| (sf.row_ptr[r]..sf.row_ptr[r + 1]).map(move |k| (r, k)))
            .map(|(r, k)| t_row[r] * sf.vals[k] * e_col[sf.cols[k]])
            .collect();
        let a0: Vec<f64> = (0..rows).map(|r| t_row[r] * sf.a0[r]).collect();
        let cmax =
            sf.c.iter()
                .zip(&e_col)
                .map(|(c, e)| (c * e).abs())
                .fold(0.0, f64::max);
        let sigma = if scaling && cmax > 0.0 {
            1.0 / cmax
        } else {
            1.0
        };
        let c: Vec<f64> =
            sf.c.iter()
                .zip(&e_col)
                .map(|(c, e)| sigma * c * e)
                .collect();

        let q = sf.eq.len();
        let mut eq = DMatrix::zeros(q, m);
        let mut b = DVector::zeros(q);
        for (i, row) in sf.eq.iter().enumerate() {
            let norm = row
                .iter()
                .map(|&(j, v)| (v * e_col[j]).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "equality {i} has no variables"
                )));
            }
            for &(j, v) in row {
                eq[(i, j)] += v * e_col[j] / norm;
            }
            b[i] = sf.b[i] / norm;
        }

        let mut dvec = vec![0.0; m];
        for r in 0..sf.diag_rows {
            for k in sf.row_ptr[r]..sf.row_ptr[r + 1] {
                dvec[sf.cols[k]] += vals[k] * vals[k];
            }
        }
        if let Some(j) = dvec.iter().position(|&d| d == 0.0) {
            return Err(Error::InvalidParameter(format!(
                "moment class {} does not appear in the moment matrix",
                j + 1
            )));
        }
        let d_inv: Vec<f64> = dvec.iter().map(|d| 1.0 / d).collect();
        let p = rows - sf.diag_rows;
        let mut b_dense = DMatrix::zeros(p, m);
        for r in sf.diag_rows..rows {
            for k in sf.row_ptr[r]..sf.row_ptr[r + 1] {
                b_dense[(r - sf.diag_rows, sf.cols[k])] += vals[k];
            }
        }
        let woodbury = if p > 0 {
            let mut w = DMatrix::identity(p, p);
            for i in 0..p {
                for j in 0..=i {
                    let s: f64 = (0..m)
                        .map(|k| b_dense[(i, k)] * d_inv[k] * b_dense[(j, k)])
                        .sum();
                    w[(i, j)] += s;
                    if i != j {
                        w[(j, i)] += s;
                    }
                }
            }
            Some(w.cholesky().ok_or_else(|| {
                Error::InvalidParameter("normal matrix not positive definite".into())
            })?)
        } else {
            None
        };

        let mut s = Scaled {
            m,
            row_ptr: sf.row_ptr.clone(),
            cols: sf.cols.clone(),
            vals,
            a0,
            c,
            e_col,
            t_row,
            sigma,
            eq,
            b,
            d_inv,
            b_dense,
            woodbury,
            hinv_et: DMatrix::zeros(m, q),
            schur: None,
        };
        if q > 0 {
            let mut hinv_et = DMatrix::zeros(m, q);
            for i in 0..q {
                let col: Vec<f64> = s.eq.row(i).iter().copied().collect();
                let sol = s.h_solve(&col);
                hinv_et.set_column(i, &DVector::from_vec(sol));
            }
            let schur = &s.eq * &hinv_et;
            s.hinv_et = hinv_et;
            s.schur = Some(schur.lu());
        }
        Ok(s)
    }

    fn h_solve(&self, r: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = r.iter().zip(&self.d_inv).map(|(a, d)| a * d).collect();
        if let Some(w) = &self.woodbury {
            let p = self.b_dense.nrows();
            let mut t = DVector::zeros(p);
            for i in 0..p {
                t[i] = (0..self.m).map(|k| self.b_dense[(i, k)] * x[k]).sum();
            }
            let z = w.solve(&t);
            for k in 0..self.m {
                let mut acc = 0.0;
                for i in 0..p {
                    acc += self.b_dense[(i, k)] * z[i];
                }
                x[k] -= self.d_inv[k] * acc;
            }
        }
        x
    }

    /// `y` with `AᵀA y + Eᵀμ = g`, `E y = b`.
    fn y_solve(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.h_solve(g);
        if let Some(schur) = &self.schur {
            let q = self.eq.nrows();
            let mut resid = DVector::zeros(q);
            for i in 0..q {
                resid[i] = (0..self.m).map(|k| self.eq[(i, k)] * y[k]).sum::<f64>() - self.b[i];
            }
            let mu = schur.solve(&resid).ok_or_else(|| {
                Error::InvalidParameter("equality constraints are dependent".into())
            })?;
            for k in 0..self.m {
                let mut acc = 0.0;
                for i in 0..q {
                    acc += self.hinv_et[(k, i)] * mu[i];
                }
                y[k] -= acc;
            }
        }
        Ok(y)
    }

    fn a_mul(&self, y: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = self.a0[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * y[self.cols[k]];
            }
            *o = acc;
        }
    }

    fn at_mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[k]] += self.vals[k] * vr;
            }
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Residuals and objectives in original units.
struct Diagnostics {
    y: Vec<f64>,
    primal: f64,
    dual: f64,
    certified: f64,
    r_prim: f64,
    r_dual: f64,
    eps_prim: f64,
    eps_dual: f64,
    eps_gap: f64,
}

impl Diagnostics {
    fn gap(&self) -> f64 {
        (self.primal - self.dual).abs()
    }

    fn converged(&self, factor: f64) -> bool {
        self.r_prim <= factor * self.eps_prim
            && self.r_dual <= factor * self.eps_dual
            && self.gap() <= factor * self.eps_gap
    }
}

fn diagnostics(
    sf: &StandardForm,
    sc: &Scaled,
    y_s: &[f64],
    s_s: &[f64],
    z_s: &[f64],
    settings: &SolverSettings,
) -> Diagnostics {
    let rows = sf.rows();
    let y: Vec<f64> = y_s.iter().zip(&sc.e_col).map(|(v, e)| v * e).collect();
    let s: Vec<f64> = (0..rows).map(|r| s_s[r] / sc.t_row[r]).collect();
    let z: Vec<f64> = (0..rows).map(|r| z_s[r] * sc.t_row[r] / sc.sigma).collect();

    let mut ay = vec![0.0; rows];
    for (r, o) in ay.iter_mut().enumerate() {
        for k in sf.row_ptr[r]..sf.row_ptr[r + 1] {
            *o += sf.vals[k] * y[sf.cols[k]];
        }
    }
    let r_prim = (0..rows)
        .map(|r| (ay[r] + sf.a0[r] - s[r]).abs())
        .fold(0.0, f64::max);
    let eps_prim =
        settings.eps_abs + settings.eps_rel * inf_norm(&ay).max(inf_norm(&s)).max(inf_norm(&sf.a0));

    let mut atz = vec![0.0; sf.m];
    for (r, &zr) in z.iter().enumerate() {
        for k in sf.row_ptr[r]..sf.row_ptr[r + 1] {
            atz[sf.cols[k]] += sf.vals[k] * zr;
        }
    }
    let mut resid: Vec<f64> = sf.c.iter().zip(&atz).map(|(c, a)| c - a).collect();
    let q = sf.eq.len();
    let mut lambda = DVector::zeros(q);
    if q > 0 {
        let mut e = DMatrix::zeros(q, sf.m);
        for (i, row) in sf.eq.iter().enumerate() {
            for &(j, v) in row {
                e[(i, j)] += v;
            }
        }
        let rhs = &e * DVector::from_column_slice(&resid);
        let gram: DMatrix<f64> = &e * e.transpose();
        if let Some(l) = gram.lu().solve(&rhs) {
            lambda = l;
        }
        let etl = e.transpose() * &lambda;
        for j in 0..sf.m {
            resid[j] -= etl[j];
        }
    }
    let r_dual = inf_norm(&resid);
    let eps_dual = settings.eps_abs + settings.eps_rel * inf_norm(&sf.c).max(inf_norm(&atz));
    let primal = sf.c.iter().zip(&y).map(|(c, v)| c * v).sum::<f64>() + sf.c0;
    let dual = -z.iter().zip(&sf.a0).map(|(z, a)| z * a).sum::<f64>()
        + sf.b
            .iter()
            .zip(lambda.iter())
            .map(|(b, l)| b * l)
            .sum::<f64>()
        + sf.c0;
    let certified = dual - resid.iter().map(|r| r.abs()).sum::<f64>();
    let eps_gap = settings.eps_abs + settings.eps_rel * (primal.abs() + dual.abs());
    Diagnostics {
        y,
        primal,
        dual,
        certified,
        r_prim,
        r_dual,
        eps_prim,
        eps_dual,
        eps_gap,
    }
}

/// Solves `problem`; see [`solve_with_log`].
pub fn solve(problem: &MomentProblem, settings: &SolverSettings) -> Result<SolveResult> {
    solve_with_log(problem, settings, None)
}

/// Solves `problem`, writing `iteration,primal_residual,dual_residual,gap,rho` rows at each check.
pub fn solve_with_log(
    problem: &MomentProblem,
    settings: &SolverSettings,
    mut log: Option<&mut dyn Write>,
) -> Result<SolveResult> {
    settings.validate()?;
    let start = Instant::now();
    let sf = StandardForm::from_problem(problem)?;
    let sc = Scaled::new(&sf, settings.scaling)?;
    let rows = sf.rows();
    let m = sf.m;
    let max_objective = sf.c.iter().map(|c| c.abs()).sum::<f64>() + sf.c0;

    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "iteration,primal_residual,dual_residual,gap,rho")
            .map_err(|e| Error::io("<iteration log>", e))?;
    }

    let mut rho = settings.rho;
    let mut y = vec![0.0; m];
    let mut s = vec![0.0; rows];
    let mut u = vec![0.0; rows];
    let mut x = vec![0.0; rows];
    let mut v = vec![0.0; rows];
    let mut g = vec![0.0; m];
    let mut s_prev = vec![0.0; rows];
    let mut status = SolveStatus::IterationLimit;
    let mut last: Option<Diagnostics> = None;
    let mut iterations = 0;
    let adapt_every = (settings.check_every * 10).max(50);

    for it in 1..=settings.max_iter {
        iterations = it;
        for r in 0..rows {
            v[r] = sc.a0[r] - s[r] + u[r];
        }
        sc.at_mul(&v, &mut g);
        for j in 0..m {
            g[j] = -sc.c[j] / rho - g[j];
        }
        y = sc.y_solve(&g)?;
        sc.a_mul(&y, &mut x);
        s_prev.copy_from_slice(&s);
        for r in 0..rows {
            let xh = settings.alpha * x[r] + (1.0 - settings.alpha) * s[r];
            v[r] = xh + u[r];
        }
        s.copy_from_slice(&v);
        cone::project(&sf.blocks, &mut s);
        for r in 0..rows {
            u[r] = v[r] - s[r];
        }

        let check = it % settings.check_every == 0 || it == settings.max_iter;
        if !check {
            continue;
        }
        let z_s: Vec<f64> = u.iter().map(|x| -rho * x).collect();
        let d = diagnostics(&sf, &sc, &y, &s, &z_s, settings);
        if let Some(w) = log.as_deref_mut() {
            writeln!(
                w,
                "{it},{:e},{:e},{:e},{:e}",
                d.r_prim,
                d.r_dual,
                d.gap(),
                rho
            )
            .map_err(|e| Error::io("<iteration log>", e))?;
        }
        if d.converged(1.0) {
            status = SolveStatus::Optimal;
            last = Some(d);
            break;
        }
        if d.certified > max_objective + 1e-6 * (1.0 + max_objective.abs()) {
            status = SolveStatus::Infeasible;
            last = Some(d);
            break;
        }
        if inf_norm(&d.y) > 1e8 {
            status = SolveStatus::Unbounded;
            last = Some(d);
            break;
        }
        let timed_out = settings.time_limit.is_some_and(|t| start.elapsed() >= t);
        last = Some(d);
        if timed_out {
            break;
        }

        if settings.adaptive_rho && it % adapt_every == 0 {
            let prim_scale = inf_norm(&x)
                .max(inf_norm(&s))
                .max(inf_norm(&sc.a0))
                .max(1e-12);
            let rp: f64 = (0..rows).map(|r| (x[r] - s[r]).abs()).fold(0.0, f64::max) / prim_scale;
            let diff: Vec<f64> = s.iter().zip(&s_prev).map(|(a, b)| a - b).collect();
            let mut atd = vec![0.0; m];
            sc.at_mul(&diff, &mut atd);
            let mut atu = vec![0.0; m];
            sc.at_mul(&u, &mut atu);
            let dual_scale = inf_norm(&sc.c).max(rho * inf_norm(&atu)).max(1e-12);
            let rd = rho * inf_norm(&atd) / dual_scale;
            if rp > 0.0 && rd > 0.0 {
                let ratio = (rp / rd).sqrt();
                if !(0.2..=5.0).contains(&ratio) {
                    let new_rho = (rho * ratio).clamp(1e-6, 1e6);
                    let f = rho / new_rho;
                    u.iter_mut().for_each(|x| *x *= f);
                    rho = new_rho;
                }
            }
        }
    }

    let d = last.expect("at least one check runs");
    if status == SolveStatus::IterationLimit && d.converged(10.0) {
        status = SolveStatus::NearOptimal;
    }

    // Recompute the certificate from an exactly projected dual point.
    let mut z_s: Vec<f64> = u.iter().map(|x| -rho * x).collect();
    cone::project(&sf.blocks, &mut z_s);
    let fin = diagnostics(&sf, &sc, &y, &s, &z_s, settings);
    let certified = fin.certified;

    let sign = match problem.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut moments = Vec::with_capacity(m + 1);
    moments.push(1.0);
    moments.extend_from_slice(&d.y);
    Ok(SolveResult {
        status,
        bound: sign * d.primal,
        dual_bound: sign * d.dual,
        certified_bound: sign * certified,
        primal_residual: d.r_prim,
        dual_residual: d.r_dual,
        gap: d.gap(),
        iterations,
        wall_time: start.elapsed(),
        moments,
    })
}

/// Residual report for a candidate moment vector; see [`MomentProblem::certify`].
pub fn certify(problem: &MomentProblem, moments: &[f64]) -> Result<Certificate> {
    problem.certify(moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_relax::{assemble_feasibility, assemble_max_witness, WitnessAlphabet};

    #[test]
    fn settings_validation() {
        assert!(SolverSettings::default().validate().is_ok());
        let bad = SolverSettings {
            alpha: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverSettings {
            eps_abs: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverSettings {
            max_iter: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn lovasz_theta_of_the_pentagon() {
        let p = assemble_max_witness(5, 1, WitnessAlphabet::ProjectorOnly).unwrap();
        let r = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{r:?}");
        assert!((r.bound - 5f64.sqrt()).abs() < 1e-4, "{}", r.bound);
        assert!(r.certified_bound >= 5f64.sqrt() - 1e-9);
    }

    #[test]
    fn zero_objective_is_trivially_optimal() {
        let p = assemble_feasibility(5, 1).unwrap();
        let r = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.bound.abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let p = assemble_max_witness(5, 1, WitnessAlphabet::Full).unwrap();
        let a = solve(&p, &SolverSettings::default()).unwrap();
        let b = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(a.moments, b.moments);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn iteration_log_is_csv() {
        let p = assemble_max_witness(5, 1, WitnessAlphabet::ProjectorOnly).unwrap();
        let mut buf: Vec<u8> = Vec::new();
        let settings = SolverSettings {
            max_iter: 40,
            ..Default::default()
        };
        let r = solve_with_log(&p, &settings, Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("iteration,primal_residual,dual_residual,gap,rho")
        );
        assert!(lines.count() >= 1);
        assert!(r.iterations <= 40);
    }
}
