//! Solver-agnostic description of the two convex problem classes used by
//! the controller and the offline decomposition, plus the conic backend.
//!
//! Class (i): linearly-constrained convex quadratic programs with
//! additional convex-quadratic inequality rows (the tube problem after
//! vertex enumeration and epigraph reformulation). Each quadratic row is
//! reformulated as a second-order-cone constraint through a factorisation
//! of its (PSD) quadratic form.
//!
//! Class (ii): small semidefinite programs over affine matrix blocks
//! (the higher-degree decomposition split).

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT,
    SecondOrderConeT, SolverStatus, SupportedConeT, ZeroConeT,
};
use nalgebra::DMatrix;

use crate::{Error, Result};

/// One linear row `sum coeffs * x ? rhs` (equality or inequality
/// depending on which list it is stored in).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        LinearRow { coeffs, rhs }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, c)| c * x[i]).sum()
    }
}

/// Convex quadratic inequality `sum quad_(i,j) x_i x_j + sum lin x + constant <= 0`.
/// `quad` holds monomial coefficients over index pairs with i <= j; the
/// implied symmetric matrix must be positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow {
    pub quad: Vec<(usize, usize, f64)>,
    pub lin: Vec<(usize, f64)>,
    pub constant: f64,
}

impl QuadRow {
    pub fn value(&self, x: &[f64]) -> f64 {
        let q: f64 = self.quad.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum();
        let l: f64 = self.lin.iter().map(|&(i, c)| c * x[i]).sum();
        q + l + self.constant
    }
}

/// Affine positive-semidefinite matrix constraint
/// `constant + sum x_k * coeff_k >= 0` (in the Loewner order).
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<(usize, DMatrix<f64>)>,
}

/// Conic problem carrier: quadratic objective, linear equalities and
/// inequalities, convex-quadratic rows and optional PSD blocks.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub n_vars: usize,
    /// Upper-triangular monomial coefficients of the objective quadratic
    /// part: objective = sum quad x_i x_j + obj_lin' x.
    pub obj_quad: Vec<(usize, usize, f64)>,
    pub obj_lin: Vec<f64>,
    pub eq_rows: Vec<LinearRow>,
    pub ineq_rows: Vec<LinearRow>,
    pub quad_rows: Vec<QuadRow>,
    pub psd_blocks: Vec<PsdBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

/// Solver outcome. `objective` is recomputed from the problem data at the
/// returned primal point rather than taken from the backend.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub solve_time: f64,
    pub iterations: usize,
}

impl ConicProblem {
    pub fn new(n_vars: usize) -> Self {
        ConicProblem {
            n_vars,
            obj_quad: Vec::new(),
            obj_lin: vec![0.0; n_vars],
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
            quad_rows: Vec::new(),
            psd_blocks: Vec::new(),
        }
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let q: f64 = self.obj_quad.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum();
        let l: f64 = self.obj_lin.iter().zip(x).map(|(c, v)| c * v).sum();
        q + l
    }

    /// Largest constraint violation at a point (equality rows by absolute
    /// residual; inequality, quadratic and PSD rows by positive part).
    pub fn feasibility_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.eq_rows {
            worst = worst.max((row.value(x) - row.rhs).abs());
        }
        for row in &self.ineq_rows {
            worst = worst.max(row.value(x) - row.rhs);
        }
        for row in &self.quad_rows {
            worst = worst.max(row.value(x));
        }
        for block in &self.psd_blocks {
            let mut m = block.constant.clone();
            for (k, coeff) in &block.coeffs {
                m += coeff * x[*k];
            }
            let min_eig = nalgebra::SymmetricEigen::new(0.5 * (&m + m.transpose()))
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            worst = worst.max(-min_eig);
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let check_idx = |i: usize| -> Result<()> {
            if i >= self.n_vars {
                Err(Error::domain(format!(
                    "variable index {i} out of range (n_vars = {})",
                    self.n_vars
                )))
            } else {
                Ok(())
            }
        };
        if self.obj_lin.len() != self.n_vars {
            return Err(Error::domain("obj_lin length must equal n_vars"));
        }
        for &(i, j, _) in &self.obj_quad {
            check_idx(i)?;
            check_idx(j)?;
            if i > j {
                return Err(Error::domain("obj_quad must be upper triangular (i <= j)"));
            }
        }
        for row in self.eq_rows.iter().chain(&self.ineq_rows) {
            for &(i, _) in &row.coeffs {
                check_idx(i)?;
            }
        }
        for row in &self.quad_rows {
            for &(i, j, _) in &row.quad {
                check_idx(i)?;
                check_idx(j)?;
                if i > j {
                    return Err(Error::domain("quad rows must be upper triangular (i <= j)"));
                }
            }
            for &(i, _) in &row.lin {
                check_idx(i)?;
            }
        }
        for block in &self.psd_blocks {
            if block.constant.nrows() != block.dim || block.constant.ncols() != block.dim {
                return Err(Error::domain("PSD block constant has wrong shape"));
            }
            for (k, m) in &block.coeffs {
                check_idx(*k)?;
                if m.nrows() != block.dim || m.ncols() != block.dim {
                    return Err(Error::domain("PSD block coefficient has wrong shape"));
                }
            }
        }
        Ok(())
    }

    /// Human-readable dump of the problem rows (debug aid).
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "conic problem: {} variables", self.n_vars);
        let _ = writeln!(out, "objective quad: {:?}", self.obj_quad);
        let _ = writeln!(out, "objective lin: {:?}", self.obj_lin);
        for (k, row) in self.eq_rows.iter().enumerate() {
            let _ = writeln!(out, "eq[{k}]: {:?} = {}", row.coeffs, row.rhs);
        }
        for (k, row) in self.ineq_rows.iter().enumerate() {
            let _ = writeln!(out, "ineq[{k}]: {:?} <= {}", row.coeffs, row.rhs);
        }
        for (k, row) in self.quad_rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "quad[{k}]: {:?} + {:?} + {} <= 0",
                row.quad, row.lin, row.constant
            );
        }
        for (k, block) in self.psd_blocks.iter().enumerate() {
            let _ = writeln!(
                out,
                "psd[{k}]: dim {} with {} coefficient matrices",
                block.dim,
                block.coeffs.len()
            );
        }
        out
    }
}

/// Factor the symmetric PSD matrix of a quadratic row as L L' (columns of
/// L spanning its range), rejecting indefinite rows.
fn factor_quad_row(row: &QuadRow) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let mut vars: Vec<usize> = Vec::new();
    for &(i, j, _) in &row.quad {
        if !vars.contains(&i) {
            vars.push(i);
        }
        if !vars.contains(&j) {
            vars.push(j);
        }
    }
    vars.sort_unstable();
    let m = vars.len();
    if m == 0 {
        return Ok((vars, DMatrix::zeros(0, 0)));
    }
    let pos = |v: usize| vars.iter().position(|&w| w == v).unwrap();
    let mut g = DMatrix::<f64>::zeros(m, m);
    for &(i, j, c) in &row.quad {
        if i == j {
            g[(pos(i), pos(i))] += c;
        } else {
            g[(pos(i), pos(j))] += 0.5 * c;
            g[(pos(j), pos(i))] += 0.5 * c;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(g);
    let max_eig = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let tol = 1e-9 * max_eig.max(1.0);
    let mut cols = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol {
            return Err(Error::domain(format!(
                "quadratic row is not convex (eigenvalue {lambda:.3e})"
            )));
        }
        if lambda > tol {
            cols.push(eig.eigenvectors.column(k) * lambda.sqrt());
        }
    }
    let mut l = DMatrix::<f64>::zeros(m, cols.len());
    for (c, col) in cols.iter().enumerate() {
        l.column_mut(c).copy_from(col);
    }
    Ok((vars, l))
}

/// svec packing order of the upper triangle, column-major, with
/// off-diagonal entries scaled by sqrt(2) (the backend's PSD cone format).
fn svec_entries(dim: usize) -> Vec<(usize, usize, f64)> {
    let rt2 = std::f64::consts::SQRT_2;
    let mut order = Vec::with_capacity(dim * (dim + 1) / 2);
    for col in 0..dim {
        for row in 0..=col {
            order.push((row, col, if row == col { 1.0 } else { rt2 }));
        }
    }
    order
}

struct TripletMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    fn new(ncols: usize) -> Self {
        TripletMatrix {
            nrows: 0,
            ncols,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.entries.push((row, col, val));
        }
    }

    fn to_csc(&self) -> CscMatrix<f64> {
        let mut sorted = self.entries.clone();
        sorted.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowval: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut idx = 0;
        for col in 0..self.ncols {
            colptr[col] = rowval.len();
            while idx < sorted.len() && sorted[idx].1 == col {
                let (r, _, v) = sorted[idx];
                if rowval.last() == Some(&r) && rowval.len() > colptr[col] {
                    *nzval.last_mut().unwrap() += v;
                } else {
                    rowval.push(r);
                    nzval.push(v);
                }
                idx += 1;
            }
        }
        colptr[self.ncols] = rowval.len();
        CscMatrix::new(self.nrows, self.ncols, colptr, rowval, nzval)
    }
}

/// Solve a conic problem. `warm_start` is accepted for interface
/// stability but ignored by the interior-point backend (each solve runs
/// from the central path), so it never changes the reported optimum.
pub fn solve(problem: &ConicProblem, warm_start: Option<&[f64]>) -> Result<Solution> {
    let _ = warm_start;
    problem.validate()?;
    let n = problem.n_vars;

    // objective: the backend minimises 1/2 x'Px + q'x with P given by its
    // upper triangle; our monomial coefficients give P_ii = 2 c_ii,
    // P_ij = c_ij for i < j.
    let mut p_tri = TripletMatrix::new(n);
    p_tri.nrows = n;
    for &(i, j, c) in &problem.obj_quad {
        p_tri.push(i, j, if i == j { 2.0 * c } else { c });
    }

    let mut a = TripletMatrix::new(n);
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let mut row = 0usize;

    if !problem.eq_rows.is_empty() {
        for r in &problem.eq_rows {
            for &(i, c) in &r.coeffs {
                a.push(row, i, c);
            }
            b.push(r.rhs);
            row += 1;
        }
        cones.push(ZeroConeT(problem.eq_rows.len()));
    }
    if !problem.ineq_rows.is_empty() {
        for r in &problem.ineq_rows {
            for &(i, c) in &r.coeffs {
                a.push(row, i, c);
            }
            b.push(r.rhs);
            row += 1;
        }
        cones.push(NonnegativeConeT(problem.ineq_rows.len()));
    }
    for qr in &problem.quad_rows {
        let (vars, l) = factor_quad_row(qr)?;
        let rank = l.ncols();
        if rank == 0 {
            // purely affine row: fold into a 1-row nonnegative cone
            for &(i, c) in &qr.lin {
                a.push(row, i, c);
            }
            b.push(-qr.constant);
            row += 1;
            cones.push(NonnegativeConeT(1));
            continue;
        }
        // With t = -lin'x - constant, the row reads |L'x|^2 <= t, which is
        // the cone membership (s0, u, s_last) = ((t+1)/2, L'x, (t-1)/2).
        for &(i, c) in &qr.lin {
            a.push(row, i, 0.5 * c);
        }
        b.push(0.5 * (1.0 - qr.constant));
        row += 1;
        for c in 0..rank {
            for (vi, &v) in vars.iter().enumerate() {
                a.push(row, v, -l[(vi, c)]);
            }
            b.push(0.0);
            row += 1;
        }
        for &(i, c) in &qr.lin {
            a.push(row, i, 0.5 * c);
        }
        b.push(0.5 * (-1.0 - qr.constant));
        row += 1;
        cones.push(SecondOrderConeT(rank + 2));
    }
    for block in &problem.psd_blocks {
        let entries = svec_entries(block.dim);
        for &(r, c, scale) in &entries {
            for (k, m) in &block.coeffs {
                a.push(row, *k, -scale * m[(r, c)]);
            }
            b.push(scale * block.constant[(r, c)]);
            row += 1;
        }
        cones.push(PSDTriangleConeT(block.dim));
    }
    a.nrows = row;

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_feas(1e-8)
        .tol_gap_abs(1e-8)
        .tol_gap_rel(1e-8)
        .max_iter(200)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e}")))?;

    let p_csc = p_tri.to_csc();
    let a_csc = a.to_csc();
    let mut solver = DefaultSolver::new(&p_csc, &problem.obj_lin, &a_csc, &b, &cones, settings)
        .map_err(|e| Error::Solver(format!("backend rejected problem: {e:?}")))?;
    solver.solve();

    let status = match solver.solution.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::AlmostSolved | SolverStatus::MaxIterations | SolverStatus::MaxTime => {
            SolveStatus::MaxIterations
        }
        _ => SolveStatus::NumericalFailure,
    };
    let x = solver.solution.x.clone();
    let objective = if x.len() == n {
        problem.objective_at(&x)
    } else {
        f64::NAN
    };
    Ok(Solution {
        status,
        x,
        objective,
        solve_time: solver.solution.solve_time,
        iterations: solver.info.iterations as usize,
    })
}
