//! Splitting a Gram polynomial into a difference of convex polynomials.

use nalgebra::{DMatrix, DVector};

use super::{ForceChannel, GramPoly, MonomialBasis, VarScaling};
use crate::solver::{ConicProblem, PsdBlock, SolveStatus};
use crate::{Error, Result};

/// Difference-of-convex decomposition of one fitted channel:
/// f = y'Py = y'Qy - y'Ry with both Hessian forms positive semidefinite.
#[derive(Debug, Clone)]
pub struct DcSplit {
    pub channel: ForceChannel,
    pub basis: MonomialBasis,
    pub scaling: VarScaling,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Smallest Hessian eigenvalue over both convex parts (the achieved
    /// convexity margin; zero for a minimal split).
    pub sigma: f64,
    /// Fit statistics carried over from the least-squares stage.
    pub mean_rel_error: f64,
    pub max_abs_error: f64,
}

/// Value/gradient bundle of the two convex parts at one scaled point.
#[derive(Debug, Clone)]
pub struct GhEval {
    pub g: f64,
    pub h: f64,
    pub grad_g: DVector<f64>,
    pub grad_h: DVector<f64>,
}

impl DcSplit {
    /// Evaluate g, h and their gradients at a scaled point.
    /// The gradient of y'My is 2 y'M D_i y per variable.
    pub fn eval(&self, s: &[f64]) -> GhEval {
        let y = self.basis.eval(s);
        let qy = &self.q * &y;
        let ry = &self.r * &y;
        let g = y.dot(&qy);
        let h = y.dot(&ry);
        let n = self.basis.n_vars;
        let mut grad_g = DVector::zeros(n);
        let mut grad_h = DVector::zeros(n);
        for i in 0..n {
            let diy = &self.basis.diff[i] * &y;
            grad_g[i] = 2.0 * qy.dot(&diy);
            grad_h[i] = 2.0 * ry.dot(&diy);
        }
        GhEval {
            g,
            h,
            grad_g,
            grad_h,
        }
    }

    /// Fitted polynomial value y'Py at a scaled point.
    pub fn eval_fit(&self, s: &[f64]) -> f64 {
        let y = self.basis.eval(s);
        (y.transpose() * &self.p * y)[(0, 0)]
    }

    /// Fitted polynomial value at a physical point.
    pub fn eval_fit_physical(&self, x: &[f64; 4]) -> f64 {
        self.eval_fit(&self.scaling.to_scaled(x))
    }
}

/// The Hessian of y'My as a grid of Gram blocks:
/// d^2(y'My)/dx_i dx_j = y' [H]_{ij} y with
/// [H]_{ij} = D_{j,i}' M + M D_{i,j} + D_i' M D_j + D_j' M D_i.
/// Returned as the (n*dim) x (n*dim) block matrix; its positive
/// semidefiniteness certifies convexity of y'My everywhere.
pub fn hessian_blocks(m: &DMatrix<f64>, basis: &MonomialBasis) -> DMatrix<f64> {
    let n = basis.n_vars;
    let dim = basis.len();
    let mut big = DMatrix::<f64>::zeros(n * dim, n * dim);
    for i in 0..n {
        for j in 0..n {
            let block = basis.diff_prod[j][i].transpose() * m
                + m * &basis.diff_prod[i][j]
                + basis.diff[i].transpose() * m * &basis.diff[j]
                + basis.diff[j].transpose() * m * &basis.diff[i];
            big.view_mut((i * dim, j * dim), (dim, dim)).copy_from(&block);
        }
    }
    big
}

/// Constant Hessian of the quadratic y'My for a degree-1 basis: twice the
/// variable-variable block of M.
fn constant_hessian(m: &DMatrix<f64>, n_vars: usize) -> DMatrix<f64> {
    2.0 * m.view((1, 1), (n_vars, n_vars)).clone_owned()
}

/// Split P = Q - R with both parts convex.
///
/// For a degree-1 basis the Hessians are constant matrices and the
/// minimal split is exact: the positive eigenpart of the quadratic block
/// goes to g, the negative part to h, and all affine terms go to g. For
/// higher degrees the split is found by a semidefinite program over the
/// Gram matrix of g, minimising the total Hessian trace subject to both
/// Hessian block forms being positive semidefinite.
pub fn dc_split(gp: &GramPoly) -> Result<DcSplit> {
    let dim = gp.basis.len();
    let n = gp.basis.n_vars;
    if gp.matrix.nrows() != dim {
        return Err(Error::domain("Gram matrix size does not match basis"));
    }
    let p_sym = 0.5 * (&gp.matrix + gp.matrix.transpose());

    let (q, r) = if gp.basis.half_degree == 1 {
        let hp = constant_hessian(&p_sym, n);
        let eig = nalgebra::SymmetricEigen::new(hp.clone());
        let mut plus = DMatrix::<f64>::zeros(n, n);
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > 0.0 {
                let v = eig.eigenvectors.column(k);
                plus += lambda * v * v.transpose();
            }
        }
        let mut q = p_sym.clone();
        // quadratic block of Q from the positive Hessian part; affine and
        // constant terms stay with g
        q.view_mut((1, 1), (n, n)).copy_from(&(0.5 * &plus));
        let r = &q - &p_sym;
        (q, r)
    } else {
        split_by_sdp(&p_sym, &gp.basis)?
    };

    let hg = hessian_blocks(&q, &gp.basis);
    let hh = hessian_blocks(&r, &gp.basis);
    let min_eig = |m: &DMatrix<f64>| {
        nalgebra::SymmetricEigen::new(0.5 * (m + m.transpose()))
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    };
    let sigma = min_eig(&hg).min(min_eig(&hh));
    if sigma < -1e-7 {
        return Err(Error::Solver(format!(
            "split produced indefinite Hessian (min eig {sigma:.3e})"
        )));
    }

    Ok(DcSplit {
        channel: gp.channel,
        basis: gp.basis.clone(),
        scaling: gp.scaling.clone(),
        p: p_sym,
        q,
        r,
        sigma,
        mean_rel_error: gp.mean_rel_error,
        max_abs_error: gp.max_abs_error,
    })
}

/// Higher-degree split: decision variable Q (symmetric, in its upper
/// triangle), PSD constraints on the Hessian block forms of Q and Q - P,
/// objective trace(H_g) + trace(H_h).
fn split_by_sdp(p: &DMatrix<f64>, basis: &MonomialBasis) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let dim = basis.len();
    let n = basis.n_vars;
    let n_free = dim * (dim + 1) / 2;
    let tri: Vec<(usize, usize)> = (0..dim)
        .flat_map(|a| (a..dim).map(move |b| (a, b)))
        .collect();

    // H is linear in its Gram argument: precompute H(E_ab) per free entry.
    let mut h_of_basis = Vec::with_capacity(n_free);
    for &(a, b) in &tri {
        let mut e = DMatrix::<f64>::zeros(dim, dim);
        e[(a, b)] = 1.0;
        e[(b, a)] = 1.0;
        h_of_basis.push(hessian_blocks(&e, basis));
    }
    let h_of_p = hessian_blocks(p, basis);

    let mut problem = ConicProblem::new(n_free);
    // objective: trace H(Q) from both PSD blocks = 2 trace H(Q) + const
    for (k, hb) in h_of_basis.iter().enumerate() {
        problem.obj_lin[k] = 2.0 * hb.trace();
    }
    let hg_block = PsdBlock {
        dim: n * dim,
        constant: DMatrix::zeros(n * dim, n * dim),
        coeffs: h_of_basis
            .iter()
            .enumerate()
            .map(|(k, hb)| (k, hb.clone()))
            .collect(),
    };
    let hh_block = PsdBlock {
        dim: n * dim,
        constant: -&h_of_p,
        coeffs: h_of_basis
            .iter()
            .enumerate()
            .map(|(k, hb)| (k, hb.clone()))
            .collect(),
    };
    problem.psd_blocks.push(hg_block);
    problem.psd_blocks.push(hh_block);

    let sol = crate::solver::solve(&problem, None)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "degree > 1 split SDP ended with status {:?}",
            sol.status
        )));
    }
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    for (k, &(a, b)) in tri.iter().enumerate() {
        q[(a, b)] = sol.x[k];
        q[(b, a)] = sol.x[k];
    }
    let r = &q - p;
    Ok((q, r))
}

/// Verification report over probe points (the decomposition quality
/// columns reported for each channel).
#[derive(Debug, Clone)]
pub struct SplitReport {
    pub channel: ForceChannel,
    /// mean(|f_true - y'Py|) / mean(|f_true|) over the probes.
    pub ls_mean_rel_error: f64,
    /// max |y'(Q - R - P)y| / (1 + |y'Py|) over the probes.
    pub max_residue: f64,
    /// Smallest Hessian eigenvalue over both parts (at every probe for
    /// degree > 1; the Hessians are constant for degree 1).
    pub min_hessian_eig: f64,
    /// Number of probes at which either Hessian failed PSD (below -1e-9).
    pub non_psd_count: usize,
}

/// Evaluate the three decomposition-quality columns on probe points with
/// known true channel values.
pub fn verify_split(split: &DcSplit, probes: &[[f64; 4]], truth: &[f64]) -> SplitReport {
    assert_eq!(probes.len(), truth.len());
    let mut sum_abs_err = 0.0;
    let mut sum_abs_val = 0.0;
    let mut max_residue = 0.0_f64;
    let qrp = &split.q - &split.r - &split.p;
    for (x, &f) in probes.iter().zip(truth) {
        let s = split.scaling.to_scaled(x);
        let y = split.basis.eval(&s);
        let fit = (y.transpose() * &split.p * &y)[(0, 0)];
        sum_abs_err += (fit - f).abs();
        sum_abs_val += f.abs();
        let residue = (y.transpose() * &qrp * &y)[(0, 0)].abs();
        max_residue = max_residue.max(residue / (1.0 + fit.abs()));
    }

    let min_eig_of = |m: &DMatrix<f64>, s: &[f64]| -> f64 {
        let n = split.basis.n_vars;
        let dim = split.basis.len();
        let y = split.basis.eval(s);
        let big = hessian_blocks(m, &split.basis);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let block = big.view((i * dim, j * dim), (dim, dim));
                hess[(i, j)] = (y.transpose() * block * &y)[(0, 0)];
            }
        }
        nalgebra::SymmetricEigen::new(0.5 * (&hess + hess.transpose()))
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    };

    let mut min_hessian_eig = f64::INFINITY;
    let mut non_psd_count = 0;
    if split.basis.half_degree == 1 {
        // constant Hessians: check once
        let n = split.basis.n_vars;
        for m in [&split.q, &split.r] {
            let h = constant_hessian(m, n);
            let e = nalgebra::SymmetricEigen::new(0.5 * (&h + h.transpose()))
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            min_hessian_eig = min_hessian_eig.min(e);
        }
        if min_hessian_eig < -1e-9 {
            non_psd_count = probes.len();
        }
    } else {
        for x in probes {
            let s = split.scaling.to_scaled(x);
            let e = min_eig_of(&split.q, &s).min(min_eig_of(&split.r, &s));
            min_hessian_eig = min_hessian_eig.min(e);
            if e < -1e-9 {
                non_psd_count += 1;
            }
        }
    }

    SplitReport {
        channel: split.channel,
        ls_mean_rel_error: sum_abs_err / sum_abs_val.max(1e-12),
        max_residue,
        min_hessian_eig,
        non_psd_count,
    }
}
