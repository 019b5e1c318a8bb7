//! Monomial basis vectors and their differentiation matrices.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Vector of monomials y(x) of total degree up to `half_degree` in
/// `n_vars` variables, in graded-lexicographic order starting with the
/// constant monomial, together with matrices D_i satisfying
/// dy/dx_i = D_i y and their products D_{i,j} = D_i D_j.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    pub n_vars: usize,
    pub half_degree: usize,
    /// Exponent tuple of each monomial.
    pub exponents: Vec<Vec<u32>>,
    /// D_i, one per variable.
    pub diff: Vec<DMatrix<f64>>,
    /// D_{i,j} = D_i * D_j.
    pub diff_prod: Vec<Vec<DMatrix<f64>>>,
}

/// Binomial coefficient C(n, k) for small arguments.
fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

impl MonomialBasis {
    pub fn new(n_vars: usize, half_degree: usize) -> Result<Self> {
        if n_vars < 1 || half_degree < 1 {
            return Err(Error::domain("basis needs n_vars >= 1 and degree >= 1"));
        }
        let mut exponents: Vec<Vec<u32>> = Vec::new();
        for total in 0..=half_degree as u32 {
            let mut current = vec![0u32; n_vars];
            gen_grade(&mut exponents, &mut current, 0, total);
        }
        let dim = exponents.len();
        debug_assert_eq!(dim, binomial(n_vars + half_degree, half_degree));

        // Row k of D_i expresses d(y_k)/dx_i = e_i * y_{index(e - delta_i)}.
        let index_of = |e: &[u32]| exponents.iter().position(|x| x[..] == *e);
        let mut diff = Vec::with_capacity(n_vars);
        for i in 0..n_vars {
            let mut d = DMatrix::<f64>::zeros(dim, dim);
            for (k, e) in exponents.iter().enumerate() {
                if e[i] == 0 {
                    continue;
                }
                let mut reduced = e.clone();
                reduced[i] -= 1;
                let col = index_of(&reduced).expect("derivative stays in basis");
                d[(k, col)] += e[i] as f64;
            }
            diff.push(d);
        }

        let mut diff_prod = Vec::with_capacity(n_vars);
        for i in 0..n_vars {
            let mut row = Vec::with_capacity(n_vars);
            for j in 0..n_vars {
                row.push(&diff[i] * &diff[j]);
            }
            diff_prod.push(row);
        }
        Ok(MonomialBasis {
            n_vars,
            half_degree,
            exponents,
            diff,
            diff_prod,
        })
    }

    /// Basis length (the constant monomial is always present).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    /// Evaluate y(x).
    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.n_vars);
        let mut y = DVector::zeros(self.len());
        for (k, e) in self.exponents.iter().enumerate() {
            let mut v = 1.0;
            for (i, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    v *= x[i];
                }
            }
            y[k] = v;
        }
        y
    }
}

/// Enumerate all exponent tuples of exact total degree `remaining`
/// lexicographically (first variable varies slowest).
fn gen_grade(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, var: usize, remaining: u32) {
    if var == current.len() - 1 {
        current[var] = remaining;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[var] = take;
        gen_grade(out, current, var + 1, remaining - take);
        current[var] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_linear_basis() {
        let b = MonomialBasis::new(1, 1).unwrap();
        assert_eq!(b.exponents, vec![vec![0], vec![1]]);
        // y = [1, x]; dy/dx = [0, 1] = D [1, x] with D = [[0,0],[1,0]]
        assert_eq!(b.diff[0][(0, 0)], 0.0);
        assert_eq!(b.diff[0][(1, 0)], 1.0);
        assert_eq!(b.diff[0][(1, 1)], 0.0);
        assert_eq!(b.diff[0][(0, 1)], 0.0);
    }

    #[test]
    fn four_var_linear_dimension() {
        let b = MonomialBasis::new(4, 1).unwrap();
        assert_eq!(b.len(), 5);
        // constant first, then the variables
        assert_eq!(b.exponents[0], vec![0, 0, 0, 0]);
        // all second-order products vanish for a degree-1 basis
        for i in 0..4 {
            for j in 0..4 {
                assert!(b.diff_prod[i][j].iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn two_var_quadratic_symbolic_derivatives() {
        let b = MonomialBasis::new(2, 2).unwrap();
        assert_eq!(b.len(), 6);
        // symbolic differentiation oracle: for each monomial x1^p x2^q,
        // d/dx1 = p x1^(p-1) x2^q, checked against D_1 y at sample points.
        let pts = [[0.3, -0.7], [1.2, 0.4], [-0.9, -1.1]];
        for x in pts {
            let y = b.eval(&x);
            let dy = &b.diff[0] * &y;
            for (k, e) in b.exponents.iter().enumerate() {
                let (p, q) = (e[0] as i32, e[1] as i32);
                let expect = if p == 0 {
                    0.0
                } else {
                    p as f64 * x[0].powi(p - 1) * x[1].powi(q)
                };
                assert!(
                    (dy[k] - expect).abs() < 1e-12,
                    "monomial {e:?}: got {} want {expect}",
                    dy[k]
                );
            }
        }
    }

    #[test]
    fn differentiation_matches_finite_differences() {
        let b = MonomialBasis::new(3, 3).unwrap();
        let x = [0.37, -0.52, 0.81];
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (b.eval(&xp) - b.eval(&xm)) / (2.0 * h);
            let an = &b.diff[i] * b.eval(&x);
            for k in 0..b.len() {
                assert!(
                    (fd[k] - an[k]).abs() <= 1e-6 * (1.0 + an[k].abs()),
                    "var {i} monomial {k}: fd {} vs {}",
                    fd[k],
                    an[k]
                );
            }
        }
    }

    #[test]
    fn dimension_formula() {
        for (n, d) in [(1, 1), (2, 2), (3, 2), (4, 1), (4, 2), (2, 4)] {
            let b = MonomialBasis::new(n, d).unwrap();
            assert_eq!(b.len(), binomial(n + d, d), "C({}+{},{})", n, d, d);
        }
    }

    #[test]
    fn rejects_trivial_basis() {
        assert!(MonomialBasis::new(0, 1).is_err());
        assert!(MonomialBasis::new(2, 0).is_err());
    }
}
