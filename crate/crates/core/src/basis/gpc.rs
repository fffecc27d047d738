//! Global gPC basis: tensorized orthonormal Legendre polynomials on
//! `E = [-1,1]^d` with respect to the uniform density `rho_i = 1/2`.

use crate::error::{Error, Result};
use super::quadrature::legendre_with_derivative;

/// Total-order multi-index set `{k : |k| <= N}` in graded lexicographic
/// order (by total degree, then lexicographic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    max_order: usize,
    indices: Vec<Vec<usize>>,
}

impl MultiIndexSet {
    pub fn total_order(dim: usize, max_order: usize) -> Self {
        assert!(dim >= 1);
        let mut indices = Vec::with_capacity(count_basis(max_order, dim));
        for total in 0..=max_order {
            let mut current = vec![0usize; dim];
            emit_compositions(total, 0, &mut current, &mut indices);
        }
        Self {
            dim,
            max_order,
            indices,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn position(&self, k: &[usize]) -> Option<usize> {
        self.indices.iter().position(|m| m == k)
    }
}

fn emit_compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    // Lexicographic: larger leading entries first.
    for v in (0..=remaining).rev() {
        current[pos] = v;
        emit_compositions(remaining - v, pos + 1, current, out);
    }
}

/// Number of total-order basis functions, `P = (N+d)! / (N! d!)`.
pub fn count_basis(max_order: usize, dim: usize) -> usize {
    let mut p = 1usize;
    for i in 1..=dim {
        p = p * (max_order + i) / i;
    }
    p
}

/// Orthonormal Legendre value `psi_n(x) = sqrt(2n+1) P_n(x)` w.r.t. the
/// density 1/2 on [-1, 1].
pub fn legendre_orthonormal(n: usize, x: f64) -> f64 {
    let (p, _) = legendre_with_derivative(n, x);
    ((2 * n + 1) as f64).sqrt() * p
}

/// Tensor-product orthonormal Legendre basis over a multi-index set.
#[derive(Debug, Clone)]
pub struct GpcBasis {
    indices: MultiIndexSet,
}

impl GpcBasis {
    pub fn new(dim: usize, max_order: usize) -> Self {
        Self {
            indices: MultiIndexSet::total_order(dim, max_order),
        }
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.dim()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// Evaluates the basis function at flat position `j`.
    pub fn eval_at(&self, j: usize, xi: &[f64]) -> f64 {
        self.indices.indices()[j]
            .iter()
            .zip(xi)
            .map(|(&n, &x)| legendre_orthonormal(n, x))
            .product()
    }

    /// Evaluates all basis functions at `xi`, in index order.
    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        // Univariate values are shared across multi-indices.
        let d = self.dim();
        let n_max = self.indices.max_order();
        let mut uni = vec![vec![0.0; n_max + 1]; d];
        for (k, col) in uni.iter_mut().enumerate() {
            for (n, v) in col.iter_mut().enumerate() {
                *v = legendre_orthonormal(n, xi[k]);
            }
        }
        self.indices
            .indices()
            .iter()
            .map(|multi| multi.iter().enumerate().map(|(k, &n)| uni[k][n]).product())
            .collect()
    }
}

/// Evaluates the gPC basis function with multi-index `k` at `xi`.
pub fn eval_gpc(basis: &GpcBasis, k: &[usize], xi: &[f64]) -> Result<f64> {
    let j = basis
        .indices()
        .position(k)
        .ok_or_else(|| Error::InvalidArgument(format!("multi-index {k:?} not in basis")))?;
    Ok(basis.eval_at(j, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::quadrature::gauss_legendre;
    use approx::assert_abs_diff_eq;

    #[test]
    fn count_basis_values() {
        assert_eq!(count_basis(2, 2), 6);
        assert_eq!(count_basis(3, 3), 20);
        assert_eq!(count_basis(0, 1), 1);
        assert_eq!(count_basis(0, 5), 1);
        assert_eq!(count_basis(8, 2), 45);
    }

    #[test]
    fn multi_index_graded_lex() {
        let set = MultiIndexSet::total_order(2, 2);
        let expected: Vec<Vec<usize>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(set.indices(), expected.as_slice());
    }

    #[test]
    fn eval_gpc_examples() {
        let b1 = GpcBasis::new(1, 3);
        assert_abs_diff_eq!(eval_gpc(&b1, &[0], &[0.3]).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_gpc(&b1, &[1], &[1.0]).unwrap(), 3.0f64.sqrt(), epsilon = 1e-14);
        let b2 = GpcBasis::new(2, 2);
        assert_abs_diff_eq!(eval_gpc(&b2, &[1, 1], &[1.0, 1.0]).unwrap(), 3.0, epsilon = 1e-13);
        assert!(eval_gpc(&b2, &[3, 3], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn legendre_orthonormality_under_gauss_quadrature() {
        // d <= 3 covered by the tensor structure; check univariate and d=2.
        let n_ord = 5;
        let (x, w) = gauss_legendre(n_ord + 1);
        for i in 0..=n_ord {
            for j in 0..=n_ord {
                let mut acc = 0.0;
                for (xk, wk) in x.iter().zip(&w) {
                    acc += 0.5 * wk * legendre_orthonormal(i, *xk) * legendre_orthonormal(j, *xk);
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(acc, expected, epsilon = 1e-12);
            }
        }
        // Tensor case |j|,|k| <= 5, d=2.
        let basis = GpcBasis::new(2, 5);
        let (x, w) = gauss_legendre(6);
        let p = basis.len();
        let mut gram = vec![vec![0.0; p]; p];
        for (xi, wi) in x.iter().zip(&w) {
            for (xj, wj) in x.iter().zip(&w) {
                let vals = basis.eval_all(&[*xi, *xj]);
                let weight = 0.25 * wi * wj;
                for a in 0..p {
                    for b in 0..p {
                        gram[a][b] += weight * vals[a] * vals[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..p {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[a][b], expected, epsilon = 1e-12);
            }
        }
    }
}
