//! Orthonormal polynomials on simplex elements.
//!
//! The raw family on the unit simplex is the Jacobi-product construction
//! with `a_j = 2 * sum_{i>j} alpha_i + d - j`. Normalization constants are
//! computed numerically from a Gram matrix on a Duffy-mapped tensor
//! Gauss-Legendre rule rather than from a closed form; the closed form for
//! the constants is ill-defined in its last factor, so numerics are
//! authoritative and checked against the d = 1 shifted-Legendre norms in
//! tests.

use super::gpc::MultiIndexSet;
use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Orthonormal polynomial basis on an arbitrary non-degenerate simplex,
/// orthonormal with respect to the conditional uniform probability measure
/// of the simplex.
#[derive(Debug, Clone)]
pub struct SimplexBasis {
    vertices: Vec<Vec<f64>>,
    t_inv: DMatrix<f64>,
    det_t: f64,
    indices: MultiIndexSet,
    /// Row i holds the combination of raw functions giving orthonormal
    /// function i (lower triangular by construction).
    ortho_coeffs: DMatrix<f64>,
}

impl SimplexBasis {
    /// Builds the total-order-`max_order` basis on the simplex with the
    /// given `d + 1` vertices.
    pub fn new(vertices: &[Vec<f64>], max_order: usize) -> Result<Self> {
        let d = vertices
            .first()
            .ok_or_else(|| Error::InvalidArgument("no vertices".into()))?
            .len();
        if vertices.len() != d + 1 {
            return Err(Error::InvalidArgument(format!(
                "simplex in dimension {d} needs {} vertices, got {}",
                d + 1,
                vertices.len()
            )));
        }
        let mut t = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                t[(i, j)] = vertices[j][i] - vertices[d][i];
            }
        }
        let det_t = t.determinant();
        let scale = vertices
            .iter()
            .flat_map(|v| v.iter().map(|x| x.abs()))
            .fold(1.0f64, f64::max);
        if det_t.abs() <= 1e-12 * scale.powi(d as i32) {
            return Err(Error::DegenerateGeometry(format!(
                "simplex volume too small (|det T| = {:.3e})",
                det_t.abs()
            )));
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateGeometry("vertex matrix not invertible".into()))?;

        let indices = MultiIndexSet::total_order(d, max_order);
        let p = indices.len();

        // Gram matrix of the raw family under the normalized measure on the
        // unit simplex, then a Cholesky factorization fixes the constants.
        let (nodes, weights) = simplex_quadrature(d, max_order + 4);
        let mut gram = DMatrix::<f64>::zeros(p, p);
        for (lambda, w) in nodes.iter().zip(&weights) {
            let raw: Vec<f64> = (0..p).map(|j| raw_eval(&indices, j, lambda)).collect();
            for a in 0..p {
                for b in a..p {
                    gram[(a, b)] += w * raw[a] * raw[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("raw simplex Gram not positive definite".into()))?;
        // ortho = L^{-1} raw  =>  <ortho, ortho^T> = I.
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("Cholesky factor not invertible".into()))?;

        Ok(Self {
            vertices: vertices.to_vec(),
            t_inv,
            det_t,
            indices,
            ortho_coeffs: l_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.indices
    }

    pub fn num_basis(&self) -> usize {
        self.indices.len()
    }

    /// Probability of the simplex under the uniform density on E.
    pub fn probability(&self) -> f64 {
        let d = self.dim() as i32;
        self.det_t.abs() / (2f64.powi(d) * factorial(self.dim()))
    }

    /// Barycentric coordinates (excluding the redundant last one).
    pub fn barycentric(&self, xi: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let diff = DVector::from_iterator(d, (0..d).map(|i| xi[i] - self.vertices[d][i]));
        (&self.t_inv * diff).iter().copied().collect()
    }

    /// Inverse of [`barycentric`]: maps reference coordinates to the simplex.
    pub fn from_barycentric(&self, lambda: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut xi = self.vertices[d].clone();
        for (j, &l) in lambda.iter().enumerate() {
            for i in 0..d {
                xi[i] += l * (self.vertices[j][i] - self.vertices[d][i]);
            }
        }
        xi
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        let lambda = self.barycentric(xi);
        let sum: f64 = lambda.iter().sum();
        lambda.iter().all(|&l| l >= -tol) && sum <= 1.0 + tol
    }

    /// Evaluates all orthonormal basis functions at a global point `xi`.
    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        let lambda = self.barycentric(xi);
        self.eval_all_reference(&lambda)
    }

    /// Evaluates all orthonormal basis functions at reference coordinates.
    pub fn eval_all_reference(&self, lambda: &[f64]) -> Vec<f64> {
        let p = self.num_basis();
        let raw: Vec<f64> = (0..p).map(|j| raw_eval(&self.indices, j, lambda)).collect();
        (0..p)
            .map(|i| (0..=i).map(|j| self.ortho_coeffs[(i, j)] * raw[j]).sum())
            .collect()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Raw (unnormalized, mutually orthogonal) simplex polynomial at reference
/// coordinates `lambda` on the unit simplex.
fn raw_eval(indices: &MultiIndexSet, j: usize, lambda: &[f64]) -> f64 {
    let alpha = &indices.indices()[j];
    let d = lambda.len();
    let mut prefix = 0.0; // |lambda_{j-1}|
    let mut suffix: usize = alpha.iter().skip(1).sum(); // |alpha^{j+1}| at j = 1
    let mut value = 1.0;
    for k in 0..d {
        let a_k = 2 * suffix + d - (k + 1);
        let rem: f64 = 1.0 - prefix;
        let n = alpha[k];
        // (1 - |lambda_{k-1}|)^{alpha_k} P^{(a_k, 0)}_{alpha_k}(2 lambda_k / (1 - |lambda_{k-1}|) - 1)
        let factor = if n == 0 {
            1.0
        } else if rem.abs() < 1e-300 {
            0.0
        } else {
            rem.powi(n as i32) * jacobi(n, a_k as f64, 0.0, 2.0 * lambda[k] / rem - 1.0)
        };
        value *= factor;
        prefix += lambda[k];
        if k + 1 < d {
            suffix -= alpha[k + 1];
        }
    }
    value
}

/// Jacobi polynomial P_n^{(a,b)}(x) by three-term recurrence.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = 0.5 * (a - b + (a + b + 2.0) * x);
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
        let a2 = (c - 1.0) * (a * a - b * b);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
        let p_next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = p_next;
    }
    p
}

/// Quadrature on the d-dimensional unit simplex with respect to the uniform
/// probability measure (weights sum to 1). Exact for polynomials of total
/// degree up to about `2q - d`.
pub fn simplex_quadrature(d: usize, q: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let q = q.max(4);
    let (x, w) = gauss_legendre(q);
    // Gauss points mapped from [-1,1] to [0,1].
    let t: Vec<f64> = x.iter().map(|&v| 0.5 * (v + 1.0)).collect();
    let wt: Vec<f64> = w.iter().map(|&v| 0.5 * v).collect();

    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        // Duffy map: lambda_k = t_k * prod_{j<k} (1 - t_j).
        let mut lambda = vec![0.0; d];
        let mut rem = 1.0;
        let mut weight = 1.0;
        for k in 0..d {
            let tk = t[idx[k]];
            lambda[k] = tk * rem;
            weight *= wt[idx[k]] * rem;
            rem *= 1.0 - tk;
        }
        // The Lebesgue Jacobian is prod rem factors; dividing by the simplex
        // volume 1/d! normalizes to a probability measure.
        nodes.push(lambda);
        weights.push(weight * factorial(d));

        let mut k = 0;
        loop {
            if k == d {
                let total: f64 = weights.iter().sum();
                // Guard against drift in the Duffy weights.
                debug_assert!((total - 1.0).abs() < 1e-10);
                return (nodes, weights);
            }
            idx[k] += 1;
            if idx[k] < q {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_mode_is_one() {
        let verts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let basis = SimplexBasis::new(&verts, 2).unwrap();
        let vals = basis.eval_all(&[0.2, 0.3]);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_simplex_probability() {
        let verts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let basis = SimplexBasis::new(&verts, 1).unwrap();
        assert_abs_diff_eq!(basis.probability(), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_simplex_rejected() {
        let verts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5]];
        assert!(SimplexBasis::new(&verts, 1).is_err());
    }

    #[test]
    fn barycentric_maps_vertices_to_units() {
        let verts = vec![vec![-0.3, 0.8], vec![0.9, -0.1], vec![-0.7, -0.9]];
        let basis = SimplexBasis::new(&verts, 1).unwrap();
        let l0 = basis.barycentric(&verts[0]);
        let l1 = basis.barycentric(&verts[1]);
        let l2 = basis.barycentric(&verts[2]);
        assert_abs_diff_eq!(l0[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l0[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l1[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l1[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l2[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l2[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn barycentric_round_trip() {
        let verts = vec![vec![-0.3, 0.8], vec![0.9, -0.1], vec![-0.7, -0.9]];
        let basis = SimplexBasis::new(&verts, 1).unwrap();
        let xi = vec![0.05, -0.2];
        let back = basis.from_barycentric(&basis.barycentric(&xi));
        for (a, b) in xi.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn monte_carlo_gram_is_identity() {
        // Orthonormality oracle: 2e5 uniform samples on a random
        // non-degenerate simplex, N = 2.
        let verts = vec![vec![-0.9, -0.4], vec![0.7, -0.8], vec![0.1, 0.9]];
        let basis = SimplexBasis::new(&verts, 2).unwrap();
        let p = basis.num_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut gram = vec![vec![0.0; p]; p];
        for _ in 0..n {
            // Dirichlet(1,..,1) sample via exponentials.
            let e: Vec<f64> = (0..3).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let s: f64 = e.iter().sum();
            let lambda = [e[0] / s, e[1] / s];
            let vals = basis.eval_all_reference(&lambda);
            for a in 0..p {
                for b in 0..p {
                    gram[a][b] += vals[a] * vals[b] / n as f64;
                }
            }
        }
        for a in 0..p {
            for b in 0..p {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (gram[a][b] - expected).abs() < 5e-3,
                    "gram[{a}][{b}] = {}",
                    gram[a][b]
                );
            }
        }
    }

    #[test]
    fn d1_norms_match_shifted_legendre() {
        // In one dimension the construction reduces to shifted Legendre on
        // [0,1]; orthonormal values at the endpoint are sqrt(2n+1).
        let verts = vec![vec![0.0], vec![1.0]];
        let basis = SimplexBasis::new(&verts, 4).unwrap();
        let vals = basis.eval_all_reference(&[1.0]);
        for (n, v) in vals.iter().enumerate() {
            assert_abs_diff_eq!(v.abs(), ((2 * n + 1) as f64).sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        for d in 1..=3 {
            let (_, w) = simplex_quadrature(d, 6);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}
