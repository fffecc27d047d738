//! Hyper-rectangular multi-element with a local orthonormal basis.
//!
//! The local basis is affinely mapped Legendre, orthonormal with respect to
//! the conditional (uniform) density of the element.

use super::gpc::{legendre_orthonormal, MultiIndexSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MeElement {
    lower: Vec<f64>,
    upper: Vec<f64>,
    indices: MultiIndexSet,
}

impl MeElement {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, max_order: usize) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidArgument("element bounds dimension mismatch".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| a >= b) {
            return Err(Error::InvalidArgument("element must have positive extent".into()));
        }
        let indices = MultiIndexSet::total_order(lower.len(), max_order);
        Ok(Self { lower, upper, indices })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.indices
    }

    pub fn num_basis(&self) -> usize {
        self.indices.len()
    }

    /// Probability of the element under the uniform density on E.
    pub fn probability(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| (b - a) / 2.0)
            .product()
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&a, &b))| x >= a && x <= b)
    }

    /// Affine map from the element to the reference cube [-1,1]^d.
    pub fn to_reference(&self, xi: &[f64]) -> Vec<f64> {
        xi.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&a, &b))| (2.0 * x - a - b) / (b - a))
            .collect()
    }

    /// Affine map from reference coordinates to the element.
    pub fn from_reference(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&t, (&a, &b))| a + (t + 1.0) * (b - a) / 2.0)
            .collect()
    }

    /// Evaluates local basis function `j` at a global point `xi`.
    pub fn eval_at(&self, j: usize, xi: &[f64]) -> f64 {
        let z = self.to_reference(xi);
        self.indices.indices()[j]
            .iter()
            .zip(&z)
            .map(|(&n, &t)| legendre_orthonormal(n, t))
            .product()
    }

    /// Evaluates all local basis functions at `xi`.
    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.num_basis()).map(|j| self.eval_at(j, xi)).collect()
    }

    /// Splits the element in half along each dimension in `dims`.
    pub fn bisect(&self, dims: &[usize]) -> Vec<MeElement> {
        let mut children = vec![(self.lower.clone(), self.upper.clone())];
        for &k in dims {
            let mut next = Vec::with_capacity(children.len() * 2);
            for (lo, hi) in children {
                let mid = 0.5 * (lo[k] + hi[k]);
                let mut hi_left = hi.clone();
                hi_left[k] = mid;
                let mut lo_right = lo.clone();
                lo_right[k] = mid;
                next.push((lo.clone(), hi_left));
                next.push((lo_right, hi));
            }
            children = next;
        }
        children
            .into_iter()
            .map(|(lo, hi)| MeElement::new(lo, hi, self.indices.max_order()).expect("child extent"))
            .collect()
    }
}
