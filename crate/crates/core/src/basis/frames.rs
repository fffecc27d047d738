//! Frames of global polynomials restricted to the two regions cut out by a
//! sign classifier (typically the sign of the locked level-set field).
//!
//! Gram matrix and expectation vector are assembled with trapezoidal
//! quadrature over an existing evaluation grid, so no extra model
//! evaluations are needed.

use super::gpc::GpcBasis;
use crate::error::{Error, Result};
use crate::grid::{ModelEvaluationCache, StochasticGrid};
use nalgebra::{DMatrix, DVector};

/// Region classifier: `true` for the plus region, `false` for minus.
pub type Classifier = Box<dyn Fn(&[f64]) -> bool + Send + Sync>;

pub struct FrameSet {
    basis: GpcBasis,
    classifier: Classifier,
    gram: DMatrix<f64>,
    mean_vector: DVector<f64>,
}

impl std::fmt::Debug for FrameSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameSet")
            .field("frame_count", &self.frame_count())
            .finish()
    }
}

/// Per-point trapezoid quadrature weights against the uniform density, in
/// flat grid order. Weights sum to 1.
pub fn trapezoid_weights(grid: &StochasticGrid) -> Vec<f64> {
    let d = grid.dim();
    let n = grid.num_points();
    let mut w = vec![0.0; n];
    let cell: f64 = (0..d).map(|k| grid.spacing(k) / 2.0).product();
    for (i, wi) in w.iter_mut().enumerate() {
        let multi = grid.multi_index(i);
        let mut factor = 1.0;
        for (k, &j) in multi.iter().enumerate() {
            if j == 0 || j == grid.points_per_dim()[k] - 1 {
                factor *= 0.5;
            }
        }
        *wi = cell * factor;
    }
    w
}

impl FrameSet {
    pub fn basis(&self) -> &GpcBasis {
        &self.basis
    }

    /// Number of frame functions, twice the underlying basis size.
    pub fn frame_count(&self) -> usize {
        2 * self.basis.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn mean_vector(&self) -> &DVector<f64> {
        &self.mean_vector
    }

    pub fn classify(&self, xi: &[f64]) -> bool {
        (self.classifier)(xi)
    }

    /// Evaluates all frame functions at `xi`: plus block first, minus block
    /// second, each in basis index order.
    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        let p = self.basis.len();
        let vals = self.basis.eval_all(xi);
        let mut out = vec![0.0; 2 * p];
        if (self.classifier)(xi) {
            out[..p].copy_from_slice(&vals);
        } else {
            out[p..].copy_from_slice(&vals);
        }
        out
    }

    /// Evaluates the frame expansion with coefficient vector `coeffs`.
    pub fn eval_expansion(&self, coeffs: &[f64], xi: &[f64]) -> f64 {
        let p = self.basis.len();
        let vals = self.basis.eval_all(xi);
        let block = if (self.classifier)(xi) {
            &coeffs[..p]
        } else {
            &coeffs[p..]
        };
        block.iter().zip(&vals).map(|(c, v)| c * v).sum()
    }

    /// Extreme eigenvalues of the Gram matrix (frame bounds of the
    /// truncated set).
    pub fn gram_eigen_bounds(&self) -> (f64, f64) {
        let eig = self.gram.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }
}

/// Assembles the frame set from a classifier, a global basis, and the
/// existing evaluation grid.
pub fn build_frames(
    classifier: Classifier,
    basis: GpcBasis,
    cache: &ModelEvaluationCache,
) -> Result<FrameSet> {
    let grid = cache.grid();
    let n = grid.num_points();
    let p = basis.len();
    let w = trapezoid_weights(grid);

    let mut gram = DMatrix::<f64>::zeros(2 * p, 2 * p);
    let mut mean = DVector::<f64>::zeros(2 * p);
    let mut plus_points = 0usize;
    let mut minus_points = 0usize;
    for i in 0..n {
        let xi = grid.point(i);
        let vals = basis.eval_all(&xi);
        let offset = if classifier(&xi) {
            plus_points += 1;
            0
        } else {
            minus_points += 1;
            p
        };
        for a in 0..p {
            mean[offset + a] += w[i] * vals[a];
            for b in a..p {
                gram[(offset + a, offset + b)] += w[i] * vals[a] * vals[b];
            }
        }
    }
    for a in 0..2 * p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    if plus_points == 0 || minus_points == 0 {
        return Err(Error::EmptyRegion(format!(
            "classifier yields {plus_points} plus and {minus_points} minus grid points"
        )));
    }
    Ok(FrameSet {
        basis,
        classifier,
        gram,
        mean_vector: mean,
    })
}

/// Mean and variance of a frame expansion from its coefficients.
pub fn frame_statistics(coeffs: &[f64], frames: &FrameSet) -> Result<(f64, f64)> {
    if coeffs.len() != frames.frame_count() {
        return Err(Error::InvalidArgument(format!(
            "coefficient length {} does not match frame count {}",
            coeffs.len(),
            frames.frame_count()
        )));
    }
    let c = DVector::from_column_slice(coeffs);
    let mean = c.dot(frames.mean_vector());
    let variance = (frames.gram() * &c).dot(&c) - mean * mean;
    Ok((mean, variance))
}
