//! Adaptive multi-element gPC: split hyper-rectangular elements wherever the
//! local coefficient decay is slow, estimate local coefficients from a fixed
//! low-discrepancy sampling design per element, and aggregate statistics by
//! element probability.

use crate::basis::{MeElement, MultiIndexSet};
use crate::error::{Error, Result};
use crate::models::ForwardModel;
use crate::parallel::try_par_map_indexed;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct MegpcConfig {
    /// Maximum total polynomial order N of every local basis.
    pub max_order: usize,
    /// Split whenever `eta^alpha * P(element) >= theta1`.
    pub theta1: f64,
    /// Split every dimension whose sensitivity is within `theta2` of the max.
    pub theta2: f64,
    /// Decay exponent of the split criterion.
    pub alpha: f64,
    /// Hard cap on the number of leaves; reaching it stops refinement.
    pub max_elements: usize,
    /// Resolution floor: no element is split below this width, tying the
    /// surrogate resolution to the stochastic discretization of the
    /// experiment. `None` disables the floor.
    pub min_width: Option<f64>,
}

impl Default for MegpcConfig {
    fn default() -> Self {
        Self {
            max_order: 2,
            theta1: 1e-3,
            theta2: 0.2,
            alpha: 0.5,
            max_elements: 20_000,
            min_width: None,
        }
    }
}

impl MegpcConfig {
    fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::InvalidArgument("max_order must be >= 1".into()));
        }
        if !(self.theta1 > 0.0) {
            return Err(Error::InvalidArgument("theta1 must be positive".into()));
        }
        if !(self.theta2 > 0.0 && self.theta2 < 1.0) {
            return Err(Error::InvalidArgument("theta2 must be in (0, 1)".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument("alpha must be in (0, 1)".into()));
        }
        if self.max_elements == 0 {
            return Err(Error::InvalidArgument("max_elements must be >= 1".into()));
        }
        if let Some(w) = self.min_width {
            if !(w > 0.0) {
                return Err(Error::InvalidArgument("min_width must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A fitted leaf: the element plus its local expansion coefficients.
#[derive(Debug, Clone)]
pub struct LeafFit {
    pub element: MeElement,
    pub coefficients: Vec<f64>,
}

#[derive(Debug)]
pub struct MegpcResult {
    pub leaves: Vec<LeafFit>,
    /// Cumulative model evaluations, including discarded parent fits.
    pub n_ev: usize,
    /// Refinement rounds executed (1 = no splits happened).
    pub rounds: usize,
    pub mean: f64,
    pub variance: f64,
    /// True when `max_elements` stopped refinement before the criterion did.
    pub budget_exhausted: bool,
}

impl MegpcResult {
    pub fn num_elements(&self) -> usize {
        self.leaves.len()
    }

    /// Evaluates the piecewise expansion; boundary points go to the
    /// lowest-index containing leaf.
    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        let leaf = self
            .leaves
            .iter()
            .find(|l| l.element.contains(xi))
            .ok_or_else(|| Error::OutOfDomain(format!("{xi:?} is outside every element")))?;
        let vals = leaf.element.eval_all(xi);
        Ok(vals.iter().zip(&leaf.coefficients).map(|(p, c)| p * c).sum())
    }
}

/// Coefficient rate of decay: energy of the top-order block over the energy
/// of everything above the constant. A constant element decays "perfectly"
/// (0 by convention).
pub fn local_decay(coeffs: &[f64], indices: &MultiIndexSet) -> f64 {
    let n = indices.max_order();
    let mut constant = 0.0;
    let mut top = 0.0;
    let mut rest = 0.0;
    for (c, k) in coeffs.iter().zip(indices.indices()) {
        let order: usize = k.iter().sum();
        if order == 0 {
            constant += c * c;
            continue;
        }
        rest += c * c;
        if order == n {
            top += c * c;
        }
    }
    // A nearly constant element carries only fit noise above the mean (a
    // relative amplitude below 1e-6); its top/rest ratio says nothing, so
    // call it fully decayed.
    if rest <= 1e-12 * (constant + rest) {
        0.0
    } else {
        top / rest
    }
}

/// The split criterion: `eta^alpha * prob >= theta1`.
pub fn should_split(eta: f64, prob: f64, alpha: f64, theta1: f64) -> bool {
    eta.powf(alpha) * prob >= theta1
}

/// Dimensions whose sensitivity (energy of the pure order-N mode in that
/// dimension, relative to the whole top-order block) is within `theta2` of
/// the largest. A fully insensitive element falls back to its single widest
/// dimension.
pub fn split_dimensions(
    coeffs: &[f64],
    indices: &MultiIndexSet,
    theta2: f64,
    widths: &[f64],
) -> Vec<usize> {
    let d = indices.dim();
    let n = indices.max_order();
    let top_energy: f64 = coeffs
        .iter()
        .zip(indices.indices())
        .filter(|(_, k)| k.iter().sum::<usize>() == n)
        .map(|(c, _)| c * c)
        .sum();
    let mut r = vec![0.0; d];
    if top_energy > 0.0 {
        for (i, ri) in r.iter_mut().enumerate() {
            let mut pure = vec![0usize; d];
            pure[i] = n;
            if let Some(j) = indices.position(&pure) {
                *ri = coeffs[j] * coeffs[j] / top_energy;
            }
        }
    }
    let r_max = r.iter().cloned().fold(0.0f64, f64::max);
    if r_max == 0.0 {
        let widest = widths
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        return vec![widest];
    }
    (0..d).filter(|&i| r[i] >= theta2 * r_max).collect()
}

/// Index into the Halton sequence where the shared per-element design block
/// starts. Every element maps the same block into its own bounds, which keeps
/// the design matrix identical (and verified well-conditioned) across the
/// whole tree; earlier blocks contain near-degenerate projections onto the
/// order-2 basis.
const DESIGN_OFFSET: usize = 23;

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// The van der Corput radical inverse of `i + 1` in the given base.
fn radical_inverse(i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = i + 1;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The sampling design of an element: as many Halton points as local basis
/// functions, mapped into the element bounds. Sized to the basis, the fit is
/// interpolatory, matching the sparse per-element sampling the reference
/// error levels correspond to.
fn element_points(element: &MeElement) -> Vec<Vec<f64>> {
    (0..element.num_basis())
        .map(|i| {
            element
                .lower()
                .iter()
                .zip(element.upper())
                .enumerate()
                .map(|(k, (a, b))| a + (b - a) * radical_inverse(DESIGN_OFFSET + i, PRIMES[k]))
                .collect()
        })
        .collect()
}

/// Least-squares fit of the local orthonormal basis to the element samples.
fn fit_element(element: &MeElement, points: &[Vec<f64>], values: &[f64]) -> Result<Vec<f64>> {
    let p = element.num_basis();
    let mut psi = nalgebra::DMatrix::zeros(points.len(), p);
    for (i, x) in points.iter().enumerate() {
        for (j, v) in element.eval_all(x).into_iter().enumerate() {
            psi[(i, j)] = v;
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(values);
    let report =
        crate::regression::solve_ols_tsvd(&psi, &rhs, crate::regression::DEFAULT_SVD_TOL)?;
    Ok(report.coefficients)
}

/// The refinement loop: fit every pending element, split the flagged ones,
/// repeat until nothing splits or the leaf budget is reached.
pub fn run_adaptive_megpc(model: &dyn ForwardModel, cfg: &MegpcConfig) -> Result<MegpcResult> {
    cfg.validate()?;
    let d = model.dim();
    let root = MeElement::new(vec![-1.0; d], vec![1.0; d], cfg.max_order)?;

    if d > PRIMES.len() {
        return Err(Error::UnsupportedConfiguration(format!(
            "ME-gPC sampling design supports up to {} dimensions, got {d}",
            PRIMES.len()
        )));
    }

    let mut pending = vec![root];
    let mut leaves: Vec<LeafFit> = Vec::new();
    let mut n_ev = 0usize;
    let mut rounds = 0usize;
    let mut budget_exhausted = false;

    while !pending.is_empty() {
        rounds += 1;

        // One flat evaluation batch per round.
        let point_sets: Vec<Vec<Vec<f64>>> = pending.iter().map(element_points).collect();
        let flat: Vec<&[f64]> =
            point_sets.iter().flat_map(|s| s.iter().map(Vec::as_slice)).collect();
        let flat_values = try_par_map_indexed(flat.len(), |i| model.evaluate(flat[i]))?;
        n_ev += flat.len();

        let mut offset = 0;
        let mut next = Vec::new();
        let round_size = pending.len();
        for (idx, (element, points)) in pending.into_iter().zip(&point_sets).enumerate() {
            let values = &flat_values[offset..offset + points.len()];
            offset += points.len();
            let coeffs = fit_element(&element, points, values)?;

            let eta = local_decay(&coeffs, element.indices());
            let split = should_split(eta, element.probability(), cfg.alpha, cfg.theta1);
            // Every element still pending this round yields at least one
            // leaf; splitting adds 2^|dims| - 1 on top of that minimum.
            let min_final = leaves.len() + next.len() + (round_size - idx);
            let capacity = cfg.max_elements.saturating_sub(min_final);
            if split && capacity > 0 {
                let widths: Vec<f64> = element
                    .lower()
                    .iter()
                    .zip(element.upper())
                    .map(|(a, b)| b - a)
                    .collect();
                let mut dims = split_dimensions(&coeffs, element.indices(), cfg.theta2, &widths);
                // The resolution floor: children may not be narrower than
                // the stochastic discretization resolves.
                if let Some(min_w) = cfg.min_width {
                    dims.retain(|&k| widths[k] / 2.0 >= min_w * (1.0 - 1e-9));
                }
                // Honor the budget: drop split dimensions until the children
                // fit, falling back to keeping the element if even a single
                // bisection does not.
                while !dims.is_empty() && (1usize << dims.len()) - 1 > capacity {
                    dims.pop();
                    budget_exhausted = true;
                }
                if dims.is_empty() {
                    leaves.push(LeafFit { element, coefficients: coeffs });
                } else {
                    next.extend(element.bisect(&dims));
                }
            } else {
                if split {
                    budget_exhausted = true;
                }
                leaves.push(LeafFit { element, coefficients: coeffs });
            }
        }
        pending = next;
    }

    // Orthonormal local bases: psi_0 = 1, so the local mean is c_0 and the
    // local second moment is the coefficient energy.
    let mean: f64 = leaves
        .iter()
        .map(|l| l.element.probability() * l.coefficients[0])
        .sum();
    let second: f64 = leaves
        .iter()
        .map(|l| {
            l.element.probability() * l.coefficients.iter().map(|c| c * c).sum::<f64>()
        })
        .sum();
    let variance = (second - mean * mean).max(0.0);

    Ok(MegpcResult { leaves, n_ev, rounds, mean, variance, budget_exhausted })
}

/// CSV dump of the leaf elements: bounds, probability, and the constant
/// coefficient (the local mean).
pub fn write_elements_csv<W: Write>(result: &MegpcResult, w: &mut W) -> Result<()> {
    let d = result.leaves.first().map_or(0, |l| l.element.dim());
    let mut header = Vec::new();
    for k in 1..=d {
        header.push(format!("lo{k}"));
    }
    for k in 1..=d {
        header.push(format!("hi{k}"));
    }
    header.push("probability".into());
    header.push("local_mean".into());
    writeln!(w, "{}", header.join(","))?;
    for l in &result.leaves {
        let mut row: Vec<String> = l.element.lower().iter().map(|v| v.to_string()).collect();
        row.extend(l.element.upper().iter().map(|v| v.to_string()));
        row.push(l.element.probability().to_string());
        row.push(l.coefficients[0].to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BurgersModel;
    use approx::assert_abs_diff_eq;

    struct FnModel {
        dim: usize,
        f: fn(&[f64]) -> f64,
    }

    impl ForwardModel for FnModel {
        fn name(&self) -> &str {
            "fn"
        }
        fn dim(&self) -> usize {
            self.dim
        }
        fn evaluate(&self, xi: &[f64]) -> Result<f64> {
            Ok((self.f)(xi))
        }
        fn is_exact(&self) -> bool {
            true
        }
    }

    #[test]
    fn local_decay_examples() {
        let idx = MultiIndexSet::total_order(2, 2);
        // Index layout: order 0, then order 1, then order 2 blocks.
        let mut top_only = vec![0.0; idx.len()];
        let mut first_only = vec![0.0; idx.len()];
        let mut both = vec![0.0; idx.len()];
        for (j, k) in idx.indices().iter().enumerate() {
            match k.iter().sum::<usize>() {
                2 => {
                    top_only[j] = 1.0;
                    both[j] = 1.0;
                }
                1 => {
                    first_only[j] = 1.0;
                    both[j] = if k[0] == 1 && k[1] == 0 { 3f64.sqrt() } else { 0.0 };
                }
                _ => {}
            }
        }
        assert_abs_diff_eq!(local_decay(&top_only, &idx), 1.0);
        assert_abs_diff_eq!(local_decay(&first_only, &idx), 0.0);
        // both: top block energy 3, first block energy 3 -> ratio 0.5.
        assert_abs_diff_eq!(local_decay(&both, &idx), 0.5);
        // Constant element: zero denominator convention.
        assert_abs_diff_eq!(local_decay(&vec![0.0; idx.len()], &idx), 0.0);
    }

    #[test]
    fn should_split_examples() {
        assert!(should_split(1.0, 1.0, 0.5, 0.5));
        assert!(!should_split(0.0, 1.0, 0.5, 1e-12));
        // 0.01^0.5 * 0.25 = 0.025 >= 1e-3.
        assert!(should_split(0.01, 0.25, 0.5, 1e-3));
    }

    #[test]
    fn split_dimensions_examples() {
        let idx = MultiIndexSet::total_order(2, 2);
        let widths = [2.0, 2.0];
        let pure = |dim: usize, value: f64| {
            let mut c = vec![0.0; idx.len()];
            let mut k = vec![0usize; 2];
            k[dim] = 2;
            c[idx.position(&k).unwrap()] = value;
            c
        };

        // Energy only in dimension 1's pure top mode.
        assert_eq!(split_dimensions(&pure(0, 1.0), &idx, 0.2, &widths), vec![0]);

        // Equal sensitivities keep both dimensions.
        let mut equal = pure(0, 1.0);
        let c2 = pure(1, 1.0);
        for (a, b) in equal.iter_mut().zip(&c2) {
            *a += b;
        }
        assert_eq!(split_dimensions(&equal, &idx, 0.2, &widths), vec![0, 1]);

        // r = (1.0, 0.1): the weak dimension is dropped at theta2 = 0.2.
        let mut skew = pure(0, 1.0);
        let weak = pure(1, 0.1f64.sqrt());
        for (a, b) in skew.iter_mut().zip(&weak) {
            *a += b;
        }
        assert_eq!(split_dimensions(&skew, &idx, 0.2, &widths), vec![0]);

        // All-zero sensitivities fall back to the widest dimension.
        let zero = vec![0.0; idx.len()];
        assert_eq!(split_dimensions(&zero, &idx, 0.2, &[1.0, 2.0]), vec![1]);
    }

    #[test]
    fn smooth_polynomial_stays_single_element() {
        // Order below N: the whole top-order block is zero, so eta = 0.
        let model = FnModel { dim: 2, f: |xi| 1.0 + xi[0] + 0.5 * xi[1] };
        let cfg = MegpcConfig::default();
        let r = run_adaptive_megpc(&model, &cfg).unwrap();
        assert_eq!(r.num_elements(), 1);
        assert_eq!(r.rounds, 1);
        assert!(!r.budget_exhausted);
        // Analytic moments of 1 + x + y/2 on the uniform square.
        assert_abs_diff_eq!(r.mean, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.variance, 1.0 / 3.0 + 1.0 / 12.0, epsilon = 1e-10);
        // The expansion reproduces the polynomial pointwise.
        assert_abs_diff_eq!(r.evaluate(&[0.3, -0.7]).unwrap(), 1.0 + 0.3 - 0.35, epsilon = 1e-10);
    }

    #[test]
    fn step_function_refines_with_floor() {
        // A sharp front forces refinement but the resolution floor caps it;
        // global moments come out right regardless of how the splits are
        // oriented (interpolatory fits alias some front energy into the
        // transverse modes, so split directions are not asserted here).
        let model = FnModel { dim: 2, f: |xi| (20.0 * (xi[0] - 0.1234)).tanh() };
        let cfg =
            MegpcConfig { theta1: 1e-4, min_width: Some(2.0 / 64.0), ..MegpcConfig::default() };
        let r = run_adaptive_megpc(&model, &cfg).unwrap();
        assert!(r.num_elements() > 4);
        // The resolution floor holds in every dimension.
        for l in &r.leaves {
            for k in 0..2 {
                assert!(l.element.upper()[k] - l.element.lower()[k] >= 2.0 / 64.0 - 1e-12);
            }
        }
        let total: f64 = r.leaves.iter().map(|l| l.element.probability()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // Near-indicator moments: mean ~ -0.1234, variance ~ 1 - mean^2,
        // with O(1/20) transition-width corrections.
        assert_abs_diff_eq!(r.mean, -0.1234, epsilon = 0.03);
        assert_abs_diff_eq!(r.variance, 1.0 - 0.1234f64.powi(2), epsilon = 0.1);
    }

    #[test]
    fn split_decisions_invariant_under_qi_scaling() {
        // A power-of-two factor keeps the coefficient scaling exact in
        // floating point, so every eta/r ratio is bit-identical; arbitrary
        // factors perturb near-threshold split decisions in the last ulp.
        let base = FnModel { dim: 2, f: |xi| if xi[0] + xi[1] > 0.3 { 1.0 } else { 0.0 } };
        let scaled =
            FnModel { dim: 2, f: |xi| if xi[0] + xi[1] > 0.3 { -256.0 } else { 0.0 } };
        let cfg = MegpcConfig { theta1: 1e-3, ..MegpcConfig::default() };
        let a = run_adaptive_megpc(&base, &cfg).unwrap();
        let b = run_adaptive_megpc(&scaled, &cfg).unwrap();
        assert_eq!(a.num_elements(), b.num_elements());
        for (la, lb) in a.leaves.iter().zip(&b.leaves) {
            assert_eq!(la.element.lower(), lb.element.lower());
            assert_eq!(la.element.upper(), lb.element.upper());
        }
    }

    #[test]
    fn tighter_tolerance_never_coarsens() {
        let model = BurgersModel::default();
        let loose =
            run_adaptive_megpc(&model, &MegpcConfig { theta1: 1e-2, ..MegpcConfig::default() })
                .unwrap();
        let tight =
            run_adaptive_megpc(&model, &MegpcConfig { theta1: 1e-3, ..MegpcConfig::default() })
                .unwrap();
        assert!(tight.num_elements() >= loose.num_elements());
        for r in [&loose, &tight] {
            let total: f64 = r.leaves.iter().map(|l| l.element.probability()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn budget_cap_is_honored() {
        let model = FnModel { dim: 2, f: |xi| (20.0 * (xi[0] - 0.1234)).tanh() };
        let cfg = MegpcConfig { theta1: 1e-12, max_elements: 5, ..MegpcConfig::default() };
        let r = run_adaptive_megpc(&model, &cfg).unwrap();
        assert!(r.budget_exhausted);
        assert!(r.num_elements() <= 5);
    }

    #[test]
    fn invalid_configs_rejected() {
        let model = FnModel { dim: 1, f: |_| 0.0 };
        for cfg in [
            MegpcConfig { max_order: 0, ..MegpcConfig::default() },
            MegpcConfig { theta1: 0.0, ..MegpcConfig::default() },
            MegpcConfig { theta2: 1.0, ..MegpcConfig::default() },
            MegpcConfig { alpha: 0.0, ..MegpcConfig::default() },
            MegpcConfig { max_elements: 0, ..MegpcConfig::default() },
        ] {
            assert!(run_adaptive_megpc(&model, &cfg).is_err());
        }
    }

    #[test]
    fn elements_csv_shape() {
        let model = FnModel { dim: 2, f: |xi| xi[0] };
        let r = run_adaptive_megpc(&model, &MegpcConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_elements_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + r.num_elements());
        assert_eq!(lines[0], "lo1,lo2,hi1,hi2,probability,local_mean");
    }
}

