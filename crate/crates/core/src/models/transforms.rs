//! CDF transformations mapping the canonical uniform variables
//! `xi in [-1, 1]` to physical model parameters.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};

const P_EPS: f64 = 1e-12;

/// Map `xi in [-1, 1]` to the probability level `p in (0, 1)`, clamped
/// away from the endpoints so unbounded quantiles stay finite.
pub fn xi_to_prob(xi: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&xi) {
        return Err(Error::OutOfDomain(format!("xi = {xi} outside [-1, 1]")));
    }
    Ok((0.5 * (xi + 1.0)).clamp(P_EPS, 1.0 - P_EPS))
}

pub fn uniform_quantile(lo: f64, hi: f64, p: f64) -> f64 {
    lo + (hi - lo) * p
}

/// Quantile of a lognormal specified by the mean and standard deviation of
/// the physical variable itself (not of its logarithm).
pub fn lognormal_quantile(mean: f64, std: f64, p: f64) -> Result<f64> {
    if !(mean > 0.0 && std > 0.0) {
        return Err(Error::InvalidArgument("lognormal needs mean, std > 0".into()));
    }
    let cv2 = (std / mean).powi(2);
    let sigma2 = cv2.ln_1p();
    let mu = mean.ln() - 0.5 * sigma2;
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(p);
    Ok((mu + sigma2.sqrt() * z).exp())
}

pub fn exponential_quantile(mean: f64, p: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::InvalidArgument("exponential needs mean > 0".into()));
    }
    Ok(-mean * (1.0 - p).ln())
}

/// Distribution of `X / Y` with `X ~ U[x_lo, x_hi]`, `Y ~ U[y_lo, y_hi]`
/// independent and strictly positive. The CDF is available in closed form
/// (the integrand in `y` is piecewise linear), and the quantile is obtained
/// by bisection.
#[derive(Debug, Clone)]
pub struct RatioOfUniforms {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl RatioOfUniforms {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        if !(0.0 < x_lo && x_lo < x_hi && 0.0 < y_lo && y_lo < y_hi) {
            return Err(Error::InvalidArgument(
                "ratio of uniforms needs 0 < lo < hi on both factors".into(),
            ));
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x_lo / self.y_hi, self.x_hi / self.y_lo)
    }

    /// `P(X / Y <= m)`, exact.
    pub fn cdf(&self, m: f64) -> f64 {
        let (lo, hi) = self.support();
        if m <= lo {
            return 0.0;
        }
        if m >= hi {
            return 1.0;
        }
        let (a, b, c, d) = (self.x_lo, self.x_hi, self.y_lo, self.y_hi);
        // g(y) = P(X <= m y) is 0 below a/m, 1 above b/m, linear between.
        let ya = (a / m).clamp(c, d);
        let yb = (b / m).clamp(c, d);
        let linear = (0.5 * m * (yb * yb - ya * ya) - a * (yb - ya)) / (b - a);
        let saturated = d - yb;
        (linear + saturated) / (d - c)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.support();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xi_mapping_and_clamping() {
        assert_abs_diff_eq!(xi_to_prob(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(xi_to_prob(-1.0).unwrap(), 1e-12);
        assert_abs_diff_eq!(xi_to_prob(1.0).unwrap(), 1.0 - 1e-12);
        assert!(xi_to_prob(1.5).is_err());
    }

    #[test]
    fn uniform_endpoints_and_median() {
        assert_abs_diff_eq!(uniform_quantile(2.0, 6.0, 0.0), 2.0);
        assert_abs_diff_eq!(uniform_quantile(2.0, 6.0, 0.5), 4.0);
        assert_abs_diff_eq!(uniform_quantile(2.0, 6.0, 1.0), 6.0);
    }

    #[test]
    fn exponential_known_values() {
        assert_abs_diff_eq!(exponential_quantile(2.0, 0.5).unwrap(), 2.0 * 2f64.ln());
        assert_abs_diff_eq!(
            exponential_quantile(1.0, 1.0 - (-3.0f64).exp()).unwrap(),
            3.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn lognormal_median_and_moments() {
        // Median is exp(mu).
        let mean: f64 = 200.0;
        let std = 50.0;
        let cv2 = (std / mean).powi(2);
        let mu = mean.ln() - 0.5 * cv2.ln_1p();
        assert_abs_diff_eq!(
            lognormal_quantile(mean, std, 0.5).unwrap(),
            mu.exp(),
            epsilon = 1e-8
        );
        // Recover the mean by quadrature over the probability level.
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let p = (i as f64 + 0.5) / n as f64;
            acc += lognormal_quantile(mean, std, p).unwrap();
        }
        assert_abs_diff_eq!(acc / n as f64, mean, epsilon = 0.1);
    }

    #[test]
    fn ratio_cdf_matches_monte_carlo() {
        let r = RatioOfUniforms::new(0.7, 1.3, 0.8, 1.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        for m in [0.7, 0.9, 1.0, 1.2, 1.5] {
            let hits = (0..n)
                .filter(|_| {
                    let x = rng.gen_range(0.7..1.3);
                    let y = rng.gen_range(0.8..1.2);
                    x / y <= m
                })
                .count();
            assert_abs_diff_eq!(hits as f64 / n as f64, r.cdf(m), epsilon = 5e-3);
        }
    }

    #[test]
    fn ratio_cdf_properties_and_inverse() {
        let r = RatioOfUniforms::new(0.5, 2.0, 1.0, 4.0).unwrap();
        let (lo, hi) = r.support();
        assert_abs_diff_eq!(r.cdf(lo), 0.0);
        assert_abs_diff_eq!(r.cdf(hi), 1.0);
        let mut prev = -1.0;
        for i in 0..=50 {
            let m = lo + (hi - lo) * i as f64 / 50.0;
            let f = r.cdf(m);
            assert!(f >= prev);
            prev = f;
        }
        for p in [0.01, 0.25, 0.5, 0.75, 0.99] {
            assert_abs_diff_eq!(r.cdf(r.quantile(p)), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(RatioOfUniforms::new(1.0, 1.0, 0.5, 1.0).is_err());
        assert!(RatioOfUniforms::new(-1.0, 1.0, 0.5, 1.0).is_err());
        assert!(lognormal_quantile(-1.0, 1.0, 0.5).is_err());
        assert!(exponential_quantile(0.0, 0.5).is_err());
    }
}
