//! Exact solver for Burgers' equation with a stochastic Riemann initial
//! condition, evaluated at a fixed space-time query point.

use super::ForwardModel;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Riemann setup `u = u_L = a + sigma_L cos(c xi_1)` left of `x0` and
/// `u = u_R = b + sigma_R cos(c xi_2)` right of it, flux `u^2/2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurgersRiemannConfig {
    pub a: f64,
    pub b: f64,
    pub sigma_l: f64,
    pub sigma_r: f64,
    pub c: f64,
    pub x0: f64,
    /// Query location of the QI.
    pub x_query: f64,
    /// Query time of the QI.
    pub t_query: f64,
}

impl Default for BurgersRiemannConfig {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: -0.5,
            sigma_l: 0.4,
            sigma_r: 0.3,
            c: 3.0,
            x0: 0.0,
            x_query: -0.1,
            t_query: 1.0,
        }
    }
}

impl BurgersRiemannConfig {
    pub fn left_state(&self, xi1: f64) -> f64 {
        self.a + self.sigma_l * (self.c * xi1).cos()
    }

    pub fn right_state(&self, xi2: f64) -> f64 {
        self.b + self.sigma_r * (self.c * xi2).cos()
    }

    fn states(&self, xi: &[f64]) -> Result<(f64, f64)> {
        if xi.len() < 2 {
            return Err(Error::InvalidArgument("Burgers model needs d >= 2".into()));
        }
        let u_l = self.left_state(xi[0]);
        let u_r = self.right_state(xi[1]);
        if u_l <= u_r {
            return Err(Error::UnsupportedConfiguration(format!(
                "rarefaction regime u_L = {u_l} <= u_R = {u_r}"
            )));
        }
        Ok((u_l, u_r))
    }
}

/// Exact shock solution at the query point: the shock travels at the
/// Rankine-Hugoniot speed `s = (u_L + u_R) / 2`; at `x* = x0 + sT` the
/// left state is returned (pinned tie-break).
pub fn burgers_exact(cfg: &BurgersRiemannConfig, xi: &[f64]) -> Result<f64> {
    let (u_l, u_r) = cfg.states(xi)?;
    let s = 0.5 * (u_l + u_r);
    if cfg.x_query <= cfg.x0 + s * cfg.t_query {
        Ok(u_l)
    } else {
        Ok(u_r)
    }
}

/// Signed indicator `g(xi) = x0 + T (u_L + u_R)/2 - x*`; its zero set is
/// exactly the stochastic discontinuity of the QI, positive where the left
/// state is observed.
pub fn burgers_discontinuity_indicator(cfg: &BurgersRiemannConfig, xi: &[f64]) -> Result<f64> {
    let (u_l, u_r) = cfg.states(xi)?;
    Ok(cfg.x0 + cfg.t_query * 0.5 * (u_l + u_r) - cfg.x_query)
}

/// [`ForwardModel`] wrapper around [`burgers_exact`].
#[derive(Debug, Clone, Default)]
pub struct BurgersModel {
    pub config: BurgersRiemannConfig,
}

impl BurgersModel {
    pub fn new(config: BurgersRiemannConfig) -> Self {
        Self { config }
    }
}

impl ForwardModel for BurgersModel {
    fn name(&self) -> &str {
        "burgers"
    }

    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        burgers_exact(&self.config, xi)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn synthetic_shock_side() {
        // u_L = 1, u_R = 0, x* = 0.4: s = 0.5, query left of the shock.
        let cfg = BurgersRiemannConfig {
            a: 1.0,
            b: 0.0,
            sigma_l: 0.0,
            sigma_r: 0.0,
            x_query: 0.4,
            t_query: 1.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(burgers_exact(&cfg, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn default_center_point() {
        // xi = 0: u_L = 0.9, u_R = -0.2, s = 0.35 > x* = -0.1.
        let cfg = BurgersRiemannConfig::default();
        assert_abs_diff_eq!(burgers_exact(&cfg, &[0.0, 0.0]).unwrap(), 0.9);
    }

    #[test]
    fn zero_cosine_point() {
        // cos(c xi) = 0 in both dimensions: u_L = 0.5, u_R = -0.5, so the
        // shock is stationary at x0 = 0 and the query x* = -0.1 sits on the
        // left side.
        let cfg = BurgersRiemannConfig::default();
        let xi = std::f64::consts::FRAC_PI_2 / cfg.c;
        let got = burgers_exact(&cfg, &[xi, xi]).unwrap();
        assert_abs_diff_eq!(got, 0.5, epsilon = 1e-12);
        // Shifting the query to the right of the shock flips the state.
        let cfg_right = BurgersRiemannConfig { x_query: 0.1, ..cfg };
        let got = burgers_exact(&cfg_right, &[xi, xi]).unwrap();
        assert_abs_diff_eq!(got, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn indicator_values() {
        let cfg = BurgersRiemannConfig::default();
        assert_abs_diff_eq!(
            burgers_discontinuity_indicator(&cfg, &[0.0, 0.0]).unwrap(),
            0.45,
            epsilon = 1e-14
        );
        // On the curve the indicator vanishes and the tie-break picks u_L.
        let cfg_on = BurgersRiemannConfig {
            a: 1.0,
            b: 0.0,
            sigma_l: 0.0,
            sigma_r: 0.0,
            x_query: 0.5,
            t_query: 1.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(
            burgers_discontinuity_indicator(&cfg_on, &[0.3, -0.4]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(burgers_exact(&cfg_on, &[0.3, -0.4]).unwrap(), 1.0);
    }

    #[test]
    fn indicator_depends_on_cosine_sum_only() {
        let cfg = BurgersRiemannConfig::default();
        let a = burgers_discontinuity_indicator(&cfg, &[0.25, -0.5]).unwrap();
        let b = burgers_discontinuity_indicator(&cfg, &[-0.25, 0.5]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
    }

    #[test]
    fn rarefaction_rejected() {
        let cfg = BurgersRiemannConfig {
            a: 0.0,
            b: 1.0,
            sigma_l: 0.0,
            sigma_r: 0.0,
            ..Default::default()
        };
        assert!(burgers_exact(&cfg, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn takes_exactly_two_values_by_indicator_sign() {
        let cfg = BurgersRiemannConfig::default();
        let n = 41;
        for i in 0..n {
            for j in 0..n {
                let xi = [
                    -1.0 + 2.0 * i as f64 / (n - 1) as f64,
                    -1.0 + 2.0 * j as f64 / (n - 1) as f64,
                ];
                let u = burgers_exact(&cfg, &xi).unwrap();
                let g = burgers_discontinuity_indicator(&cfg, &xi).unwrap();
                let expected = if g >= 0.0 {
                    cfg.left_state(xi[0])
                } else {
                    cfg.right_state(xi[1])
                };
                assert_eq!(u, expected);
            }
        }
    }
}
