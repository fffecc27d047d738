//! Vertical-equilibrium CO2 plume migration model with three uncertain
//! parameters (mobility ratio, weighted permeability, background flow),
//! solved by the finite-volume scheme in [`crate::models::fv`].

use super::fv::{fv_solve_scalar, FvMesh1d, FvOptions};
use super::transforms::{
    exponential_quantile, lognormal_quantile, xi_to_prob, RatioOfUniforms,
};
use super::ForwardModel;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Configuration of the plume-migration quantity of interest
/// `u(x_query, t_query)` in units of meters and years.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Co2ModelConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    /// Observation location of the QI (m).
    pub x_query: f64,
    /// Observation time of the QI (years).
    pub t_query: f64,
    /// Injection location; the initial plume is centred here (m).
    pub x_injection: f64,
    /// Half-width of the flat top of the initial trapezoidal plume (m).
    pub plume_top_halfwidth: f64,
    /// Half-width of the base of the initial trapezoidal plume (m).
    pub plume_base_halfwidth: f64,
    /// Porosity times aquifer thickness, the coefficient of `R u_t` (m).
    pub porosity_thickness: f64,
    /// Residual brine saturation in the CO2 region.
    pub s_br: f64,
    /// Residual CO2 saturation left behind a receding plume.
    pub s_cr: f64,
    /// Converts permeability in mD to the buoyancy flux coefficient `K`
    /// (m^2/yr per mD); folds in density difference, gravity, slope, and
    /// brine mobility.
    pub kappa_scale: f64,
    /// Converts the raw background flow (m^2/s) to m^2/yr with an
    /// effective-thickness normalization folded in.
    pub q_scale: f64,
    pub perm_mean_md: f64,
    pub perm_std_md: f64,
    pub lambda_c_lo: f64,
    pub lambda_c_hi: f64,
    pub lambda_b_lo: f64,
    pub lambda_b_hi: f64,
    /// Mean of the exponentially distributed raw background flow (m^2/s).
    pub q_mean: f64,
}

impl Default for Co2ModelConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 2000.0,
            cells: 250,
            x_query: 600.0,
            t_query: 600.0,
            x_injection: 500.0,
            plume_top_halfwidth: 25.0,
            plume_base_halfwidth: 75.0,
            porosity_thickness: 3.0,
            s_br: 0.1,
            s_cr: 0.1,
            kappa_scale: 0.007,
            q_scale: 3.0e7,
            perm_mean_md: 200.0,
            perm_std_md: 50.0,
            lambda_c_lo: 0.7 * 6.25e-5,
            lambda_c_hi: 1.3 * 6.25e-5,
            lambda_b_lo: 0.8 * 5.0e-4,
            lambda_b_hi: 1.2 * 5.0e-4,
            q_mean: 1.0e-9,
        }
    }
}

/// Physical parameters after the CDF transformations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Co2Parameters {
    pub mobility_ratio: f64,
    pub kappa: f64,
    pub background_flow: f64,
}

/// Map `xi = (xi_1, xi_2, xi_3)` to `(M, K, Q)`.
pub fn co2_parameters(cfg: &Co2ModelConfig, xi: &[f64]) -> Result<Co2Parameters> {
    if xi.len() < 3 {
        return Err(Error::InvalidArgument("CO2 model needs d >= 3".into()));
    }
    let ratio = RatioOfUniforms::new(
        cfg.lambda_c_lo,
        cfg.lambda_c_hi,
        cfg.lambda_b_lo,
        cfg.lambda_b_hi,
    )?;
    let mobility_ratio = ratio.quantile(xi_to_prob(xi[0])?);
    let perm_md = lognormal_quantile(cfg.perm_mean_md, cfg.perm_std_md, xi_to_prob(xi[1])?)?;
    let background_flow =
        cfg.q_scale * exponential_quantile(cfg.q_mean, xi_to_prob(xi[2])?)?;
    Ok(Co2Parameters {
        mobility_ratio,
        kappa: cfg.kappa_scale * perm_md,
        background_flow,
    })
}

/// Fractional-flow function `f(u) = (Q + K (1 - u)) M u / (1 + (M - 1) u)`.
pub fn co2_flux(p: &Co2Parameters, u: f64) -> f64 {
    (p.background_flow + p.kappa * (1.0 - u)) * p.mobility_ratio * u
        / (1.0 + (p.mobility_ratio - 1.0) * u)
}

fn initial_plume(cfg: &Co2ModelConfig, x: f64) -> f64 {
    let r = (x - cfg.x_injection).abs();
    if r <= cfg.plume_top_halfwidth {
        1.0
    } else if r >= cfg.plume_base_halfwidth {
        0.0
    } else {
        (cfg.plume_base_halfwidth - r) / (cfg.plume_base_halfwidth - cfg.plume_top_halfwidth)
    }
}

/// Solve the plume equation for the given stochastic point and return the
/// plume height at `(x_query, t_query)`.
pub fn co2_evaluate(cfg: &Co2ModelConfig, xi: &[f64]) -> Result<f64> {
    let params = co2_parameters(cfg, xi)?;
    let mesh = FvMesh1d::new(cfg.x_min, cfg.x_max, cfg.cells)?;
    if !(cfg.x_min..=cfg.x_max).contains(&cfg.x_query) {
        return Err(Error::InvalidArgument("x_query outside the domain".into()));
    }
    let u0: Vec<f64> = (0..cfg.cells).map(|i| initial_plume(cfg, mesh.center(i))).collect();
    let flux = move |u: f64| co2_flux(&params, u);
    let s_br = cfg.s_br;
    let s_cr = cfg.s_cr;
    let accumulation =
        move |_: f64, shrinking: bool| if shrinking { 1.0 - s_br - s_cr } else { 1.0 - s_br };
    let opts = FvOptions { cfl: 0.5, porosity: cfg.porosity_thickness };
    let u = fv_solve_scalar(&flux, &accumulation, &u0, &mesh, cfg.t_query, &opts)?;
    // Linear interpolation of cell averages at the query point.
    let s = (cfg.x_query - mesh.center(0)) / mesh.dx();
    let i = (s.floor().max(0.0) as usize).min(cfg.cells - 2);
    let t = (s - i as f64).clamp(0.0, 1.0);
    Ok((1.0 - t) * u[i] + t * u[i + 1])
}

/// [`ForwardModel`] wrapper around [`co2_evaluate`].
#[derive(Debug, Clone, Default)]
pub struct Co2Model {
    pub config: Co2ModelConfig,
}

impl Co2Model {
    pub fn new(config: Co2ModelConfig) -> Self {
        Self { config }
    }
}

impl ForwardModel for Co2Model {
    fn name(&self) -> &str {
        "co2"
    }

    fn dim(&self) -> usize {
        3
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        co2_evaluate(&self.config, xi)
    }
}
