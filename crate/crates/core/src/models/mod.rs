//! Parameterized forward models producing the quantity of interest
//! `u(xi)` at a fixed space-time point.

pub mod blackbox;
pub mod burgers;
pub mod co2;
pub mod fv;
pub mod registry;
pub mod transforms;

use crate::error::Result;
use crate::grid::{Fidelity, ModelEvaluationCache, StochasticGrid};
use crate::parallel::try_par_map_indexed;

pub use blackbox::BlackBoxModel;
pub use burgers::{burgers_discontinuity_indicator, burgers_exact, BurgersRiemannConfig, BurgersModel};
pub use co2::{co2_evaluate, Co2Model, Co2ModelConfig};
pub use fv::{fv_solve_scalar, FvMesh1d, FvOptions};
pub use registry::build_model;

/// A deterministic map from a stochastic parameter point to a scalar QI.
///
/// Evaluation must be pure: repeated calls at identical `xi` return
/// bit-identical values, so concurrent evaluation at distinct points is the
/// intended parallelization axis.
pub trait ForwardModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn evaluate(&self, xi: &[f64]) -> Result<f64>;
    /// Whether [`evaluate`] is an exact (non-discretized) solution.
    fn is_exact(&self) -> bool {
        false
    }
}

/// Evaluates the model at every grid point (in parallel) and tags all
/// entries high-fidelity.
pub fn evaluate_on_grid(
    model: &dyn ForwardModel,
    grid: &StochasticGrid,
) -> Result<ModelEvaluationCache> {
    let n = grid.num_points();
    let values = try_par_map_indexed(n, |i| model.evaluate(&grid.point(i)))?;
    ModelEvaluationCache::new(grid.clone(), values, vec![Fidelity::High; n])
}
