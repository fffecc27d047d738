//! Multi-level front tracking: lock the level set on a coarse grid, refine,
//! and spend high-fidelity model evaluations only inside a band around the
//! interpolated iso-zero, filling everything else with surrogate
//! (multilinear) values.

use crate::error::{Error, Result};
use crate::grid::{
    build_grid, interpolate_values, refine_grid, Fidelity, ModelEvaluationCache,
    StochasticDomain,
};
use crate::levelset::{
    build_speed_field, evolve_to_lock, init_levelset, redistance, EvolveOptions, LevelSetField,
};
use crate::models::{evaluate_on_grid, ForwardModel};
use crate::parallel::try_par_map_indexed;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct TrackerConfig {
    /// Number of grid levels (1 = coarse only).
    pub levels: usize,
    /// Points per dimension on the coarse grid.
    pub m0: usize,
    /// High-fidelity band half-width in units of the coarse spacing.
    pub band_tol: f64,
    /// Sharpening constant of the speed factor `exp(-gamma |grad u|^2)`.
    pub gamma: f64,
    pub seed_center: Vec<f64>,
    pub seed_radius: f64,
    pub evolve: EvolveOptions,
}

impl TrackerConfig {
    pub fn defaults_for(dim: usize) -> Self {
        Self {
            levels: 2,
            m0: 31,
            band_tol: 3.0,
            gamma: 1.0,
            seed_center: vec![0.0; dim],
            seed_radius: 0.25,
            evolve: EvolveOptions::default(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidArgument("levels must be >= 1".into()));
        }
        if !(self.band_tol > 0.0) {
            return Err(Error::InvalidArgument("band_tol must be positive".into()));
        }
        if self.seed_center.len() != dim {
            return Err(Error::InvalidArgument("seed center dimension mismatch".into()));
        }
        Ok(())
    }
}

/// Per-level accounting. High-fidelity counts are cumulative because every
/// high-fidelity value is reused verbatim on finer levels.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub m: usize,
    pub n_ev_high_cum: usize,
    pub n_total: usize,
    /// Fraction of grid points carrying high-fidelity values.
    pub p: f64,
    pub steps_to_lock: usize,
    pub tau_lock: f64,
}

#[derive(Debug)]
pub struct TrackerResult {
    pub field: LevelSetField,
    pub cache: ModelEvaluationCache,
    pub levels: Vec<LevelRecord>,
}

/// High fidelity iff strictly inside the band `|phi| < band_tol * dxi`.
pub fn classify_new_points(phi_interp: &[f64], band_tol: f64, dxi_coarse: f64) -> Vec<Fidelity> {
    phi_interp
        .iter()
        .map(|&v| if v.abs() < band_tol * dxi_coarse { Fidelity::High } else { Fidelity::Surrogate })
        .collect()
}

/// Run the full coarse-to-fine tracking loop.
pub fn run_tracker(model: &dyn ForwardModel, cfg: &TrackerConfig) -> Result<TrackerResult> {
    let dim = model.dim();
    cfg.validate(dim)?;
    let domain = StochasticDomain::new(dim)?;
    let grid = build_grid(&domain, cfg.m0)?;

    // Level 1: evaluate everywhere, evolve from the seed sphere.
    let mut cache = evaluate_on_grid(model, &grid)?;
    let speed = build_speed_field(&cache, cfg.gamma)?;
    let phi0 = init_levelset(&grid, &cfg.seed_center, cfg.seed_radius)?;
    let (locked, info) = evolve_to_lock(&phi0, &speed, &cfg.evolve)
        .map_err(|e| Error::NonConvergence(format!("level 1: {e}")))?;
    // Band classification and warm starts read |phi| as a distance, which
    // the raw locked field is not.
    let mut field = redistance(&locked);
    let mut records = vec![LevelRecord {
        level: 1,
        m: cfg.m0,
        n_ev_high_cum: cache.num_high(),
        n_total: grid.num_points(),
        p: cache.high_fraction(),
        steps_to_lock: info.steps,
        tau_lock: field.tau,
    }];

    for level in 2..=cfg.levels {
        let coarse_grid = field.grid.clone();
        let dxi_coarse = coarse_grid.min_spacing();
        let fine = refine_grid(&coarse_grid);

        // Warm-start phi and classify the fine points in one sweep. Points
        // inherited from the coarse grid keep their values and fidelity.
        let n = fine.num_points();
        let mut phi_fine = vec![0.0; n];
        let mut values = vec![0.0; n];
        let mut fidelity = vec![Fidelity::Surrogate; n];
        let mut to_evaluate = Vec::new();
        for i in 0..n {
            let multi = fine.multi_index(i);
            if multi.iter().all(|c| c % 2 == 0) {
                let coarse_multi: Vec<usize> = multi.iter().map(|c| c / 2).collect();
                let j = coarse_grid.flat_index(&coarse_multi);
                phi_fine[i] = field.phi[j];
                values[i] = cache.values()[j];
                fidelity[i] = cache.fidelity()[j];
            } else {
                let p = fine.point(i);
                phi_fine[i] = interpolate_values(&coarse_grid, &field.phi, &p)?;
                if phi_fine[i].abs() < cfg.band_tol * dxi_coarse {
                    fidelity[i] = Fidelity::High;
                    to_evaluate.push(i);
                } else {
                    values[i] = interpolate_values(&coarse_grid, cache.values(), &p)?;
                }
            }
        }
        let fresh = try_par_map_indexed(to_evaluate.len(), |k| {
            model.evaluate(&fine.point(to_evaluate[k]))
        })?;
        for (k, &i) in to_evaluate.iter().enumerate() {
            values[i] = fresh[k];
        }
        cache = ModelEvaluationCache::new(fine.clone(), values, fidelity)?;

        let speed = build_speed_field(&cache, cfg.gamma)?;
        let warm = LevelSetField { grid: fine.clone(), phi: phi_fine, tau: 0.0 };
        let (next, info) = evolve_to_lock(&warm, &speed, &cfg.evolve)
            .map_err(|e| Error::NonConvergence(format!("level {level}: {e}")))?;
        field = redistance(&next);
        records.push(LevelRecord {
            level,
            m: fine.points_per_dim()[0],
            n_ev_high_cum: cache.num_high(),
            n_total: fine.num_points(),
            p: cache.high_fraction(),
            steps_to_lock: info.steps,
            tau_lock: field.tau,
        });
    }

    Ok(TrackerResult { field, cache, levels: records })
}

/// JSON-lines log, one record per level.
pub fn write_level_log<W: Write>(records: &[LevelRecord], w: &mut W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r)
            .map_err(|e| Error::NumericalFailure(format!("log serialization: {e}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}
