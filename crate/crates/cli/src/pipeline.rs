//! Experiment execution: config -> pipeline -> artifact directory.
//!
//! Every run writes into a fresh `<out>/<id>/` directory (append-only: an
//! existing directory is refused) containing `metrics.csv`, method-specific
//! dumps, and a `manifest.json` listing everything produced.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use uqtrack::analytics::{
    monte_carlo_reference, rel_l1_error, rel_moment_errors, write_metrics_csv, McStats, MetricsRow,
};
use uqtrack::basis::{build_frames, count_basis, frame_statistics, FrameSet, GpcBasis, SimplexBasis};
use uqtrack::grid::{
    build_grid, interpolate_values, ModelEvaluationCache, StochasticDomain, StochasticGrid,
};
use uqtrack::levelset::{write_crossings_csv, zero_crossing_points, LevelSetField};
use uqtrack::megpc::{run_adaptive_megpc, write_elements_csv, MegpcConfig};
use uqtrack::models::burgers::{burgers_discontinuity_indicator, BurgersRiemannConfig};
use uqtrack::models::{build_model, evaluate_on_grid, ForwardModel};
use uqtrack::parallel::try_par_map_indexed;
use uqtrack::regression::{repair_misclassified, solve_lad, solve_ols_tsvd, DEFAULT_SVD_TOL};
use uqtrack::tessellation::{assign_points, initial_mesh, refine_by_levelset, SimplexMesh};
use uqtrack::tracker::{run_tracker, write_level_log, LevelRecord, TrackerResult};

use crate::config::{ClassifierKind, CliError, ExperimentConfig, Method, Regression};

#[derive(Debug)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    /// Tracker per-level accounting; empty for ME-gPC runs.
    pub levels: Vec<LevelRecord>,
}

pub fn run_experiment(cfg: &ExperimentConfig, out_root: &Path) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let model = build_model(&cfg.model.name, &cfg.model.options_json()?)?;
    let run_dir = out_root.join(&cfg.id);
    if run_dir.exists() {
        return Err(CliError::Config(format!(
            "run directory {} already exists (outputs are append-only)",
            run_dir.display()
        )));
    }
    std::fs::create_dir_all(&run_dir)?;
    let mut artifacts: Vec<String> = Vec::new();

    let (surrogate_vals, stats, n_ev, basis_size, levels) = match cfg.method {
        Method::Megpc => run_megpc(cfg, model.as_ref(), &run_dir, &mut artifacts)?,
        Method::Sop => run_sop(cfg, model.as_ref(), &run_dir, &mut artifacts)?,
        Method::Fgpc => run_fgpc(cfg, model.as_ref(), &run_dir, &mut artifacts)?,
    };

    let grid = metric_grid(cfg, model.dim())?;
    let reference = evaluate_on_grid(model.as_ref(), &grid)?;
    let eps_l1 = rel_l1_error(&surrogate_vals, reference.values(), &grid)?;
    let (eps_mean, eps_std) = moment_errors(cfg, model.as_ref(), stats)?;

    let rows = vec![MetricsRow {
        experiment: cfg.id.clone(),
        method: cfg.method.label().to_string(),
        order: cfg.surrogate.order,
        basis_size,
        n_ev,
        eps_l1,
        eps_mean,
        eps_std,
    }];
    write_artifact(&run_dir, "metrics.csv", &mut artifacts, |w| write_metrics_csv(&rows, w))?;
    write_manifest(cfg, &run_dir, &artifacts)?;
    Ok(RunOutput { run_dir, rows, levels })
}

/// The error grid: `grid_m` points per dimension, defaulting to the finest
/// tracker grid so the displayed norm matches the tracked resolution.
fn metric_grid(cfg: &ExperimentConfig, dim: usize) -> Result<StochasticGrid, CliError> {
    let m = cfg.metrics.grid_m.unwrap_or_else(|| {
        (cfg.tracker.m0 - 1) * (1usize << (cfg.tracker.levels - 1)) + 1
    });
    let domain = StochasticDomain::new(dim)?;
    Ok(build_grid(&domain, m)?)
}

fn moment_errors(
    cfg: &ExperimentConfig,
    model: &dyn ForwardModel,
    stats: Option<(f64, f64)>,
) -> Result<(f64, f64), CliError> {
    let (Some((mean, variance)), true) = (stats, cfg.metrics.mc_samples > 0) else {
        return Ok((f64::NAN, f64::NAN));
    };
    let mc: McStats = monte_carlo_reference(model, cfg.metrics.mc_samples, cfg.seed)?;
    Ok(rel_moment_errors(mean, variance.max(0.0).sqrt(), &mc)?)
}

fn run_megpc(
    cfg: &ExperimentConfig,
    model: &dyn ForwardModel,
    run_dir: &Path,
    artifacts: &mut Vec<String>,
) -> Result<(Vec<f64>, Option<(f64, f64)>, usize, usize, Vec<LevelRecord>), CliError> {
    let mcfg = MegpcConfig {
        max_order: cfg.surrogate.order,
        theta1: cfg.megpc.theta1,
        theta2: cfg.megpc.theta2,
        alpha: cfg.megpc.alpha,
        max_elements: cfg.megpc.max_elements,
    };
    let result = run_adaptive_megpc(model, &mcfg)?;
    write_artifact(run_dir, "elements.csv", artifacts, |w| write_elements_csv(&result, w))?;
    let grid = metric_grid(cfg, model.dim())?;
    let vals = try_par_map_indexed(grid.num_points(), |i| result.evaluate(&grid.point(i)))?;
    Ok((
        vals,
        Some((result.mean, result.variance)),
        result.n_ev,
        count_basis(cfg.surrogate.order, model.dim()),
        Vec::new(),
    ))
}

fn track(
    cfg: &ExperimentConfig,
    model: &dyn ForwardModel,
    run_dir: &Path,
    artifacts: &mut Vec<String>,
) -> Result<TrackerResult, CliError> {
    let tcfg = cfg.tracker.to_tracker_config(model.dim());
    let result = run_tracker(model, &tcfg)?;
    write_artifact(run_dir, "levels.csv", artifacts, |w| write_level_log(&result.levels, w))?;
    let crossings = zero_crossing_points(&result.field);
    write_artifact(run_dir, "crossings.csv", artifacts, |w| {
        write_crossings_csv(model.dim(), &crossings, w)
    })?;
    Ok(result)
}

fn run_sop(
    cfg: &ExperimentConfig,
    model: &dyn ForwardModel,
    run_dir: &Path,
    artifacts: &mut Vec<String>,
) -> Result<(Vec<f64>, Option<(f64, f64)>, usize, usize, Vec<LevelRecord>), CliError> {
    let tracked = track(cfg, model, run_dir, artifacts)?;
    let dim = model.dim();
    let coarse = initial_mesh(dim, cfg.tessellation.coarse_n)?;
    let min_sep = cfg
        .tessellation
        .min_sep
        .unwrap_or_else(|| 0.5 * tracked.field.grid.min_spacing());
    let mesh = refine_by_levelset(&coarse, &tracked.field, min_sep)?;
    write_artifact(run_dir, "mesh_vertices.csv", artifacts, |w| mesh.write_vertices_csv(w))?;
    write_artifact(run_dir, "mesh_simplices.csv", artifacts, |w| mesh.write_simplices_csv(w))?;

    let surrogate = fit_sop(&mesh, &tracked.cache, cfg.surrogate.order, cfg.surrogate.regression)?;
    let grid = metric_grid(cfg, dim)?;
    let vals = try_par_map_indexed(grid.num_points(), |i| surrogate.evaluate(&grid.point(i)))?;
    let stats = surrogate.mean_variance();
    Ok((
        vals,
        Some(stats),
        tracked.cache.num_high(),
        count_basis(cfg.surrogate.order, dim),
        tracked.levels,
    ))
}

struct SimplexFit {
    basis: SimplexBasis,
    coefficients: Vec<f64>,
}

/// Piecewise-polynomial surrogate over a labeled simplex mesh. Simplices
/// without enough sample points fall back to the mean of whatever they
/// contain (or the global sample mean when empty).
pub struct SopSurrogate {
    mesh: SimplexMesh,
    fits: Vec<Option<SimplexFit>>,
    fallback: Vec<f64>,
}

impl SopSurrogate {
    pub fn evaluate(&self, xi: &[f64]) -> uqtrack::Result<f64> {
        let e = self.mesh.locate(xi)?;
        Ok(match &self.fits[e] {
            Some(fit) => {
                let psi = fit.basis.eval_all(xi);
                psi.iter().zip(&fit.coefficients).map(|(p, c)| p * c).sum()
            }
            None => self.fallback[e],
        })
    }

    /// Global moments from the orthonormal local expansions: the local mean
    /// is the constant coefficient and the local second moment the sum of
    /// squared coefficients, weighted by element probability.
    pub fn mean_variance(&self) -> (f64, f64) {
        let dim = self.mesh.dim();
        let mut mean = 0.0;
        let mut second = 0.0;
        for (e, fit) in self.fits.iter().enumerate() {
            match fit {
                Some(f) => {
                    let p = f.basis.probability();
                    mean += p * f.coefficients[0];
                    second += p * f.coefficients.iter().map(|c| c * c).sum::<f64>();
                }
                None => {
                    let p = self.mesh.volume(e) / (2.0f64.powi(dim as i32));
                    mean += p * self.fallback[e];
                    second += p * self.fallback[e] * self.fallback[e];
                }
            }
        }
        (mean, second - mean * mean)
    }
}

pub fn fit_sop(
    mesh: &SimplexMesh,
    cache: &ModelEvaluationCache,
    max_order: usize,
    regression: Regression,
) -> Result<SopSurrogate, CliError> {
    let assignment = assign_points(mesh, cache)?;
    let dim = mesh.dim();
    let grid = cache.grid();
    let values = cache.values();
    let global_mean = values.iter().sum::<f64>() / values.len() as f64;

    let mut fits = Vec::with_capacity(mesh.num_simplices());
    let mut fallback = Vec::with_capacity(mesh.num_simplices());
    for e in 0..mesh.num_simplices() {
        let pts = &assignment.points_of_simplex[e];
        if pts.is_empty() {
            fits.push(None);
            fallback.push(global_mean);
            continue;
        }
        let local_mean = pts.iter().map(|&i| values[i]).sum::<f64>() / pts.len() as f64;
        fallback.push(local_mean);

        // Reduce the order until the element is overdetermined.
        let mut order = max_order;
        while order > 0 && pts.len() <= count_basis(order, dim) {
            order -= 1;
        }
        let basis = SimplexBasis::new(&mesh.simplex_vertices(e), order)?;
        let p = basis.num_basis();
        let mut psi = DMatrix::<f64>::zeros(pts.len(), p);
        let mut u = DVector::<f64>::zeros(pts.len());
        for (row, &i) in pts.iter().enumerate() {
            let xi = grid.point(i);
            psi.row_mut(row).copy_from_slice(&basis.eval_all(&xi));
            u[row] = values[i];
        }
        let report = match regression {
            Regression::Ols => solve_ols_tsvd(&psi, &u, DEFAULT_SVD_TOL)?,
            // LAD needs a residual null space; constant fits of single
            // points have none, so fall back to least squares there.
            Regression::Lad => solve_lad(&psi, &u, DEFAULT_SVD_TOL)
                .or_else(|_| solve_ols_tsvd(&psi, &u, DEFAULT_SVD_TOL))?,
        };
        fits.push(Some(SimplexFit { basis, coefficients: report.coefficients }));
    }
    Ok(SopSurrogate { mesh: mesh.clone(), fits, fallback })
}

fn run_fgpc(
    cfg: &ExperimentConfig,
    model: &dyn ForwardModel,
    run_dir: &Path,
    artifacts: &mut Vec<String>,
) -> Result<(Vec<f64>, Option<(f64, f64)>, usize, usize, Vec<LevelRecord>), CliError> {
    let tracked = track(cfg, model, run_dir, artifacts)?;
    let dim = model.dim();
    let classifier = make_classifier(cfg, model, &tracked.field)?;
    let basis = GpcBasis::new(dim, cfg.surrogate.order);
    let frames = build_frames(classifier, basis, &tracked.cache)?;

    let coeffs = fit_fgpc(&frames, &tracked.cache, cfg.surrogate.regression, cfg.surrogate.repair)?;
    let stats = frame_statistics(&coeffs, &frames)?;
    let grid = metric_grid(cfg, dim)?;
    let vals = try_par_map_indexed(grid.num_points(), |i| {
        uqtrack::Result::Ok(frames.eval_expansion(&coeffs, &grid.point(i)))
    })?;
    let frame_count = frames.frame_count();
    Ok((vals, Some(stats), tracked.cache.num_high(), frame_count, tracked.levels))
}

fn make_classifier(
    cfg: &ExperimentConfig,
    model: &dyn ForwardModel,
    field: &LevelSetField,
) -> Result<uqtrack::basis::Classifier, CliError> {
    match cfg.surrogate.classifier {
        ClassifierKind::Levelset => {
            let field = field.clone();
            Ok(Box::new(move |xi: &[f64]| {
                interpolate_values(&field.grid, &field.phi, xi)
                    .map(|phi| phi >= 0.0)
                    .unwrap_or(true)
            }))
        }
        ClassifierKind::Exact => {
            if !cfg.model.name.starts_with("burgers") {
                return Err(CliError::Config(format!(
                    "exact classifier is only defined for Burgers models, not '{}'",
                    cfg.model.name
                )));
            }
            let bcfg: BurgersRiemannConfig = serde_json::from_value(cfg.model.options_json()?)
                .map_err(|e| CliError::Config(format!("bad model options: {e}")))?;
            let _ = model;
            Ok(Box::new(move |xi: &[f64]| {
                burgers_discontinuity_indicator(&bcfg, xi).map(|v| v >= 0.0).unwrap_or(true)
            }))
        }
    }
}

/// Regress frame coefficients on every cached grid point. With `repair`,
/// points whose residual exceeds a quarter of the sample range (an estimate
/// of the minimum jump) get their region flipped and the system is solved
/// once more.
pub fn fit_fgpc(
    frames: &FrameSet,
    cache: &ModelEvaluationCache,
    regression: Regression,
    repair: bool,
) -> Result<Vec<f64>, CliError> {
    let grid = cache.grid();
    let values = cache.values();
    let n = grid.num_points();
    let p = frames.basis().len();
    let mut flipped = vec![false; n];

    let solve = |flipped: &[bool]| -> Result<uqtrack::regression::RegressionReport, CliError> {
        let mut psi = DMatrix::<f64>::zeros(n, 2 * p);
        for i in 0..n {
            let xi = grid.point(i);
            let vals = frames.basis().eval_all(&xi);
            let plus = frames.classify(&xi) != flipped[i];
            let offset = if plus { 0 } else { p };
            psi.view_mut((i, offset), (1, p)).copy_from_slice(&vals);
        }
        let u = DVector::from_column_slice(values);
        Ok(match regression {
            Regression::Ols => solve_ols_tsvd(&psi, &u, DEFAULT_SVD_TOL)?,
            Regression::Lad => solve_lad(&psi, &u, DEFAULT_SVD_TOL)?,
        })
    };

    let report = solve(&flipped)?;
    if !repair {
        return Ok(report.coefficients);
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let jump_floor = 0.25 * (hi - lo);
    let bad = repair_misclassified(&report, jump_floor);
    if bad.is_empty() || jump_floor == 0.0 {
        return Ok(report.coefficients);
    }
    for i in bad {
        flipped[i] = true;
    }
    Ok(solve(&flipped)?.coefficients)
}

fn write_artifact<F>(
    run_dir: &Path,
    name: &str,
    artifacts: &mut Vec<String>,
    write: F,
) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> uqtrack::Result<()>,
{
    let mut w = BufWriter::new(File::create(run_dir.join(name))?);
    write(&mut w)?;
    w.flush()?;
    artifacts.push(name.to_string());
    Ok(())
}

fn write_manifest(
    cfg: &ExperimentConfig,
    run_dir: &Path,
    artifacts: &[String],
) -> Result<(), CliError> {
    let mut names: Vec<String> = artifacts.to_vec();
    names.push("manifest.json".to_string());
    let manifest = serde_json::json!({
        "schema_version": cfg.schema_version,
        "id": cfg.id,
        "method": cfg.method.label(),
        "seed": cfg.seed,
        "config": cfg,
        "artifacts": names,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(run_dir.join("manifest.json"), text)?;
    Ok(())
}
