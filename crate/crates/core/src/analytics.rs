//! Error metrics, Monte Carlo reference statistics, and metric exports.

use crate::error::{Error, Result};
use crate::grid::StochasticGrid;
use crate::models::ForwardModel;
use crate::parallel::par_chunk_fold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// Samples per Monte Carlo worker chunk.
const MC_CHUNK: usize = 50_000;

/// Monte Carlo statistics with normal-approximation standard errors.
#[derive(Debug, Clone)]
pub struct McStats {
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
    pub se_mean: f64,
    pub se_std: f64,
}

/// Density-weighted relative discrete l1 error:
/// `sum rho |s - r| / sum rho |r|` over the grid points (the spacing
/// factors cancel in the ratio).
pub fn rel_l1_error(surrogate: &[f64], reference: &[f64], grid: &StochasticGrid) -> Result<f64> {
    let n = grid.num_points();
    if surrogate.len() != n || reference.len() != n {
        return Err(Error::InvalidArgument("value length does not match grid".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let rho = grid.domain().density(&grid.point(i));
        num += rho * (surrogate[i] - reference[i]).abs();
        den += rho * reference[i].abs();
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("reference has zero l1 norm".into()));
    }
    Ok(num / den)
}

/// Relative errors of mean and standard deviation against MC references.
pub fn rel_moment_errors(mean: f64, std: f64, mc: &McStats) -> Result<(f64, f64)> {
    if mc.mean == 0.0 || mc.std == 0.0 {
        return Err(Error::UndefinedMetric("zero reference moment".into()));
    }
    Ok(((mean - mc.mean).abs() / mc.mean.abs(), (std - mc.std).abs() / mc.std.abs()))
}

/// Seeded Monte Carlo moments of the model under the uniform density.
/// Sampling runs in fixed-size chunks with per-chunk counter-derived RNG
/// streams merged in chunk order, so the result is independent of worker
/// count.
pub fn monte_carlo_reference(
    model: &dyn ForwardModel,
    n_samples: usize,
    seed: u64,
) -> Result<McStats> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    let dim = model.dim();
    let n_chunks = n_samples.div_ceil(MC_CHUNK);
    let partial = |chunk: usize| -> Result<(f64, f64)> {
        let lo = chunk * MC_CHUNK;
        let hi = (lo + MC_CHUNK).min(n_samples);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (chunk as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut xi = vec![0.0; dim];
        for _ in lo..hi {
            for x in xi.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            let u = model.evaluate(&xi)?;
            sum += u;
            sum_sq += u * u;
        }
        Ok((sum, sum_sq))
    };
    let (sum, sum_sq) = par_chunk_fold(
        n_chunks,
        partial,
        Ok((0.0, 0.0)),
        |acc: Result<(f64, f64)>, p| {
            let (a, b) = acc?;
            let (x, y) = p?;
            Ok((a + x, b + y))
        },
    )?;
    let n = n_samples as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
    let std = var.sqrt();
    Ok(McStats {
        mean,
        std,
        n_samples,
        se_mean: std / n.sqrt(),
        se_std: std / (2.0 * n).sqrt(),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn directed_hausdorff(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    from.iter()
        .map(|a| to.iter().map(|b| dist(a, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyRegion("hausdorff distance needs nonempty sets".into()));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// One row of the metrics table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricsRow {
    pub experiment: String,
    pub method: String,
    pub order: usize,
    pub basis_size: usize,
    pub n_ev: usize,
    pub eps_l1: f64,
    pub eps_mean: f64,
    pub eps_std: f64,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], w: &mut W) -> Result<()> {
    writeln!(w, "experiment,method,order,basis_size,n_ev,eps_l1,eps_mean,eps_std")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.experiment, r.method, r.order, r.basis_size, r.n_ev, r.eps_l1, r.eps_mean, r.eps_std
        )?;
    }
    Ok(())
}
