//! Level-set evolution in stochastic parameter space. The field `phi` is
//! advanced in pseudo-time by `phi_tau + F |grad phi| = 0` with a speed
//! function that collapses near steep gradients of the QI, so the expanding
//! front locks onto the solution discontinuities.

use crate::error::{Error, Result};
use crate::grid::{ModelEvaluationCache, StochasticGrid};
use crate::parallel::par_map_indexed;
use std::io::Write;

const GRAD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LevelSetField {
    pub grid: StochasticGrid,
    pub phi: Vec<f64>,
    /// Pseudo-time reached by the evolution.
    pub tau: f64,
}

/// Pointwise speed factor `exp(-gamma |grad u|^2)`; the curvature term
/// `(1 - eps kappa)` is recomputed from the current `phi` every step.
#[derive(Debug, Clone)]
pub struct SpeedField {
    pub grid: StochasticGrid,
    pub base: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub cfl: f64,
    /// Steps the sign pattern must stay frozen before declaring a lock.
    pub lock_window: usize,
    pub max_steps: usize,
    pub use_curvature: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { cfl: 0.5, lock_window: 20, max_steps: 20_000, use_curvature: true }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LockInfo {
    pub locked: bool,
    pub steps: usize,
}

/// Signed distance to the sphere `|xi - center| = radius`, negative inside.
pub fn init_levelset(grid: &StochasticGrid, center: &[f64], radius: f64) -> Result<LevelSetField> {
    if !(0.0 < radius && radius < 1.0) {
        return Err(Error::InvalidArgument(format!("radius = {radius} outside (0, 1)")));
    }
    if center.len() != grid.dim() {
        return Err(Error::InvalidArgument("center dimension mismatch".into()));
    }
    let phi = (0..grid.num_points())
        .map(|i| {
            let p = grid.point(i);
            let r2: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            r2.sqrt() - radius
        })
        .collect();
    Ok(LevelSetField { grid: grid.clone(), phi, tau: 0.0 })
}

/// Index of the point along dimension `k`, without materializing the full
/// multi-index (these helpers sit in per-step hot loops).
fn coord_index(grid: &StochasticGrid, flat: usize, k: usize) -> usize {
    (flat / grid.stride(k)) % grid.points_per_dim()[k]
}

/// Clamped neighbor indices along dimension `k`; one-sided at the faces.
fn neighbors(grid: &StochasticGrid, ik: usize, k: usize) -> (usize, usize, f64) {
    let m = grid.points_per_dim()[k];
    let lo = ik.saturating_sub(1);
    let hi = (ik + 1).min(m - 1);
    (lo, hi, (hi - lo) as f64 * grid.spacing(k))
}

fn first_derivative(grid: &StochasticGrid, values: &[f64], flat: usize, k: usize) -> f64 {
    let ik = coord_index(grid, flat, k);
    let (lo, hi, span) = neighbors(grid, ik, k);
    let stride = grid.stride(k);
    let v_lo = values[flat - (ik - lo) * stride];
    let v_hi = values[flat + (hi - ik) * stride];
    (v_hi - v_lo) / span
}

/// Squared gradient magnitude of grid data by central differences
/// (one-sided at the faces).
fn grad_sq(grid: &StochasticGrid, values: &[f64], flat: usize) -> f64 {
    (0..grid.dim())
        .map(|k| first_derivative(grid, values, flat, k).powi(2))
        .sum()
}

/// Discontinuity-sensing speed factor from the QI cache:
/// `exp(-gamma |grad u|^2)`, with `eps = 2 dxi` for the curvature weight.
pub fn build_speed_field(cache: &ModelEvaluationCache, gamma: f64) -> Result<SpeedField> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    let grid = cache.grid().clone();
    let values = cache.values();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingData("cache holds non-finite QI values".into()));
    }
    let base = par_map_indexed(grid.num_points(), |i| (-gamma * grad_sq(&grid, values, i)).exp());
    let epsilon = 2.0 * grid.min_spacing();
    Ok(SpeedField { grid, base, epsilon })
}

/// Mean curvature `div(grad phi / |grad phi|)` at a grid point, evaluated
/// as `(lap(phi) |grad phi|^2 - grad^T H grad) / |grad phi|^3` with second
/// order central stencils (one-sided at the faces) and the gradient norm
/// floored to avoid division by zero.
pub fn curvature(field: &LevelSetField, flat: usize) -> f64 {
    let grid = &field.grid;
    let phi = &field.phi;
    let d = grid.dim();

    let mut grad = [0.0f64; 8];
    let mut lap = 0.0;
    let mut quad = 0.0;
    for k in 0..d {
        grad[k] = first_derivative(grid, phi, flat, k);
    }
    let g2: f64 = grad[..d].iter().map(|g| g * g).sum();
    for k in 0..d {
        let h = grid.spacing(k);
        let stride = grid.stride(k);
        let m = grid.points_per_dim()[k];
        let ik = coord_index(grid, flat, k);
        // Second derivative: shift the stencil one cell inward at the faces.
        let base = if ik == 0 {
            flat + stride
        } else if ik == m - 1 {
            flat - stride
        } else {
            flat
        };
        let dkk = (phi[base + stride] - 2.0 * phi[base] + phi[base - stride]) / (h * h);
        lap += dkk;
        quad += grad[k] * grad[k] * dkk;
        for l in (k + 1)..d {
            let il = coord_index(grid, flat, l);
            let (lo_k, hi_k, span_k) = neighbors(grid, ik, k);
            let (lo_l, hi_l, span_l) = neighbors(grid, il, l);
            let sk = stride as isize;
            let sl = grid.stride(l) as isize;
            let at = |ak: usize, al: usize| {
                let idx = flat as isize
                    + (ak as isize - ik as isize) * sk
                    + (al as isize - il as isize) * sl;
                phi[idx as usize]
            };
            let dkl = (at(hi_k, hi_l) - at(hi_k, lo_l) - at(lo_k, hi_l) + at(lo_k, lo_l))
                / (span_k * span_l);
            quad += 2.0 * grad[k] * grad[l] * dkl;
        }
    }
    let norm = g2.sqrt().max(GRAD_FLOOR);
    (lap * g2 - quad) / (norm * norm * norm)
}

/// One first-order Godunov upwind step of `phi_tau + F |grad phi| = 0`.
/// Returns the new field values given per-point speeds `f` and step `dtau`.
fn godunov_step(grid: &StochasticGrid, phi: &[f64], f: &[f64], dtau: f64) -> Vec<f64> {
    let d = grid.dim();
    par_map_indexed(grid.num_points(), |i| {
        let mut sum = 0.0;
        for k in 0..d {
            let h = grid.spacing(k);
            let stride = grid.stride(k);
            let m = grid.points_per_dim()[k];
            let ik = coord_index(grid, i, k);
            // One-sided differences; linear-extrapolation ghosts make the
            // missing side equal to the interior one at the faces.
            let dm = if ik > 0 {
                (phi[i] - phi[i - stride]) / h
            } else {
                (phi[i + stride] - phi[i]) / h
            };
            let dp = if ik + 1 < m {
                (phi[i + stride] - phi[i]) / h
            } else {
                dm
            };
            let contrib = if f[i] >= 0.0 {
                dm.max(0.0).powi(2).max(dp.min(0.0).powi(2))
            } else {
                dp.max(0.0).powi(2).max(dm.min(0.0).powi(2))
            };
            sum += contrib;
        }
        // Values far below any signed distance the unit box supports carry
        // no information (the iso-zero left long ago); flooring them keeps
        // swept regions from steepening without bound.
        (phi[i] - dtau * f[i] * sum.sqrt()).max(-8.0)
    })
}

/// Advance `phi` until its sign pattern is frozen for `lock_window`
/// consecutive steps. Fails with a non-convergence error if `max_steps` is
/// exhausted first.
pub fn evolve_to_lock(
    field: &LevelSetField,
    speed: &SpeedField,
    opts: &EvolveOptions,
) -> Result<(LevelSetField, LockInfo)> {
    if field.phi.len() != speed.base.len() {
        return Err(Error::InvalidArgument("field and speed grids differ".into()));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 0.5) {
        return Err(Error::InvalidArgument("CFL must lie in (0, 0.5]".into()));
    }
    let grid = &field.grid;
    let h = grid.min_spacing();
    let mut current = field.clone();
    let mut signs: Vec<bool> = current.phi.iter().map(|&v| v >= 0.0).collect();
    let mut frozen_steps = 0usize;
    let mut frozen_tau = 0.0f64;

    for step in 1..=opts.max_steps {
        let mut f: Vec<f64> = if opts.use_curvature {
            let c = current.clone();
            par_map_indexed(grid.num_points(), |i| {
                // The curvature weight is clamped: discrete curvature blows
                // up where |grad phi| is tiny (an unclamped weight would
                // dominate the CFL step), and a small positive floor keeps
                // strongly curved fronts creeping forward instead of
                // stalling permanently inside narrow corridors between
                // discontinuity branches. Only a vanishing base factor (a
                // sensed discontinuity) stops the front.
                let k = curvature(&c, i);
                let w = if k.is_finite() {
                    (1.0 - speed.epsilon * k).clamp(0.05, 1.0)
                } else {
                    1.0
                };
                w * speed.base[i]
            })
        } else {
            speed.base.clone()
        };
        let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if fmax == 0.0 {
            return Ok((current, LockInfo { locked: true, steps: step - 1 }));
        }
        // Speeds far below the global maximum belong to cells sitting on a
        // partially resolved jump; left nonzero they creep one cell per
        // thousands of steps, resetting the lock window forever. Treat them
        // as fully stalled.
        let stall = 1e-3 * fmax;
        for v in f.iter_mut() {
            if v.abs() < stall {
                *v = 0.0;
            }
        }
        let dtau = opts.cfl * h / fmax;
        current.phi = godunov_step(grid, &current.phi, &f, dtau);
        current.tau += dtau;
        if current.phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "level-set field became non-finite at step {step}"
            )));
        }

        let new_signs: Vec<bool> = current.phi.iter().map(|&v| v >= 0.0).collect();
        if new_signs == signs {
            frozen_steps += 1;
            frozen_tau += dtau;
            // Besides the step window, require the frozen stretch to span
            // the pseudo-time a still-active front (speed above the stall
            // threshold) needs to cross one cell, so slowly creeping fronts
            // are not mistaken for locked ones.
            let f_active_min = f
                .iter()
                .map(|v| v.abs())
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            let window_tau = 2.0 * h / f_active_min;
            if frozen_steps >= opts.lock_window && frozen_tau >= window_tau {
                return Ok((current, LockInfo { locked: true, steps: step }));
            }
        } else {
            frozen_steps = 0;
            frozen_tau = 0.0;
            signs = new_signs;
        }
    }
    Err(Error::NonConvergence(format!(
        "no sign lock within {} steps (tau = {:.4})",
        opts.max_steps, field.tau
    )))
}

/// Linear-interpolation roots on every grid edge whose endpoint values
/// differ in sign; a vertex lying exactly on the iso-zero is emitted once.
pub fn zero_crossing_points(field: &LevelSetField) -> Vec<Vec<f64>> {
    let grid = &field.grid;
    let phi = &field.phi;
    let mut out = Vec::new();
    for i in 0..grid.num_points() {
        if phi[i] == 0.0 {
            out.push(grid.point(i));
            continue;
        }
        let multi = grid.multi_index(i);
        for k in 0..grid.dim() {
            if multi[k] + 1 >= grid.points_per_dim()[k] {
                continue;
            }
            let j = i + grid.stride(k);
            if phi[j] == 0.0 || phi[i] * phi[j] > 0.0 {
                continue;
            }
            let t = phi[i] / (phi[i] - phi[j]);
            let mut p = grid.point(i);
            p[k] += t * grid.spacing(k);
            out.push(p);
        }
    }
    out
}

/// Replace `phi` with the exact signed distance to its own iso-zero
/// (extracted as edge crossings). Evolution distorts the field badly away
/// from the front -- swept regions keep sinking while unreached regions
/// never move -- so anything that reads `|phi|` as a distance (band
/// classification, warm starts) needs this first. Signs are preserved
/// bitwise; a field without any crossing is returned unchanged.
pub fn redistance(field: &LevelSetField) -> LevelSetField {
    let crossings = zero_crossing_points(field);
    if crossings.is_empty() {
        return field.clone();
    }
    let grid = &field.grid;
    let phi = par_map_indexed(grid.num_points(), |i| {
        let x = grid.point(i);
        let d2 = crossings
            .iter()
            .map(|c| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        d2.sqrt().copysign(field.phi[i])
    });
    LevelSetField { grid: grid.clone(), phi, tau: field.tau }
}

/// CSV dump of the field: one row per point, coordinates then `phi`.
pub fn write_field_csv<W: Write>(field: &LevelSetField, w: &mut W) -> Result<()> {
    let d = field.grid.dim();
    for k in 0..d {
        write!(w, "xi{},", k + 1)?;
    }
    writeln!(w, "phi")?;
    for i in 0..field.grid.num_points() {
        for x in field.grid.point(i) {
            write!(w, "{x},")?;
        }
        writeln!(w, "{}", field.phi[i])?;
    }
    Ok(())
}

/// CSV dump of iso-zero crossing points, one row per point.
pub fn write_crossings_csv<W: Write>(dim: usize, points: &[Vec<f64>], w: &mut W) -> Result<()> {
    let header: Vec<String> = (1..=dim).map(|k| format!("xi{k}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in points {
        let row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
