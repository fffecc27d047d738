//! Cartesian grids on the stochastic domain `E = [-1,1]^d` with nested
//! refinement and multilinear interpolation.
//!
//! Storage is a flat array in row-major multi-index order: the last
//! dimension varies fastest. Grids and caches are immutable after
//! construction and safe for shared concurrent reads.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Stochastic domain `E = [-1,1]^d` with independent uniform coordinates.
///
/// Non-uniform physical parameters enter through CDF transforms applied by
/// the forward models, so the domain itself always carries the uniform
/// density `rho(xi) = (1/2)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticDomain {
    dim: usize,
}

impl StochasticDomain {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > 6 {
            return Err(Error::InvalidArgument(format!(
                "domain dimension must be in 1..=6, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Joint density at a point; zero outside `E`.
    pub fn density(&self, xi: &[f64]) -> f64 {
        if xi.iter().any(|&x| !(-1.0..=1.0).contains(&x)) {
            return 0.0;
        }
        0.5f64.powi(self.dim as i32)
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        xi.len() == self.dim && xi.iter().all(|&x| (-1.0..=1.0).contains(&x))
    }
}

/// Equidistant tensor grid on `E`, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticGrid {
    domain: StochasticDomain,
    points_per_dim: Vec<usize>,
    level: usize,
}

impl StochasticGrid {
    pub fn domain(&self) -> &StochasticDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn points_per_dim(&self) -> &[usize] {
        &self.points_per_dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn num_points(&self) -> usize {
        self.points_per_dim.iter().product()
    }

    /// Grid spacing per dimension, `2/(m_k - 1)`.
    pub fn spacing(&self, k: usize) -> f64 {
        2.0 / (self.points_per_dim[k] - 1) as f64
    }

    /// Smallest spacing over all dimensions.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.spacing(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Coordinate of index `i` along dimension `k`.
    pub fn coord(&self, k: usize, i: usize) -> f64 {
        -1.0 + 2.0 * i as f64 / (self.points_per_dim[k] - 1) as f64
    }

    /// Flat index from a multi-index (row-major, last dimension fastest).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (k, &i) in multi.iter().enumerate() {
            idx = idx * self.points_per_dim[k] + i;
        }
        idx
    }

    /// Multi-index from a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut multi = vec![0; d];
        for k in (0..d).rev() {
            multi[k] = flat % self.points_per_dim[k];
            flat /= self.points_per_dim[k];
        }
        multi
    }

    /// Coordinates of the grid point with flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.coord(k, i))
            .collect()
    }

    /// Stride of dimension `k` in the flat layout.
    pub fn stride(&self, k: usize) -> usize {
        self.points_per_dim[k + 1..].iter().product()
    }
}

/// Builds an `m`-points-per-dimension grid at level 0.
pub fn build_grid(domain: &StochasticDomain, m: usize) -> Result<StochasticGrid> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 points per dimension, got {m}"
        )));
    }
    Ok(StochasticGrid {
        domain: domain.clone(),
        points_per_dim: vec![m; domain.dim()],
        level: 0,
    })
}

/// Refines `m -> 2m - 1` per dimension, so every coarse point is retained.
pub fn refine_grid(g: &StochasticGrid) -> StochasticGrid {
    StochasticGrid {
        domain: g.domain.clone(),
        points_per_dim: g.points_per_dim.iter().map(|&m| 2 * m - 1).collect(),
        level: g.level + 1,
    }
}

/// Fidelity tag of a cached QI value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fidelity {
    High,
    Surrogate,
}

/// Per-grid-point QI values tagged by fidelity.
#[derive(Debug, Clone)]
pub struct ModelEvaluationCache {
    grid: StochasticGrid,
    values: Vec<f64>,
    fidelity: Vec<Fidelity>,
}

impl ModelEvaluationCache {
    pub fn new(grid: StochasticGrid, values: Vec<f64>, fidelity: Vec<Fidelity>) -> Result<Self> {
        if values.len() != grid.num_points() || fidelity.len() != grid.num_points() {
            return Err(Error::InvalidArgument(format!(
                "cache length {} does not match grid size {}",
                values.len(),
                grid.num_points()
            )));
        }
        Ok(Self {
            grid,
            values,
            fidelity,
        })
    }

    pub fn grid(&self) -> &StochasticGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fidelity(&self) -> &[Fidelity] {
        &self.fidelity
    }

    pub fn num_high(&self) -> usize {
        self.fidelity
            .iter()
            .filter(|&&f| f == Fidelity::High)
            .count()
    }

    /// Fraction of high-fidelity entries.
    pub fn high_fraction(&self) -> f64 {
        self.num_high() as f64 / self.values.len() as f64
    }

    /// CSV dump: one row per point `xi_1,...,xi_d,value,fidelity`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.grid.dim();
        let header: Vec<String> = (1..=d).map(|k| format!("xi_{k}")).collect();
        writeln!(w, "{},value,fidelity", header.join(","))?;
        for i in 0..self.grid.num_points() {
            let p = self.grid.point(i);
            let coords: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
            let tag = match self.fidelity[i] {
                Fidelity::High => "high",
                Fidelity::Surrogate => "surrogate",
            };
            writeln!(w, "{},{:.16e},{}", coords.join(","), self.values[i], tag)?;
        }
        Ok(())
    }
}

/// Multilinear interpolation of per-point `values` on `grid` at `xi`.
///
/// Uses the enclosing cell's d-linear form; at a grid vertex the stored
/// value is reproduced exactly.
pub fn interpolate_values(grid: &StochasticGrid, values: &[f64], xi: &[f64]) -> Result<f64> {
    if !grid.domain().contains(xi) {
        return Err(Error::OutOfDomain(format!("{xi:?}")));
    }
    let d = grid.dim();
    // Cell base index and local coordinate per dimension.
    let mut base = vec![0usize; d];
    let mut t = vec![0.0f64; d];
    for k in 0..d {
        let m = grid.points_per_dim()[k];
        let h = grid.spacing(k);
        let raw = (xi[k] + 1.0) / h;
        let mut i = raw.floor() as isize;
        if i < 0 {
            i = 0;
        }
        if i as usize > m - 2 {
            i = (m - 2) as isize;
        }
        base[k] = i as usize;
        // Snap to the stored value when xi coincides with a vertex bitwise.
        t[k] = if xi[k] == grid.coord(k, base[k]) {
            0.0
        } else if xi[k] == grid.coord(k, base[k] + 1) {
            1.0
        } else {
            (xi[k] - grid.coord(k, base[k])) / h
        };
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut weight = 1.0;
        let mut multi = Vec::with_capacity(d);
        for k in 0..d {
            let hi = (corner >> k) & 1 == 1;
            weight *= if hi { t[k] } else { 1.0 - t[k] };
            multi.push(base[k] + hi as usize);
        }
        acc += weight * values[grid.flat_index(&multi)];
    }
    Ok(acc)
}

/// Multilinear interpolation of cached QI values at `xi`.
pub fn interpolate_multilinear(cache: &ModelEvaluationCache, xi: &[f64]) -> Result<f64> {
    interpolate_values(cache.grid(), cache.values(), xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(d: usize, m: usize) -> StochasticGrid {
        build_grid(&StochasticDomain::new(d).unwrap(), m).unwrap()
    }

    #[test]
    fn build_grid_1d_midpoint() {
        let g = grid(1, 3);
        let pts: Vec<f64> = (0..3).map(|i| g.coord(0, i)).collect();
        assert_eq!(pts, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn build_grid_counts_and_spacing() {
        let g = grid(2, 31);
        assert_eq!(g.num_points(), 961);
        assert_abs_diff_eq!(g.spacing(0), 2.0 / 30.0, epsilon = 1e-15);
        assert_eq!(grid(3, 31).num_points(), 29791);
    }

    #[test]
    fn build_grid_rejects_m1() {
        assert!(build_grid(&StochasticDomain::new(2).unwrap(), 1).is_err());
    }

    #[test]
    fn refinement_sequence() {
        let g = grid(2, 31);
        let f = refine_grid(&g);
        assert_eq!(f.points_per_dim(), &[61, 61]);
        assert_eq!(refine_grid(&f).points_per_dim(), &[121, 121]);
        assert_eq!(refine_grid(&grid(1, 2)).points_per_dim(), &[3]);
        assert_eq!(f.level(), 1);
    }

    #[test]
    fn refinement_is_nested() {
        let g = grid(2, 7);
        let f = refine_grid(&g);
        for i in 0..g.num_points() {
            let p = g.point(i);
            // Every coarse point must appear exactly on the fine grid.
            let fine_multi: Vec<usize> = g.multi_index(i).iter().map(|&j| 2 * j).collect();
            let q = f.point(f.flat_index(&fine_multi));
            for (a, b) in p.iter().zip(q.iter()) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn density_normalizes() {
        // Midpoint quadrature of the uniform density over E, d=2.
        let dom = StochasticDomain::new(2).unwrap();
        let n = 200;
        let h = 2.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let xi = [-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h];
                total += dom.density(&xi) * h * h;
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    fn cache_from_fn(g: &StochasticGrid, f: impl Fn(&[f64]) -> f64) -> ModelEvaluationCache {
        let values: Vec<f64> = (0..g.num_points()).map(|i| f(&g.point(i))).collect();
        let n = values.len();
        ModelEvaluationCache::new(g.clone(), values, vec![Fidelity::High; n]).unwrap()
    }

    #[test]
    fn interpolation_1d_midpoint() {
        let g = grid(1, 2);
        let c = cache_from_fn(&g, |p| p[0] + 1.0); // u(-1)=0, u(1)=2
        assert_abs_diff_eq!(interpolate_multilinear(&c, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn interpolation_constant_field() {
        let g = grid(2, 5);
        let c = cache_from_fn(&g, |_| 5.0);
        assert_abs_diff_eq!(interpolate_multilinear(&c, &[0.3, -0.7]).unwrap(), 5.0);
    }

    #[test]
    fn interpolation_bilinear_center() {
        // Unit cell corners 0,0,1,1 in row-major order over [-1,1]^2 with m=2:
        // value depends only on the second coordinate.
        let g = grid(2, 2);
        let c = ModelEvaluationCache::new(
            g.clone(),
            vec![0.0, 1.0, 0.0, 1.0],
            vec![Fidelity::High; 4],
        )
        .unwrap();
        assert_abs_diff_eq!(interpolate_multilinear(&c, &[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn interpolation_out_of_domain_errors() {
        let g = grid(1, 3);
        let c = cache_from_fn(&g, |_| 0.0);
        assert!(interpolate_multilinear(&c, &[1.5]).is_err());
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_linear_functions(
            a in -3.0..3.0f64, b in -3.0..3.0f64, c0 in -3.0..3.0f64,
            x in -1.0..1.0f64, y in -1.0..1.0f64,
        ) {
            let g = grid(2, 9);
            let cache = cache_from_fn(&g, |p| a * p[0] + b * p[1] + c0);
            let got = interpolate_multilinear(&cache, &[x, y]).unwrap();
            prop_assert!((got - (a * x + b * y + c0)).abs() <= 1e-12);
        }

        #[test]
        fn interpolation_exact_at_vertices(i in 0usize..81) {
            let g = grid(2, 9);
            let cache = cache_from_fn(&g, |p| (3.0 * p[0]).sin() + p[1] * p[1]);
            let p = g.point(i);
            let got = interpolate_multilinear(&cache, &p).unwrap();
            prop_assert_eq!(got, cache.values()[i]);
        }
    }
}
