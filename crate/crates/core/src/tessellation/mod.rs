//! Simplex tessellations of the stochastic domain that conform to a locked
//! iso-zero: a structured Kuhn split seeds the mesh, sign-changing edges get
//! zero-crossing vertices, and the grown vertex set is re-triangulated by
//! Delaunay until no admissible insertion remains.

mod delaunay;

pub use delaunay::{delaunay, simplex_volume};

use crate::error::{Error, Result};
use crate::grid::{interpolate_values, ModelEvaluationCache};
use crate::levelset::LevelSetField;
use crate::parallel::par_map_indexed;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;
use std::io::Write;

/// Containment slack of the barycentric membership test.
const BARY_TOL: f64 = 1e-10;
/// Refinement sweeps before giving up.
const MAX_SWEEPS: usize = 200;

#[derive(Debug, Clone)]
pub struct SimplexMesh {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Vec<usize>>,
    /// Majority iso-zero side per simplex: +1, -1, or 0 when unlabeled.
    signs: Vec<i8>,
}

impl SimplexMesh {
    pub fn new(dim: usize, vertices: Vec<Vec<f64>>, simplices: Vec<Vec<usize>>) -> Result<Self> {
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidArgument("vertex dimension mismatch".into()));
        }
        for s in &simplices {
            if s.len() != dim + 1 || s.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument("malformed simplex".into()));
            }
            if simplex_volume(&vertices, s) <= 0.0 {
                return Err(Error::DegenerateGeometry("flat simplex in mesh".into()));
            }
        }
        let signs = vec![0; simplices.len()];
        Ok(Self { dim, vertices, simplices, signs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn simplices(&self) -> &[Vec<usize>] {
        &self.simplices
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn num_simplices(&self) -> usize {
        self.simplices.len()
    }

    pub fn simplex_vertices(&self, e: usize) -> Vec<Vec<f64>> {
        self.simplices[e].iter().map(|&v| self.vertices[v].clone()).collect()
    }

    pub fn volume(&self, e: usize) -> f64 {
        simplex_volume(&self.vertices, &self.simplices[e])
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_simplices()).map(|e| self.volume(e)).sum()
    }

    /// Barycentric coordinates of `x` in simplex `e` (d + 1 entries).
    pub fn barycentric(&self, e: usize, x: &[f64]) -> Result<Vec<f64>> {
        let s = &self.simplices[e];
        let d = self.dim;
        let last = &self.vertices[s[d]];
        let mut t = DMatrix::zeros(d, d);
        let mut rhs = DVector::zeros(d);
        for j in 0..d {
            for i in 0..d {
                t[(i, j)] = self.vertices[s[j]][i] - last[i];
            }
        }
        for i in 0..d {
            rhs[i] = x[i] - last[i];
        }
        let lam = t
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::DegenerateGeometry("flat simplex".into()))?;
        let mut out: Vec<f64> = lam.iter().cloned().collect();
        out.push(1.0 - out.iter().sum::<f64>());
        Ok(out)
    }

    pub fn contains(&self, e: usize, x: &[f64], tol: f64) -> bool {
        self.barycentric(e, x)
            .map(|lam| lam.iter().all(|&l| l >= -tol))
            .unwrap_or(false)
    }

    /// Lowest-index simplex containing `x`; falls back to the simplex whose
    /// worst barycentric coordinate is least negative (covers floating-point
    /// slivers at shared facets).
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for e in 0..self.num_simplices() {
            let lam = self.barycentric(e, x)?;
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -BARY_TOL {
                return Ok(e);
            }
            if worst > best.0 {
                best = (worst, e);
            }
        }
        if best.1 == usize::MAX {
            return Err(Error::OutOfDomain(format!("{x:?} outside the mesh")));
        }
        Ok(best.1)
    }

    /// CSV: one row per vertex.
    pub fn write_vertices_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("xi{k}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for v in &self.vertices {
            let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// CSV: one row per simplex (vertex ids, sign, volume).
    pub fn write_simplices_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim + 1).map(|k| format!("v{k}")).collect();
        header.push("sign".into());
        header.push("volume".into());
        writeln!(w, "{}", header.join(","))?;
        for (e, s) in self.simplices.iter().enumerate() {
            let mut row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            row.push(self.signs[e].to_string());
            row.push(self.volume(e).to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for p in &out {
            for k in 0..d {
                if !p.contains(&k) {
                    let mut q = p.clone();
                    q.push(k);
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out
}

/// Kuhn (Freudenthal) split of a `coarse_n`^d box partition of [-1,1]^d:
/// d! simplices per box, conforming across box faces.
pub fn initial_mesh(dim: usize, coarse_n: usize) -> Result<SimplexMesh> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedConfiguration(format!(
            "tessellation supports d in {{2, 3}}, got {dim}"
        )));
    }
    if coarse_n == 0 {
        return Err(Error::InvalidArgument("coarse_n must be >= 1".into()));
    }
    let m = coarse_n + 1;
    let h = 2.0 / coarse_n as f64;
    let n_vertices = m.pow(dim as u32);
    let vertex = |multi: &[usize]| -> usize {
        multi.iter().rev().fold(0, |acc, &c| acc * m + c)
    };
    let mut vertices = Vec::with_capacity(n_vertices);
    for flat in 0..n_vertices {
        let mut v = vec![0.0; dim];
        let mut rest = flat;
        for x in v.iter_mut() {
            *x = -1.0 + (rest % m) as f64 * h;
            rest /= m;
        }
        vertices.push(v);
    }

    let perms = permutations(dim);
    let mut simplices = Vec::new();
    for cell in 0..coarse_n.pow(dim as u32) {
        let mut corner = vec![0usize; dim];
        let mut rest = cell;
        for c in corner.iter_mut() {
            *c = rest % coarse_n;
            rest /= coarse_n;
        }
        for p in &perms {
            let mut s = Vec::with_capacity(dim + 1);
            let mut m_idx = corner.clone();
            s.push(vertex(&m_idx));
            for &k in p {
                m_idx[k] += 1;
                s.push(vertex(&m_idx));
            }
            simplices.push(s);
        }
    }
    SimplexMesh::new(dim, vertices, simplices)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Grow the mesh until it conforms to the field's iso-zero: every edge
/// whose interpolated endpoint values differ in sign receives its linear
/// root as a new vertex (unless one already sits within `min_sep`), the
/// vertex set is re-triangulated by Delaunay, and the sweep repeats until
/// no insertion happens. Sign labels come from the field's grid points.
pub fn refine_by_levelset(
    mesh: &SimplexMesh,
    field: &LevelSetField,
    min_sep: f64,
) -> Result<SimplexMesh> {
    if !(min_sep > 0.0) {
        return Err(Error::InvalidArgument("min_sep must be positive".into()));
    }
    let dim = mesh.dim;
    let grid = &field.grid;
    let mut vertices = mesh.vertices.clone();
    let mut simplices = mesh.simplices.clone();
    let expected = mesh.total_volume();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let phi_v: Vec<f64> = vertices
            .iter()
            .map(|v| interpolate_values(grid, &field.phi, v))
            .collect::<Result<_>>()?;
        let mut edges = BTreeSet::new();
        for s in &simplices {
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    edges.insert((s[i].min(s[j]), s[i].max(s[j])));
                }
            }
        }
        let before = vertices.len();
        for (a, b) in edges {
            let (pa, pb) = (phi_v[a], phi_v[b]);
            if pa == 0.0 || pb == 0.0 || pa.signum() == pb.signum() {
                continue;
            }
            let t = pa / (pa - pb);
            let v: Vec<f64> = vertices[a]
                .iter()
                .zip(&vertices[b])
                .map(|(x, y)| x + t * (y - x))
                .collect();
            if vertices.iter().all(|w| dist(w, &v) > min_sep) {
                vertices.push(v);
            }
        }
        if vertices.len() == before {
            converged = true;
            break;
        }
        simplices = delaunay(dim, &vertices, Some(expected))?;
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "tessellation still inserting vertices after {MAX_SWEEPS} sweeps"
        )));
    }

    let mut out = SimplexMesh::new(dim, vertices, simplices)?;
    label_signs(&mut out, field)?;
    Ok(out)
}

/// Label each simplex with the majority sign of the field at the grid
/// points it contains (0 when it contains none).
pub fn label_signs(mesh: &mut SimplexMesh, field: &LevelSetField) -> Result<()> {
    let grid = &field.grid;
    let homes = locate_all(mesh, (0..grid.num_points()).map(|i| grid.point(i)).collect())?;
    let mut pos = vec![0usize; mesh.num_simplices()];
    let mut neg = vec![0usize; mesh.num_simplices()];
    for (i, &e) in homes.iter().enumerate() {
        if field.phi[i] >= 0.0 {
            pos[e] += 1;
        } else {
            neg[e] += 1;
        }
    }
    mesh.signs = pos
        .iter()
        .zip(&neg)
        .map(|(&p, &n)| {
            if p == 0 && n == 0 {
                0
            } else if p >= n {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(())
}

fn locate_all(mesh: &SimplexMesh, points: Vec<Vec<f64>>) -> Result<Vec<usize>> {
    let homes = par_map_indexed(points.len(), |i| mesh.locate(&points[i]));
    homes.into_iter().collect()
}

/// Which cached evaluations live in which simplex.
#[derive(Debug)]
pub struct PointAssignment {
    /// Simplex index per cached point.
    pub simplex_of_point: Vec<usize>,
    /// Cached point indices per simplex.
    pub points_of_simplex: Vec<Vec<usize>>,
}

impl PointAssignment {
    /// Simplices without any evaluation: no local basis can be fit there.
    pub fn empty_simplices(&self) -> Vec<usize> {
        self.points_of_simplex
            .iter()
            .enumerate()
            .filter(|(_, pts)| pts.is_empty())
            .map(|(e, _)| e)
            .collect()
    }
}

/// Assign every cached grid point to exactly one simplex (facet ties go to
/// the lowest simplex index).
pub fn assign_points(mesh: &SimplexMesh, cache: &ModelEvaluationCache) -> Result<PointAssignment> {
    let grid = cache.grid();
    let homes = locate_all(mesh, (0..grid.num_points()).map(|i| grid.point(i)).collect())?;
    let mut points_of_simplex = vec![Vec::new(); mesh.num_simplices()];
    for (i, &e) in homes.iter().enumerate() {
        points_of_simplex[e].push(i);
    }
    Ok(PointAssignment { simplex_of_point: homes, points_of_simplex })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Fidelity, StochasticDomain, StochasticGrid};
    use crate::levelset::{build_speed_field, evolve_to_lock, init_levelset, EvolveOptions};
    use crate::models::{evaluate_on_grid, BurgersModel};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(d: usize, m: usize) -> StochasticGrid {
        build_grid(&StochasticDomain::new(d).unwrap(), m).unwrap()
    }

    fn field_from(g: &StochasticGrid, f: impl Fn(&[f64]) -> f64) -> LevelSetField {
        let phi = (0..g.num_points()).map(|i| f(&g.point(i))).collect();
        LevelSetField { grid: g.clone(), phi, tau: 0.0 }
    }

    #[test]
    fn initial_mesh_counts_and_volumes() {
        let m2 = initial_mesh(2, 1).unwrap();
        assert_eq!(m2.num_simplices(), 2);
        assert_abs_diff_eq!(m2.total_volume(), 4.0, epsilon = 1e-12);

        let m3 = initial_mesh(3, 1).unwrap();
        assert_eq!(m3.num_simplices(), 6);
        assert_abs_diff_eq!(m3.total_volume(), 8.0, epsilon = 1e-12);

        let m = initial_mesh(2, 3).unwrap();
        assert_eq!(m.num_simplices(), 18);
        assert_abs_diff_eq!(m.total_volume(), 4.0, epsilon = 1e-12);

        assert!(initial_mesh(4, 1).is_err());
        assert!(initial_mesh(2, 0).is_err());
    }

    #[test]
    fn one_signed_field_leaves_mesh_unchanged() {
        let g = grid(2, 11);
        let field = field_from(&g, |_| 1.0);
        let mesh = initial_mesh(2, 2).unwrap();
        let refined = refine_by_levelset(&mesh, &field, 0.05).unwrap();
        assert_eq!(refined.num_simplices(), mesh.num_simplices());
        assert_eq!(refined.vertices().len(), mesh.vertices().len());
        assert!(refined.signs().iter().all(|&s| s == 1));
    }

    #[test]
    fn crossing_vertices_land_on_linear_roots() {
        // phi = xi_2: sign-changing edges root exactly on the xi_2 = 0 line.
        let g = grid(2, 21);
        let field = field_from(&g, |xi| xi[1]);
        let mesh = initial_mesh(2, 1).unwrap();
        let refined = refine_by_levelset(&mesh, &field, 0.05).unwrap();
        let new_vertices = &refined.vertices()[mesh.vertices().len()..];
        assert!(!new_vertices.is_empty());
        for v in new_vertices {
            assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-12);
        }
        // Midpoint example: the box edge from (-1,-1) to (-1,1) has values
        // (-1, +1), so its root is the midpoint (-1, 0).
        assert!(refined
            .vertices()
            .iter()
            .any(|v| dist(v, &[-1.0, 0.0]) < 1e-12));
        assert_abs_diff_eq!(refined.total_volume(), 4.0, epsilon = 1e-8);
        // Conformity: a linear interface is resolved exactly, so every
        // simplex is single-signed.
        for (e, s) in refined.signs().iter().enumerate() {
            if *s == 0 {
                continue;
            }
            for v in refined.simplex_vertices(e) {
                let mid: f64 = v[1];
                assert!(mid * (*s as f64) >= -1e-9, "simplex {e} crosses the interface");
            }
        }
    }

    #[test]
    fn min_sep_caps_insertion_density() {
        let g = grid(2, 21);
        let field = field_from(&g, |xi| xi[1] - 0.1);
        let mesh = initial_mesh(2, 2).unwrap();
        let coarse = refine_by_levelset(&mesh, &field, 0.5).unwrap();
        let fine = refine_by_levelset(&mesh, &field, 0.05).unwrap();
        assert!(fine.vertices().len() > coarse.vertices().len());
        for (i, a) in coarse.vertices().iter().enumerate() {
            for b in &coarse.vertices()[i + 1..] {
                assert!(dist(a, b) > 1e-12);
            }
        }
    }

    #[test]
    fn assignment_agrees_with_barycentric_membership() {
        let mesh = initial_mesh(2, 3).unwrap();
        let g = grid(2, 11);
        let cache = evaluate_on_grid(&BurgersModel::default(), &g).unwrap();
        let assign = assign_points(&mesh, &cache).unwrap();
        assert_eq!(assign.simplex_of_point.len(), g.num_points());
        let mut seen = vec![false; g.num_points()];
        for (e, pts) in assign.points_of_simplex.iter().enumerate() {
            for &i in pts {
                assert!(!seen[i]);
                seen[i] = true;
                assert!(mesh.contains(e, &g.point(i), 1e-9));
                // Lowest-index tie-break: no earlier simplex contains it.
                for prev in 0..e {
                    assert!(!mesh.contains(prev, &g.point(i), BARY_TOL));
                }
            }
        }
        assert!(seen.iter().all(|&s| s));

        // Random interior points follow strict membership.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let e = mesh.locate(&x).unwrap();
            assert!(mesh.contains(e, &x, 1e-9));
        }
    }

    #[test]
    fn empty_simplices_are_flagged() {
        let mesh = initial_mesh(2, 8).unwrap();
        // A 3x3 cache cannot populate 128 triangles.
        let g = grid(2, 3);
        let cache = ModelEvaluationCache::new(
            g.clone(),
            vec![0.0; g.num_points()],
            vec![Fidelity::High; g.num_points()],
        )
        .unwrap();
        let assign = assign_points(&mesh, &cache).unwrap();
        let empty = assign.empty_simplices();
        assert!(!empty.is_empty());
        let occupied: usize = assign
            .points_of_simplex
            .iter()
            .filter(|p| !p.is_empty())
            .count();
        assert_eq!(occupied + empty.len(), mesh.num_simplices());
    }

    #[test]
    fn burgers_mesh_is_mostly_single_signed() {
        let model = BurgersModel::default();
        let g = grid(2, 31);
        let cache = evaluate_on_grid(&model, &g).unwrap();
        let speed = build_speed_field(&cache, 1.0).unwrap();
        let phi0 = init_levelset(&g, &[0.0, 0.0], 0.25).unwrap();
        let (field, _) = evolve_to_lock(&phi0, &speed, &EvolveOptions::default()).unwrap();

        let mesh = initial_mesh(2, 4).unwrap();
        let min_sep = 0.5 * g.min_spacing();
        let refined = refine_by_levelset(&mesh, &field, min_sep).unwrap();
        assert_abs_diff_eq!(refined.total_volume(), 4.0, epsilon = 1e-8);

        // Fraction of simplices whose contained grid points agree in sign.
        let assign = assign_points(&refined, &cache).unwrap();
        let mut mixed = 0;
        let mut labeled = 0;
        for pts in &assign.points_of_simplex {
            if pts.is_empty() {
                continue;
            }
            labeled += 1;
            let first = field.phi[pts[0]] >= 0.0;
            if pts.iter().any(|&i| (field.phi[i] >= 0.0) != first) {
                mixed += 1;
            }
        }
        assert!(labeled > 20);
        assert!(
            (mixed as f64) < 0.05 * labeled as f64,
            "{mixed} of {labeled} simplices are mixed-sign"
        );
    }

    #[test]
    fn sphere_refinement_3d() {
        let g = grid(3, 11);
        let field = field_from(&g, |xi| {
            (xi.iter().map(|x| x * x).sum::<f64>()).sqrt() - 0.6
        });
        let mesh = initial_mesh(3, 2).unwrap();
        let refined = refine_by_levelset(&mesh, &field, 0.3).unwrap();
        assert_abs_diff_eq!(refined.total_volume(), 8.0, epsilon = 1e-8);
        let new_vertices = &refined.vertices()[mesh.vertices().len()..];
        assert!(!new_vertices.is_empty());
        // Inserted vertices sit near the sphere, up to interpolation error.
        for v in new_vertices {
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((r - 0.6).abs() < 0.1, "crossing vertex at radius {r}");
        }
    }
}
