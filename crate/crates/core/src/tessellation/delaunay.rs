//! Incremental Bowyer-Watson Delaunay triangulation for d in {2, 3}, with a
//! deterministic-jitter retry for degenerate (cospherical) inputs.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

/// Strict-inside slack of the circumsphere predicate, relative to the
/// squared bounding-box span.
const INSIDE_SLACK: f64 = 1e-12;
/// Simplices thinner than this (relative to span^d) signal a degenerate
/// cavity and trigger a jittered retry.
const MIN_VOLUME: f64 = 1e-13;

/// Unsigned volume of the simplex `s` (vertex indices into `pts`).
pub fn simplex_volume(pts: &[Vec<f64>], s: &[usize]) -> f64 {
    let d = s.len() - 1;
    let last = &pts[s[d]];
    let mut t = DMatrix::zeros(d, d);
    for (j, &v) in s[..d].iter().enumerate() {
        for i in 0..d {
            t[(i, j)] = pts[v][i] - last[i];
        }
    }
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    t.determinant().abs() / fact
}

/// Circumcenter and squared circumradius, or `None` for a flat simplex.
fn circumsphere(pts: &[Vec<f64>], s: &[usize]) -> Option<(Vec<f64>, f64)> {
    let d = s.len() - 1;
    let p0 = &pts[s[0]];
    let mut a = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    for (row, &v) in s[1..].iter().enumerate() {
        let p = &pts[v];
        let mut rhs = 0.0;
        for k in 0..d {
            a[(row, k)] = 2.0 * (p[k] - p0[k]);
            rhs += p[k] * p[k] - p0[k] * p0[k];
        }
        b[row] = rhs;
    }
    let c = a.lu().solve(&b)?;
    let r2: f64 = (0..d).map(|k| (c[k] - p0[k]) * (c[k] - p0[k])).sum();
    if !r2.is_finite() {
        return None;
    }
    Some((c.iter().cloned().collect(), r2))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Deterministic per-coordinate jitter for retry attempts; attempt 0 is the
/// identity. Only the predicates see the jittered coordinates -- callers
/// keep the original vertices.
fn jittered(vertices: &[Vec<f64>], attempt: u64, scale: f64) -> Vec<Vec<f64>> {
    if attempt == 0 {
        return vertices.to_vec();
    }
    let eps = 1e-9 * attempt as f64 * scale;
    vertices
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.iter()
                .enumerate()
                .map(|(k, &x)| {
                    let mut h = (i as u64)
                        .wrapping_mul(0x9e3779b97f4a7c15)
                        .wrapping_add(k as u64)
                        .wrapping_add(attempt.wrapping_mul(0xbf58476d1ce4e5b9));
                    h ^= h >> 30;
                    h = h.wrapping_mul(0xbf58476d1ce4e5b9);
                    h ^= h >> 27;
                    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
                    x + eps * (u - 0.5)
                })
                .collect()
        })
        .collect()
}

fn bowyer_watson(dim: usize, pts_in: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let n = pts_in.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in pts_in {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| b - a)
        .fold(1.0f64, f64::max);
    let slack = INSIDE_SLACK * span * span;
    let vol_floor = MIN_VOLUME * span.powi(dim as i32);

    // Right-angle super simplex far outside the box, so no circumsphere of
    // a hull simplex can reach its vertices (a close super simplex leaves
    // holes along the hull after its simplices are dropped).
    let mut pts = pts_in.to_vec();
    let corner: Vec<f64> = lo.iter().map(|a| a - 100.0 * span).collect();
    let leg = 400.0 * dim as f64 * span;
    pts.push(corner.clone());
    for k in 0..dim {
        let mut v = corner.clone();
        v[k] += leg;
        pts.push(v);
    }

    // Active simplices with cached circumspheres.
    let mut simps: Vec<(Vec<usize>, Vec<f64>, f64)> = Vec::new();
    let super_s: Vec<usize> = (n..n + dim + 1).collect();
    let (c, r2) = circumsphere(&pts, &super_s)
        .ok_or_else(|| Error::DegenerateGeometry("flat super simplex".into()))?;
    simps.push((super_s, c, r2));

    for p in 0..n {
        let x = &pts[p];
        let mut bad = Vec::new();
        for (si, (_, c, r2)) in simps.iter().enumerate() {
            if dist2(x, c) < r2 - slack {
                bad.push(si);
            }
        }
        if bad.is_empty() {
            return Err(Error::DegenerateGeometry(format!(
                "no cavity found for vertex {p}"
            )));
        }
        // Cavity boundary = facets of bad simplices seen exactly once.
        let mut facet_count: HashMap<Vec<usize>, usize> = HashMap::new();
        for &si in &bad {
            let s = &simps[si].0;
            for omit in 0..s.len() {
                let mut f: Vec<usize> =
                    s.iter().enumerate().filter(|&(j, _)| j != omit).map(|(_, &v)| v).collect();
                f.sort_unstable();
                *facet_count.entry(f).or_insert(0) += 1;
            }
        }
        let mut kill = vec![false; simps.len()];
        for &si in &bad {
            kill[si] = true;
        }
        let mut next: Vec<(Vec<usize>, Vec<f64>, f64)> =
            simps.into_iter().zip(kill).filter(|(_, k)| !k).map(|(s, _)| s).collect();
        for (facet, count) in facet_count {
            if count != 1 {
                continue;
            }
            let mut s = facet;
            s.push(p);
            if simplex_volume(&pts, &s) <= vol_floor {
                return Err(Error::DegenerateGeometry("flat cavity simplex".into()));
            }
            let (c, r2) = circumsphere(&pts, &s)
                .ok_or_else(|| Error::DegenerateGeometry("flat cavity simplex".into()))?;
            next.push((s, c, r2));
        }
        simps = next;
    }

    Ok(simps
        .into_iter()
        .map(|(s, _, _)| s)
        .filter(|s| s.iter().all(|&v| v < n))
        .collect())
}

/// Delaunay triangulation of `vertices` (d in {2,3}). When
/// `expected_volume` is given, the result must cover it to 1e-8 relative or
/// the attempt is considered degenerate. Degenerate attempts are retried
/// with a deterministic symbolic jitter (predicates only) before giving up.
pub fn delaunay(
    dim: usize,
    vertices: &[Vec<f64>],
    expected_volume: Option<f64>,
) -> Result<Vec<Vec<usize>>> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedConfiguration(format!(
            "delaunay supports d in {{2, 3}}, got {dim}"
        )));
    }
    if vertices.len() < dim + 1 {
        return Err(Error::InvalidArgument("need at least d + 1 vertices".into()));
    }
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidArgument("vertex dimension mismatch".into()));
    }
    let mut last = Error::DegenerateGeometry("unreachable".into());
    for attempt in 0..6u64 {
        let pts = jittered(vertices, attempt, 1.0);
        match bowyer_watson(dim, &pts) {
            Ok(mut simps) => {
                // Jittered attempts can emit simplices that are exactly flat
                // on the original coordinates; they carry no measure and
                // would poison downstream geometry.
                let max_vol = simps
                    .iter()
                    .map(|s| simplex_volume(vertices, s))
                    .fold(0.0f64, f64::max);
                simps.retain(|s| simplex_volume(vertices, s) > 1e-14 * max_vol);
                if let Some(vol) = expected_volume {
                    let total: f64 =
                        simps.iter().map(|s| simplex_volume(vertices, s)).sum();
                    if (total - vol).abs() > 1e-8 * vol.max(1.0) {
                        last = Error::DegenerateGeometry(format!(
                            "triangulation volume {total} != expected {vol}"
                        ));
                        continue;
                    }
                }
                return Ok(simps);
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn circumcircle_property(pts: &[Vec<f64>], simps: &[Vec<usize>], slack: f64) {
        for s in simps {
            let (c, r2) = circumsphere(pts, s).expect("non-degenerate");
            for (i, p) in pts.iter().enumerate() {
                if s.contains(&i) {
                    continue;
                }
                assert!(
                    dist2(p, &c) >= r2 - slack,
                    "vertex {i} strictly inside circumsphere of {s:?}"
                );
            }
        }
    }

    #[test]
    fn triangle_plus_center() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.25, 0.25],
        ];
        let simps = delaunay(2, &pts, Some(0.5)).unwrap();
        assert_eq!(simps.len(), 3);
        circumcircle_property(&pts, &simps, 1e-10);
    }

    #[test]
    fn random_cloud_is_delaunay_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pts: Vec<Vec<f64>> = vec![
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![1.0, 1.0],
        ];
        for _ in 0..80 {
            pts.push(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        }
        let simps = delaunay(2, &pts, Some(4.0)).unwrap();
        circumcircle_property(&pts, &simps, 1e-9);
        let total: f64 = simps.iter().map(|s| simplex_volume(&pts, s)).sum();
        assert!((total - 4.0).abs() < 1e-8);
    }

    #[test]
    fn structured_grid_survives_cocircularity() {
        // A 5x5 lattice: every cell's corners are cocircular.
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(vec![i as f64, j as f64]);
            }
        }
        let simps = delaunay(2, &pts, Some(16.0)).unwrap();
        assert_eq!(simps.len(), 32);
        circumcircle_property(&pts, &simps, 1e-7);
    }

    #[test]
    fn random_cloud_3d_volume_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut pts = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    pts.push(vec![i as f64, j as f64, k as f64]);
                }
            }
        }
        for _ in 0..40 {
            pts.push(vec![
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            ]);
        }
        let simps = delaunay(3, &pts, Some(1.0)).unwrap();
        let total: f64 = simps.iter().map(|s| simplex_volume(&pts, s)).sum();
        assert!((total - 1.0).abs() < 1e-8);
        circumcircle_property(&pts, &simps, 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(delaunay(4, &[], None).is_err());
        assert!(delaunay(2, &[vec![0.0, 0.0], vec![1.0, 1.0]], None).is_err());
        assert!(delaunay(2, &[vec![0.0], vec![1.0, 1.0], vec![0.0, 1.0]], None).is_err());
    }
}
