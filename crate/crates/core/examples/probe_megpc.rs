use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use uqtrack::basis::MeElement;
use uqtrack::megpc::{local_decay, should_split, split_dimensions};
use uqtrack::models::burgers::{burgers_exact, BurgersRiemannConfig};
use uqtrack::regression::{solve_ols_tsvd, DEFAULT_SVD_TOL};

// Halton low-discrepancy points in [0,1]^2.
fn halton(i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = i + 1;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

struct Leaf {
    element: MeElement,
    coeffs: Vec<f64>,
}

fn run(theta1: f64, alpha: f64, n_pts: usize, min_width: f64) -> (Vec<Leaf>, usize) {
    let bcfg = BurgersRiemannConfig::default();
    let root = MeElement::new(vec![-1.0, -1.0], vec![1.0, 1.0], 2).unwrap();
    let mut pending = vec![root];
    let mut leaves: Vec<Leaf> = Vec::new();
    let mut n_ev = 0usize;
    while !pending.is_empty() {
        let mut next = Vec::new();
        for element in pending {
            let offset = std::env::var("PAT_OFFSET")
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(0usize);
            let pts: Vec<Vec<f64>> = (offset..offset + n_pts)
                .map(|i| {
                    let z = [halton(i, 2), halton(i, 3)];
                    element
                        .lower()
                        .iter()
                        .zip(element.upper())
                        .zip(z)
                        .map(|((a, b), t)| a + (b - a) * t)
                        .collect()
                })
                .collect();
            let vals: Vec<f64> =
                pts.iter().map(|x| burgers_exact(&bcfg, x).unwrap()).collect();
            n_ev += n_pts;
            let p = element.num_basis();
            let mut psi = DMatrix::zeros(pts.len(), p);
            for (i, x) in pts.iter().enumerate() {
                for (j, v) in element.eval_all(x).into_iter().enumerate() {
                    psi[(i, j)] = v;
                }
            }
            let rhs = DVector::from_column_slice(&vals);
            let coeffs = solve_ols_tsvd(&psi, &rhs, DEFAULT_SVD_TOL)
                .map(|r| r.coefficients)
                .unwrap_or_else(|_| {
                    let mut c = vec![0.0; p];
                    c[0] = vals.iter().sum::<f64>() / vals.len() as f64;
                    c
                });
            let eta = local_decay(&coeffs, element.indices());
            if should_split(eta, element.probability(), alpha, theta1) && leaves.len() < 20000 {
                let widths: Vec<f64> = element
                    .lower()
                    .iter()
                    .zip(element.upper())
                    .map(|(a, b)| b - a)
                    .collect();
                let dims: Vec<usize> =
                    split_dimensions(&coeffs, element.indices(), 0.2, &widths)
                        .into_iter()
                        .filter(|&k| widths[k] / 2.0 >= min_width * (1.0 - 1e-9))
                        .collect();
                if dims.is_empty() {
                    leaves.push(Leaf { element, coeffs });
                } else {
                    next.extend(element.bisect(&dims));
                }
            } else {
                leaves.push(Leaf { element, coeffs });
            }
        }
        pending = next;
    }
    (leaves, n_ev)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let alpha: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let n_pts: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(5);
    let bcfg = BurgersRiemannConfig::default();
    for (theta1, grid_m) in [(1e-3, 61.0), (1e-4, 121.0), (1e-5, 241.0)] {
        let (leaves, n_ev) = run(theta1, alpha, n_pts, 2.0 / (grid_m - 1.0));
        let mut hist: BTreeMap<i64, usize> = BTreeMap::new();
        for leaf in &leaves {
            let w = leaf.element.upper()[0] - leaf.element.lower()[0];
            *hist.entry((2.0 / w).log2().round() as i64).or_default() += 1;
        }
        let m = 241usize;
        let dx = 2.0 / (m as f64 - 1.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            for j in 0..m {
                let xi = [-1.0 + dx * i as f64, -1.0 + dx * j as f64];
                let exact = burgers_exact(&bcfg, &xi).unwrap();
                let leaf = leaves.iter().find(|l| l.element.contains(&xi)).unwrap();
                let surr: f64 = leaf
                    .element
                    .eval_all(&xi)
                    .iter()
                    .zip(&leaf.coeffs)
                    .map(|(p, c)| p * c)
                    .sum();
                num += (surr - exact).abs();
                den += exact.abs();
            }
        }
        println!(
            "theta1={theta1:.0e} leaves={} n_ev={} eps={:.4e} hist={hist:?}",
            leaves.len(),
            n_ev,
            num / den
        );
    }
}
