#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use paneitz_core::{make_grid, BackgroundManifold, ConformalFactor, Metric};

pub fn sphere(n: usize, res: usize) -> Metric {
    model(BackgroundManifold::RoundSphere { n, radius: 1.0 }, res)
}

pub fn torus(n: usize, res: usize) -> Metric {
    model(BackgroundManifold::FlatTorus { n, period: 2.0 * PI }, res)
}

pub fn product(res: usize) -> Metric {
    model(BackgroundManifold::SphereProduct { p: 2, a: 1.0, q: 4, b: 1.0 }, res)
}

pub fn model(spec: BackgroundManifold, res: usize) -> Metric {
    Metric::model(Arc::new(make_grid(&spec, res).unwrap()))
}

/// `S^6` conformally perturbed by `(1 + amp cos theta)^(4/(n-4))`.
pub fn perturbed_s6(res: usize, amp: f64) -> Metric {
    let m = sphere(6, res);
    let rho = factor(&m, |x| 1.0 + amp * x);
    m.perturbed(&rho).unwrap()
}

pub fn nodes(g: &Metric, f: impl Fn(f64) -> f64) -> Vec<f64> {
    g.grid().x().iter().map(|&x| f(x)).collect()
}

pub fn factor(g: &Metric, f: impl Fn(f64) -> f64) -> ConformalFactor {
    ConformalFactor::fourth_order(nodes(g, f)).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `max|a - b| / max(|b|, floor)`.
pub fn rel_field(a: &[f64], b: &[f64]) -> f64 {
    max_diff(a, b) / max_abs(b).max(1e-300)
}

/// Volume of the unit `S^k` from `2 pi^((k+1)/2) / Gamma((k+1)/2)`, by the
/// two-step recursion so no gamma function is needed.
pub fn sphere_volume(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_volume(k - 2),
    }
}

/// Curvature constants of a product of spheres and flat factors from its
/// Ricci eigenvalues: `(multiplicity, ricci)` per factor.
pub struct ModelCurvature {
    pub r: f64,
    pub j: f64,
    pub a: Vec<f64>,
    pub abs_a2: f64,
    pub sigma2: f64,
    pub q: f64,
}

pub fn model_curvature(factors: &[(usize, f64)]) -> ModelCurvature {
    let n: usize = factors.iter().map(|f| f.0).sum();
    let nf = n as f64;
    let r: f64 = factors.iter().map(|&(m, ric)| m as f64 * ric).sum();
    let j = r / (2.0 * (nf - 1.0));
    let a: Vec<f64> = factors.iter().map(|&(_, ric)| (ric - j) / (nf - 2.0)).collect();
    let abs_a2: f64 = factors.iter().zip(&a).map(|(&(m, _), a)| m as f64 * a * a).sum();
    // sigma_2 as the second elementary symmetric polynomial of the eigenvalue list.
    let eig: Vec<f64> = factors.iter().zip(&a).flat_map(|(&(m, _), &a)| std::iter::repeat_n(a, m)).collect();
    let mut sigma2 = 0.0;
    for i in 0..eig.len() {
        for k in i + 1..eig.len() {
            sigma2 += eig[i] * eig[k];
        }
    }
    let q = -2.0 * abs_a2 + 0.5 * nf * j * j;
    ModelCurvature { r, j, a, abs_a2, sigma2, q }
}
