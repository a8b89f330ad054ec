//! Collocation grids for cohomogeneity-one functions.
//!
//! Functions depend on the polar angle `theta` of one round factor `S^m(c)`
//! (the radial factor) and are stored by their values at Chebyshev-Gauss
//! angles. The interpolant is a polynomial in `x = cos(theta)`, which makes
//! every stored function smooth and even across both poles. A flat torus is
//! the case `m = 1`: its even functions of one coordinate are polynomials in
//! `cos(2 pi s / L)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::background::{make_background, torus_radius, BackgroundCurvature, BackgroundManifold};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{cos, powf, sin, unit_sphere_volume};
use crate::quadrature::{chebyshev_angles, differentiation_matrices, interpolatory_weights};

pub const MIN_RESOLUTION: usize = 16;

/// How a block of directions orthogonal to the radial one sees a radial function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Tangent to the orbits inside the radial factor; Hessian `cot`-type term.
    Orbit,
    /// A factor the function does not depend on; zero Hessian in the model.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub multiplicity: usize,
    /// Model Schouten eigenvalue on this block.
    pub schouten: f64,
}

/// Which function class the grid represents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SymmetryClass {
    /// Zonal functions on `S^n`.
    Zonal { n: usize, radius: f64 },
    /// Zonal in the `S^q` factor, constant on `S^p`.
    ProductZonal { p: usize, q: usize },
    /// Functions of one flat coordinate, even under `s -> -s`.
    EvenPeriodic { period: f64 },
}

/// Node values of the Hessian of a radial function, as eigenvalues of the
/// endomorphism: one radial value and one value per block.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianComponents {
    pub radial: Vec<f64>,
    pub blocks: Vec<Vec<f64>>,
}

impl HessianComponents {
    pub fn trace(&self, grid: &CollocationGrid) -> Vec<f64> {
        let mut t = self.radial.clone();
        for (b, vals) in grid.blocks().iter().zip(&self.blocks) {
            for (ti, v) in t.iter_mut().zip(vals) {
                *ti += b.multiplicity as f64 * v;
            }
        }
        t
    }

    pub fn norm_sq(&self, grid: &CollocationGrid) -> Vec<f64> {
        let mut t: Vec<f64> = self.radial.iter().map(|r| r * r).collect();
        for (b, vals) in grid.blocks().iter().zip(&self.blocks) {
            for (ti, v) in t.iter_mut().zip(vals) {
                *ti += b.multiplicity as f64 * v * v;
            }
        }
        t
    }

    /// Pointwise `|D^2 f - (Delta f / n) g|^2`.
    pub fn trace_free_norm_sq(&self, grid: &CollocationGrid) -> Vec<f64> {
        let n = grid.dimension() as f64;
        let tr = self.trace(grid);
        self.norm_sq(grid).iter().zip(&tr).map(|(s, t)| s - t * t / n).collect()
    }
}

/// A radial differential operator `f -> a (D2 f) + b (D1 f)` with node
/// coefficients, `D1`, `D2` the derivatives in `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialOp {
    pub second: Vec<f64>,
    pub first: Vec<f64>,
}

impl RadialOp {
    pub fn zero(n: usize) -> Self {
        Self { second: vec![0.0; n], first: vec![0.0; n] }
    }

    pub fn apply(&self, grid: &CollocationGrid, f: &[f64]) -> Vec<f64> {
        let fx = grid.d1().matvec(f);
        let fxx = grid.d2().matvec(f);
        self.apply_with(&fx, &fxx)
    }

    /// Applies the operator given precomputed `x`-derivatives.
    pub fn apply_with(&self, fx: &[f64], fxx: &[f64]) -> Vec<f64> {
        (0..fx.len()).map(|i| self.second[i] * fxx[i] + self.first[i] * fx[i]).collect()
    }

    pub fn to_matrix(&self, grid: &CollocationGrid) -> Matrix {
        let mut m = grid.d2().scale_rows(&self.second);
        m.add_scaled(1.0, &grid.d1().scale_rows(&self.first));
        m
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &RadialOp) {
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += alpha * b;
        }
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += alpha * b;
        }
    }

    /// Multiplies the operator on the left by a node function.
    pub fn scaled_by(&self, s: &[f64]) -> RadialOp {
        RadialOp {
            second: self.second.iter().zip(s).map(|(a, b)| a * b).collect(),
            first: self.first.iter().zip(s).map(|(a, b)| a * b).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CollocationGrid {
    background: BackgroundManifold,
    curvature: BackgroundCurvature,
    symmetry_class: SymmetryClass,
    radial_dim: usize,
    radial_radius: f64,
    radial_schouten: f64,
    blocks: Vec<Block>,
    theta: Vec<f64>,
    x: Vec<f64>,
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    d1: Matrix,
    d2: Matrix,
}

pub fn make_grid(spec: &BackgroundManifold, resolution: usize) -> Result<CollocationGrid> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidInput(alloc::format!("resolution must be >= {MIN_RESOLUTION}, got {resolution}")));
    }
    let curvature = make_background(spec)?;
    let n = spec.dimension();
    let (symmetry_class, radial_dim, radial_radius, radial_schouten, other_volume, mut blocks) = match *spec {
        BackgroundManifold::RoundSphere { n, radius } => {
            let a = curvature.a_blocks[0];
            let blocks = vec![Block { kind: BlockKind::Orbit, multiplicity: n - 1, schouten: a }];
            (SymmetryClass::Zonal { n, radius }, n, radius, a, 1.0, blocks)
        }
        BackgroundManifold::FlatTorus { n, period } => {
            let blocks = vec![Block { kind: BlockKind::Fixed, multiplicity: n - 1, schouten: 0.0 }];
            (SymmetryClass::EvenPeriodic { period }, 1, torus_radius(period), 0.0, powf(period, (n - 1) as f64), blocks)
        }
        BackgroundManifold::SphereProduct { p, a, q, b } => {
            let (ap, aq) = (curvature.a_blocks[0], curvature.a_blocks[1]);
            let blocks = vec![
                Block { kind: BlockKind::Orbit, multiplicity: q - 1, schouten: aq },
                Block { kind: BlockKind::Fixed, multiplicity: p, schouten: ap },
            ];
            (SymmetryClass::ProductZonal { p, q }, q, b, aq, unit_sphere_volume(p) * powf(a, p as f64), blocks)
        }
    };
    blocks.retain(|b| b.multiplicity > 0);
    debug_assert_eq!(1 + blocks.iter().map(|b| b.multiplicity).sum::<usize>(), n);

    let theta = chebyshev_angles(resolution);
    let x: Vec<f64> = theta.iter().map(|&t| cos(t)).collect();
    let nodes: Vec<f64> = theta.iter().map(|&t| radial_radius * t).collect();
    let orbit_scale = unit_sphere_volume(radial_dim - 1) * powf(radial_radius, radial_dim as f64) * other_volume;
    let quad_weights: Vec<f64> =
        interpolatory_weights(&theta, radial_dim - 1).into_iter().map(|w| w * orbit_scale).collect();
    let (d1, d2) = differentiation_matrices(&theta);
    Ok(CollocationGrid {
        background: *spec,
        curvature,
        symmetry_class,
        radial_dim,
        radial_radius,
        radial_schouten,
        blocks,
        theta,
        x,
        nodes,
        quad_weights,
        d1,
        d2,
    })
}

impl CollocationGrid {
    pub fn background(&self) -> &BackgroundManifold {
        &self.background
    }

    pub fn curvature(&self) -> &BackgroundCurvature {
        &self.curvature
    }

    pub fn symmetry_class(&self) -> SymmetryClass {
        self.symmetry_class
    }

    pub fn dimension(&self) -> usize {
        self.curvature.n
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Arclength coordinate of each node along the radial direction.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Polar angle of each node on the radial factor.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `cos(theta)`, the interpolation coordinate.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Quadrature weights for `int f dmu` over the whole manifold.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// `d/dx` on node values.
    pub fn d1(&self) -> &Matrix {
        &self.d1
    }

    /// `d^2/dx^2` on node values.
    pub fn d2(&self) -> &Matrix {
        &self.d2
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn radial_dim(&self) -> usize {
        self.radial_dim
    }

    pub fn radial_radius(&self) -> f64 {
        self.radial_radius
    }

    pub fn radial_schouten(&self) -> f64 {
        self.radial_schouten
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.quad_weights.iter().zip(f).map(|(w, f)| w * f).sum()
    }

    /// `|ds x|^2 = (1 - x^2) / c^2`: converts `(f_x)^2` into `|grad f|^2`.
    pub fn gradient_metric(&self) -> Vec<f64> {
        let c2 = self.radial_radius * self.radial_radius;
        self.theta.iter().map(|&t| sin(t) * sin(t) / c2).collect()
    }

    /// Radial second derivative in arclength, `f_ss`.
    pub fn radial_hessian_op(&self) -> RadialOp {
        let c2 = self.radial_radius * self.radial_radius;
        RadialOp {
            second: self.theta.iter().map(|&t| sin(t) * sin(t) / c2).collect(),
            first: self.x.iter().map(|&x| -x / c2).collect(),
        }
    }

    /// Hessian eigenvalue on a block: `cot`-type term on orbit blocks, zero on fixed blocks.
    pub fn block_hessian_op(&self, block: &Block) -> RadialOp {
        let c2 = self.radial_radius * self.radial_radius;
        match block.kind {
            BlockKind::Orbit => {
                RadialOp { second: vec![0.0; self.len()], first: self.x.iter().map(|&x| -x / c2).collect() }
            }
            BlockKind::Fixed => RadialOp::zero(self.len()),
        }
    }

    pub fn laplacian_op(&self) -> RadialOp {
        let mut op = self.radial_hessian_op();
        for b in &self.blocks {
            op.add_scaled(b.multiplicity as f64, &self.block_hessian_op(b));
        }
        op
    }
}

/// Background Laplace-Beltrami operator (trace of the Hessian, non-positive spectrum).
pub fn laplacian(grid: &CollocationGrid, f: &[f64]) -> Vec<f64> {
    grid.laplacian_op().apply(grid, f)
}

pub fn hessian_components(grid: &CollocationGrid, f: &[f64]) -> HessianComponents {
    let fx = grid.d1().matvec(f);
    let fxx = grid.d2().matvec(f);
    HessianComponents {
        radial: grid.radial_hessian_op().apply_with(&fx, &fxx),
        blocks: grid.blocks().iter().map(|b| grid.block_hessian_op(b).apply_with(&fx, &fxx)).collect(),
    }
}
