//! Model backgrounds with closed-form curvature.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{powf, unit_sphere_volume, PI};

/// A symmetric model geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BackgroundManifold {
    /// Round `S^n` of the given radius.
    RoundSphere { n: usize, radius: f64 },
    /// Flat `T^n = (R / period Z)^n`.
    FlatTorus { n: usize, period: f64 },
    /// `S^p(a) x S^q(b)`; the symmetry coordinate is the polar angle of `S^q`.
    SphereProduct { p: usize, a: f64, q: usize, b: f64 },
}

impl BackgroundManifold {
    pub fn dimension(&self) -> usize {
        match *self {
            Self::RoundSphere { n, .. } | Self::FlatTorus { n, .. } => n,
            Self::SphereProduct { p, q, .. } => p + q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension();
        if n < 5 {
            return Err(Error::InvalidInput(format!("dimension must be >= 5, got {n}")));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            Self::RoundSphere { radius, .. } => positive("radius", radius),
            Self::FlatTorus { period, .. } => positive("period", period),
            Self::SphereProduct { p, a, q, b } => {
                if p == 0 || q == 0 {
                    return Err(Error::InvalidInput(format!("sphere product needs p, q >= 1, got p = {p}, q = {q}")));
                }
                positive("radius a", a)?;
                positive("radius b", b)
            }
        }
    }

    /// Closed-form Riemannian volume.
    pub fn volume(&self) -> f64 {
        match *self {
            Self::RoundSphere { n, radius } => unit_sphere_volume(n) * powf(radius, n as f64),
            Self::FlatTorus { n, period } => powf(period, n as f64),
            Self::SphereProduct { p, a, q, b } => {
                unit_sphere_volume(p) * powf(a, p as f64) * unit_sphere_volume(q) * powf(b, q as f64)
            }
        }
    }

    /// Ricci eigenvalues per factor, with their multiplicities.
    fn ricci_blocks(&self) -> Vec<(usize, f64)> {
        match *self {
            Self::RoundSphere { n, radius } => vec![(n, (n as f64 - 1.0) / (radius * radius))],
            Self::FlatTorus { n, .. } => vec![(n, 0.0)],
            Self::SphereProduct { p, a, q, b } => {
                vec![(p, (p as f64 - 1.0) / (a * a)), (q, (q as f64 - 1.0) / (b * b))]
            }
        }
    }
}

/// Constant curvature data of a model background.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundCurvature {
    pub n: usize,
    pub r0: f64,
    pub j0: f64,
    /// Schouten eigenvalue per factor: one entry for the sphere and torus,
    /// `(S^p, S^q)` for a product.
    pub a_blocks: Vec<f64>,
    pub abs_a2: f64,
    pub sigma2: f64,
    pub q0: f64,
}

pub fn make_background(spec: &BackgroundManifold) -> Result<BackgroundCurvature> {
    spec.validate()?;
    let n = spec.dimension();
    let nf = n as f64;
    let blocks = spec.ricci_blocks();
    let r0: f64 = blocks.iter().map(|&(m, ric)| m as f64 * ric).sum();
    let j0 = r0 / (2.0 * (nf - 1.0));
    let a_blocks: Vec<f64> = blocks.iter().map(|&(_, ric)| (ric - j0) / (nf - 2.0)).collect();
    let abs_a2: f64 = blocks.iter().zip(&a_blocks).map(|(&(m, _), a)| m as f64 * a * a).sum();
    let sigma2 = 0.5 * (j0 * j0 - abs_a2);
    let q0 = -2.0 * abs_a2 + 0.5 * nf * j0 * j0;
    Ok(BackgroundCurvature { n, r0, j0, a_blocks, abs_a2, sigma2, q0 })
}

/// Radius of the circle whose circumference is the torus period.
pub(crate) fn torus_radius(period: f64) -> f64 {
    period / (2.0 * PI)
}
