//! Discrete conformal Laplacian and Paneitz operator, their quadratic forms
//! and spectra, and the covariance and Bochner checks.

use alloc::vec::Vec;

use crate::conformal::{ConformalFactor, FactorJet};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, min_value, symmetric_eigen, weighted_dot, Lu, Matrix};
use crate::math::{powf, sqrt};
use crate::metric::{Metric, MetricTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    ConformalLaplacian,
    Paneitz,
    /// The linearization of the continuity equation.
    Linearization,
}

/// A dense operator on node values together with the quadrature weights of
/// the inner product it is symmetric for, and its quadratic form.
///
/// Collocation matrices are weighted-symmetric only on band-limited pairs, so
/// their symmetric part is meaningless on the highest modes. `form` is the
/// integrated-by-parts energy assembled as a symmetric matrix, with
/// `f^T form f ~ <M f, f>_w`; spectra and positivity are read from it.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub entries: Matrix,
    pub form: Matrix,
    pub weights: Vec<f64>,
    pub weighted_symmetric: bool,
    pub metric_tag: MetricTag,
    pub kind: OperatorKind,
}

impl OperatorMatrix {
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.entries.matvec(f)
    }

    /// `<M f, f>_w` through the operator.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        weighted_dot(&self.weights, &self.apply(f), f)
    }

    /// `f^T form f`, the integrated-by-parts energy.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.form.matvec(f).iter().zip(f).map(|(a, b)| a * b).sum()
    }

    /// `|<M f, h>_w - <f, M h>_w|` relative to the absolute size of the pairings.
    pub fn symmetry_defect(&self, f: &[f64], h: &[f64]) -> f64 {
        let mf = self.apply(f);
        let mh = self.apply(h);
        let a = weighted_dot(&self.weights, &mf, h);
        let b = weighted_dot(&self.weights, f, &mh);
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    }

    /// `B^(-1/2) form B^(-1/2)`, `B = diag(weights)`: the weighted eigenproblem
    /// of the quadratic form as a symmetric one.
    pub fn symmetrized(&self) -> Matrix {
        let inv: Vec<f64> = self.weights.iter().map(|w| 1.0 / sqrt(*w)).collect();
        let mut m = self.form.scale_rows(&inv).scale_cols(&inv);
        let t = m.transpose();
        m.add_scaled(1.0, &t);
        m.scale(0.5);
        m
    }
}

/// `int [b (Delta f)^2 + c |grad f|^2 + z f^2] dmu` as a symmetric node matrix.
pub(crate) fn form_matrix(g: &Metric, biharmonic: bool, gradient: &[f64], zeroth: &[f64]) -> Matrix {
    let w = g.weights();
    let gm = g.gradient_metric();
    let d1 = g.grid().d1();
    let s: Vec<f64> = (0..w.len()).map(|i| w[i] * gm[i] * gradient[i]).collect();
    let mut m = d1.transpose().matmul(&d1.scale_rows(&s));
    if biharmonic {
        let lap = g.laplacian_matrix();
        m.add_scaled(1.0, &lap.transpose().matmul(&lap.scale_rows(w)));
    }
    m.add_diagonal(&(0..w.len()).map(|i| w[i] * zeroth[i]).collect::<Vec<_>>());
    m
}

pub(crate) fn conformal_laplacian_form(bg: &Metric) -> Matrix {
    let a = alloc::vec![bg.conformal_laplacian_coefficient(); bg.len()];
    form_matrix(bg, false, &a, &bg.fields().r)
}

pub(crate) fn paneitz_form(bg: &Metric) -> Matrix {
    let n = bg.dimension() as f64;
    let f = bg.fields();
    let c: Vec<f64> = f.j.iter().zip(&f.a_radial).map(|(j, a)| (n - 2.0) * j - 4.0 * a).collect();
    let z: Vec<f64> = f.q.iter().map(|q| 0.5 * (n - 4.0) * q).collect();
    form_matrix(bg, true, &c, &z)
}

pub fn assemble_conformal_laplacian(bg: &Metric) -> OperatorMatrix {
    OperatorMatrix {
        entries: bg.conformal_laplacian_matrix(),
        form: conformal_laplacian_form(bg),
        weights: bg.weights().to_vec(),
        weighted_symmetric: true,
        metric_tag: bg.tag(),
        kind: OperatorKind::ConformalLaplacian,
    }
}

pub fn assemble_paneitz(bg: &Metric) -> OperatorMatrix {
    OperatorMatrix {
        entries: bg.paneitz_matrix(),
        form: paneitz_form(bg),
        weights: bg.weights().to_vec(),
        weighted_symmetric: true,
        metric_tag: bg.tag(),
        kind: OperatorKind::Paneitz,
    }
}

/// `E(phi) = int (Delta phi)^2 - 4 A(grad phi, grad phi) + (n-2) J |grad phi|^2 + ((n-4)/2) Q phi^2`.
pub fn paneitz_energy(bg: &Metric, phi: &[f64]) -> f64 {
    let n = bg.dimension() as f64;
    let f = bg.fields();
    let lap = bg.laplacian(phi);
    let g = bg.grad_sq(phi);
    let integrand: Vec<f64> = (0..phi.len())
        .map(|i| {
            lap[i] * lap[i] - 4.0 * f.a_radial[i] * g[i]
                + (n - 2.0) * f.j[i] * g[i]
                + 0.5 * (n - 4.0) * f.q[i] * phi[i] * phi[i]
        })
        .collect();
    bg.integrate(&integrand)
}

/// `||P~ phi - rho^(-(n+4)/(n-4)) P(rho phi)||_inf / ||P(rho phi)||_inf`, with
/// `P~` assembled from the curvature fields of `rho^(4/(n-4)) g`.
pub fn conformal_covariance_residual(bg: &Metric, rho: &ConformalFactor, phi: &[f64]) -> Result<f64> {
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let g = bg.conformal(rho)?;
    let lhs = g.apply_paneitz(phi);
    let rho_phi: Vec<f64> = rho.values().iter().zip(phi).map(|(r, p)| r * p).collect();
    let p_rho_phi = bg.apply_paneitz(&rho_phi);
    let diff: Vec<f64> =
        (0..phi.len()).map(|i| lhs[i] - powf(rho.values()[i], -(n + 4.0) / k) * p_rho_phi[i]).collect();
    let denom = max_abs(&p_rho_phi);
    Ok(if denom == 0.0 { max_abs(&diff) } else { max_abs(&diff) / denom })
}

/// The four integrals of the Bochner identity
/// `int (Delta phi)^2 = int |D^2 phi|^2 + int J |grad phi|^2 + (n-2) int A(grad phi, grad phi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BochnerTerms {
    pub laplacian_sq: f64,
    pub hessian_sq: f64,
    pub j_gradient: f64,
    pub a_gradient: f64,
}

pub fn bochner_terms(bg: &Metric, phi: &[f64]) -> BochnerTerms {
    // Derivatives ignore constants; removing the mean keeps a constant input exactly zero.
    let mean = phi.iter().sum::<f64>() / phi.len() as f64;
    let shifted: Vec<f64> = phi.iter().map(|p| p - mean).collect();
    let jet = FactorJet::new(bg, &shifted);
    let f = bg.fields();
    let lap_sq: Vec<f64> = jet.laplacian.iter().map(|l| l * l).collect();
    let jg: Vec<f64> = f.j.iter().zip(&jet.grad_sq).map(|(j, g)| j * g).collect();
    BochnerTerms {
        laplacian_sq: bg.integrate(&lap_sq),
        hessian_sq: bg.integrate(&jet.hessian_norm_sq(bg)),
        j_gradient: bg.integrate(&jg),
        a_gradient: bg.integrate(&jet.schouten_gradient(bg)),
    }
}

/// Bochner defect normalized by `int (Delta phi)^2`; zero for constants.
pub fn bochner_residual(bg: &Metric, phi: &[f64]) -> f64 {
    let n = bg.dimension() as f64;
    let t = bochner_terms(bg, phi);
    let defect = t.laplacian_sq - t.hessian_sq - t.j_gradient - (n - 2.0) * t.a_gradient;
    if t.laplacian_sq == 0.0 {
        defect.abs()
    } else {
        defect.abs() / t.laplacian_sq
    }
}

/// Result of the Green's function sign test.
#[derive(Clone, Debug, PartialEq)]
pub struct GreensCheck {
    pub kernel_trivial: bool,
    pub positive: bool,
    pub smallest_abs_eigenvalue: f64,
    pub green: Option<Vec<f64>>,
}

/// Near-kernel threshold, relative to the spectral radius.
pub const KERNEL_TOLERANCE: f64 = 1e-8;

pub fn greens_sign_check(p: &OperatorMatrix, source: usize) -> Result<GreensCheck> {
    let n = p.entries.rows();
    if source >= n {
        return Err(Error::InvalidInput(alloc::format!("source node {source} out of range 0..{n}")));
    }
    let eig = symmetric_eigen(&p.symmetrized(), false)?;
    let smallest = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let radius = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(smallest > KERNEL_TOLERANCE * radius) {
        return Ok(GreensCheck {
            kernel_trivial: false,
            positive: false,
            smallest_abs_eigenvalue: smallest,
            green: None,
        });
    }
    let mut delta = alloc::vec![0.0; n];
    delta[source] = 1.0 / p.weights[source];
    let green = Lu::factor(&p.entries)?.solve(&delta);
    Ok(GreensCheck {
        kernel_trivial: true,
        positive: min_value(&green) > 0.0,
        smallest_abs_eigenvalue: smallest,
        green: Some(green),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lowest_eigenfunction: Vec<f64>,
}

/// The `k` smallest eigenvalues of the weighted-symmetric eigenproblem.
pub fn spectrum(m: &OperatorMatrix, k: usize) -> Result<Spectrum> {
    if !m.weighted_symmetric {
        return Err(Error::NotSymmetric);
    }
    let eig = symmetric_eigen(&m.symmetrized(), true)?;
    let vectors = eig.vectors.ok_or(Error::Singular)?;
    let lowest_eigenfunction = (0..vectors.rows()).map(|i| vectors[(i, 0)] / sqrt(m.weights[i])).collect();
    Ok(Spectrum { eigenvalues: eig.values.into_iter().take(k).collect(), lowest_eigenfunction })
}

/// Rayleigh quotient of the quadratic form, `f^T form f / <f, f>_w`.
pub fn rayleigh_quotient(m: &OperatorMatrix, f: &[f64]) -> f64 {
    m.energy(f) / weighted_dot(&m.weights, f, f)
}
