//! Curvature of conformal metrics `u^(4/(n-4)) g` and the bridges to the
//! second-order convention `u^(4/(n-2)) g`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::HessianComponents;
use crate::math::{ln, powf};
use crate::metric::{CurvatureFields, Metric, MetricTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExponentConvention {
    /// `g~ = u^(4/(n-4)) g`.
    FourthOrder,
    /// `g~ = u^(4/(n-2)) g`.
    SecondOrder,
}

/// Positive node values of a conformal factor.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalFactor {
    values: Vec<f64>,
    convention: ExponentConvention,
}

impl ConformalFactor {
    pub fn new(values: Vec<f64>, convention: ExponentConvention) -> Result<Self> {
        check_positive(&values)?;
        Ok(Self { values, convention })
    }

    pub fn fourth_order(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ExponentConvention::FourthOrder)
    }

    pub fn second_order(values: Vec<f64>) -> Result<Self> {
        Self::new(values, ExponentConvention::SecondOrder)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn convention(&self) -> ExponentConvention {
        self.convention
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn check_positive(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveFactor { index, value });
        }
    }
    Ok(())
}

fn require_fourth_order(u: &ConformalFactor) -> Result<()> {
    match u.convention {
        ExponentConvention::FourthOrder => Ok(()),
        ExponentConvention::SecondOrder => Err(Error::InvalidInput(
            "expected a 4/(n-4) factor; convert second-order factors with convert_exponent".into(),
        )),
    }
}

/// Derivative data of a factor `u` in a background metric, shared by the
/// transformation formulas.
#[derive(Clone, Debug)]
pub struct FactorJet {
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    /// `|grad u|^2`.
    pub grad_sq: Vec<f64>,
    pub hessian: HessianComponents,
    pub laplacian: Vec<f64>,
}

impl FactorJet {
    pub fn new(bg: &Metric, u: &[f64]) -> Self {
        let grid = bg.grid();
        let ux = grid.d1().matvec(u);
        let uxx = grid.d2().matvec(u);
        let hessian = bg.hessian_with(&ux, &uxx);
        let laplacian = hessian.trace(grid);
        let grad_sq = bg.grad_dot_x(&ux, &ux);
        Self { u: u.to_vec(), ux, grad_sq, hessian, laplacian }
    }

    /// `|D^2 u|^2`.
    pub fn hessian_norm_sq(&self, bg: &Metric) -> Vec<f64> {
        self.hessian.norm_sq(bg.grid())
    }

    /// `u_ij u_i u_j`; the gradient is radial.
    pub fn hessian_on_gradient(&self) -> Vec<f64> {
        self.hessian.radial.iter().zip(&self.grad_sq).map(|(h, g)| h * g).collect()
    }

    /// `A_ij u_ij` with the background Schouten tensor.
    pub fn schouten_hessian(&self, bg: &Metric) -> Vec<f64> {
        bg.fields().contract_hessian(bg.grid(), &self.hessian)
    }

    /// `A(grad u, grad u)`.
    pub fn schouten_gradient(&self, bg: &Metric) -> Vec<f64> {
        bg.fields().a_radial.iter().zip(&self.grad_sq).map(|(a, g)| a * g).collect()
    }
}

/// Schouten eigenvalues of a conformal metric, radial and per block.
#[derive(Clone, Debug, PartialEq)]
pub struct SchoutenComponents {
    pub radial: Vec<f64>,
    pub blocks: Vec<Vec<f64>>,
}

/// Schouten endomorphism of `u^(4/(n-4)) g`, from
/// `A~_ij = A_ij - (2/k) u^-1 u_ij - (2/k^2) u^-2 |grad u|^2 g_ij + (2(n-2)/k^2) u^-2 u_i u_j`
/// with `k = n - 4`, raised by `g~`.
pub fn schouten_conformal(bg: &Metric, u: &ConformalFactor) -> Result<SchoutenComponents> {
    require_fourth_order(u)?;
    Ok(schouten_from_jet(bg, &FactorJet::new(bg, u.values())))
}

fn schouten_from_jet(bg: &Metric, jet: &FactorJet) -> SchoutenComponents {
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let f = bg.fields();
    let len = jet.u.len();
    let raise: Vec<f64> = jet.u.iter().map(|&u| powf(u, -4.0 / k)).collect();
    let iso: Vec<f64> = (0..len).map(|i| -2.0 / (k * k) * jet.grad_sq[i] / (jet.u[i] * jet.u[i])).collect();
    let radial = (0..len)
        .map(|i| {
            let u = jet.u[i];
            raise[i]
                * (f.a_radial[i] - 2.0 / k * jet.hessian.radial[i] / u
                    + iso[i]
                    + 2.0 * (n - 2.0) / (k * k) * jet.grad_sq[i] / (u * u))
        })
        .collect();
    let blocks = f
        .a_blocks
        .iter()
        .zip(&jet.hessian.blocks)
        .map(|(a, h)| (0..len).map(|i| raise[i] * (a[i] - 2.0 / k * h[i] / jet.u[i] + iso[i])).collect())
        .collect();
    SchoutenComponents { radial, blocks }
}

/// `sigma_2(A~)` through the expanded formula in terms of `u` and its
/// derivatives in the background metric.
pub fn sigma2_conformal(bg: &Metric, u: &ConformalFactor) -> Result<Vec<f64>> {
    require_fourth_order(u)?;
    let jet = FactorJet::new(bg, u.values());
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let f = bg.fields();
    let hess_sq = jet.hessian_norm_sq(bg);
    let hug = jet.hessian_on_gradient();
    let ah = jet.schouten_hessian(bg);
    let ag = jet.schouten_gradient(bg);
    Ok((0..jet.u.len())
        .map(|i| {
            let u = jet.u[i];
            let lap = jet.laplacian[i];
            let g = jet.grad_sq[i];
            let bracket = f.sigma2[i] + 2.0 / (k * k) * lap * lap / (u * u) - 2.0 / (k * k) * hess_sq[i] / (u * u)
                + 4.0 / (k * k * k) * g * lap / (u * u * u)
                + 4.0 * (n - 2.0) / (k * k * k) * hug[i] / (u * u * u)
                - 2.0 / k * f.j[i] * lap / u
                + 2.0 / k * ah[i] / u
                - 2.0 * (n - 1.0) / (k * k * k) * g * g / (u * u * u * u)
                - 2.0 / (k * k) * f.j[i] * g / (u * u)
                - 2.0 * (n - 2.0) / (k * k) * ag[i] / (u * u);
            powf(u, -8.0 / k) * bracket
        })
        .collect())
}

/// `Q~ = (2/(n-4)) u^(-(n+4)/(n-4)) P u`.
pub fn q_conformal(bg: &Metric, u: &ConformalFactor) -> Result<Vec<f64>> {
    require_fourth_order(u)?;
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let pu = bg.apply_paneitz(u.values());
    Ok(u.values().iter().zip(&pu).map(|(&u, p)| 2.0 / k * powf(u, -(n + 4.0) / k) * p).collect())
}

/// `m = -Delta u - (2/(n-4)) u^-1 |grad u|^2 + ((n-4)/2) J u`; `J~ > 0` iff `m > 0`.
pub fn scalar_positivity_margin(bg: &Metric, u: &ConformalFactor) -> Result<(Vec<f64>, bool)> {
    require_fourth_order(u)?;
    let m = margin_from_jet(bg, &FactorJet::new(bg, u.values()));
    let ok = m.iter().all(|&v| v > 0.0);
    Ok((m, ok))
}

pub(crate) fn margin_from_jet(bg: &Metric, jet: &FactorJet) -> Vec<f64> {
    let k = bg.dimension() as f64 - 4.0;
    let j = &bg.fields().j;
    (0..jet.u.len())
        .map(|i| -jet.laplacian[i] - 2.0 / k * jet.grad_sq[i] / jet.u[i] + 0.5 * k * j[i] * jet.u[i])
        .collect()
}

/// `w = u^((n-4)/(n-2))`, so that `w^(4/(n-4)) g = u^(4/(n-2)) g`.
pub fn convert_exponent(u: &ConformalFactor, n: usize) -> Result<ConformalFactor> {
    match u.convention {
        ExponentConvention::FourthOrder => Ok(u.clone()),
        ExponentConvention::SecondOrder => {
            let e = (n as f64 - 4.0) / (n as f64 - 2.0);
            ConformalFactor::fourth_order(u.values.iter().map(|&v| powf(v, e)).collect())
        }
    }
}

impl Metric {
    /// The metric `u^(4/(n-4)) self` with its curvature fields.
    pub fn conformal(&self, u: &ConformalFactor) -> Result<Metric> {
        require_fourth_order(u)?;
        let n = self.dimension() as f64;
        let k = n - 4.0;
        let jet = FactorJet::new(self, u.values());
        let schouten = schouten_from_jet(self, &jet);
        let q = q_conformal(self, u)?;
        let volume_element = u.values().iter().map(|&v| powf(v, 2.0 * n / k)).collect();
        let fields = CurvatureFields::from_schouten(self.grid(), schouten.radial, schouten.blocks, q, volume_element);
        let log_scale = self.log_scale().iter().zip(u.values()).map(|(w, &v)| w + 2.0 / k * ln(v)).collect();
        Ok(Metric::assemble(self.grid_arc().clone(), MetricTag::Conformal, log_scale, fields))
    }

    /// The background itself perturbed by a positive factor: same as
    /// [`Metric::conformal`] but tagged as a background.
    pub fn perturbed(&self, rho: &ConformalFactor) -> Result<Metric> {
        Ok(self.conformal(rho)?.retagged(MetricTag::Background))
    }
}

/// `|int Q~ dmu~ - 4 int sigma2~ dmu~ - ((n-4)/2) int J~^2 dmu~| / (1 + |int Q~ dmu~|)`.
pub fn total_q_identity_residual(bg: &Metric, u: &ConformalFactor) -> Result<f64> {
    let g = bg.conformal(u)?;
    Ok(total_q_residual_of(&g))
}

pub(crate) fn total_q_residual_of(g: &Metric) -> f64 {
    let n = g.dimension() as f64;
    let f = g.fields();
    let q = g.integrate(&f.q);
    let s = g.integrate(&f.sigma2);
    let j2: Vec<f64> = f.j.iter().map(|j| j * j).collect();
    let jj = g.integrate(&j2);
    (q - 4.0 * s - 0.5 * (n - 4.0) * jj).abs() / (1.0 + q.abs())
}

/// `J~ = (2/(n-4)) u^(-n/(n-4)) m` with `m` the positivity margin.
pub fn conformal_j_from_margin(bg: &Metric, u: &ConformalFactor) -> Result<Vec<f64>> {
    let (m, _) = scalar_positivity_margin(bg, u)?;
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    Ok(u.values().iter().zip(&m).map(|(&v, m)| 2.0 / k * powf(v, -n / k) * m).collect())
}
