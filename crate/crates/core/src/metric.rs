//! Metrics conformal to a model background, `g = e^(2 omega) g_model`, with
//! `omega` a radial function. Curvature is carried as node fields so that a
//! metric can serve as the background of a further conformal change.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{CollocationGrid, HessianComponents, RadialOp};
use crate::linalg::Matrix;
use crate::math::exp;

/// Which metric an operator or field lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricTag {
    Background,
    Conformal,
}

/// Curvature of a metric as node fields. Schouten eigenvalues are those of
/// the endomorphism `g^-1 A`, one radial value and one value per grid block.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureFields {
    pub j: Vec<f64>,
    pub a_radial: Vec<f64>,
    pub a_blocks: Vec<Vec<f64>>,
    pub abs_a2: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    /// Density of this metric's volume relative to its parent's.
    pub volume_element: Vec<f64>,
}

impl CurvatureFields {
    /// Fills `j`, `abs_a2`, `sigma2`, `r` from the Schouten eigenvalues.
    pub(crate) fn from_schouten(
        grid: &CollocationGrid,
        a_radial: Vec<f64>,
        a_blocks: Vec<Vec<f64>>,
        q: Vec<f64>,
        volume_element: Vec<f64>,
    ) -> Self {
        let n = grid.dimension() as f64;
        let mut j = a_radial.clone();
        let mut abs_a2: Vec<f64> = a_radial.iter().map(|a| a * a).collect();
        for (b, vals) in grid.blocks().iter().zip(&a_blocks) {
            let m = b.multiplicity as f64;
            for i in 0..j.len() {
                j[i] += m * vals[i];
                abs_a2[i] += m * vals[i] * vals[i];
            }
        }
        let sigma2 = j.iter().zip(&abs_a2).map(|(j, a)| 0.5 * (j * j - a)).collect();
        let r = j.iter().map(|j| 2.0 * (n - 1.0) * j).collect();
        Self { j, a_radial, a_blocks, abs_a2, sigma2, q, r, volume_element }
    }

    /// Pointwise `A_ij h_ij` for a Hessian given by block eigenvalues.
    pub fn contract_hessian(&self, grid: &CollocationGrid, h: &HessianComponents) -> Vec<f64> {
        let mut out: Vec<f64> = self.a_radial.iter().zip(&h.radial).map(|(a, h)| a * h).collect();
        for ((b, a), hv) in grid.blocks().iter().zip(&self.a_blocks).zip(&h.blocks) {
            let m = b.multiplicity as f64;
            for i in 0..out.len() {
                out[i] += m * a[i] * hv[i];
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Metric {
    grid: Arc<CollocationGrid>,
    tag: MetricTag,
    log_scale: Vec<f64>,
    /// `e^(-2 omega) (1 - x^2) / c^2`: turns `f_x h_x` into `<grad f, grad h>`.
    gradient_metric: Vec<f64>,
    /// `d omega / dx`.
    log_scale_x: Vec<f64>,
    weights: Vec<f64>,
    fields: CurvatureFields,
    laplacian: RadialOp,
    /// Coefficient of `f_x` from differentiating the Paneitz divergence coefficient.
    paneitz_drift: Vec<f64>,
}

impl Metric {
    /// The model metric of the grid's background.
    pub fn model(grid: Arc<CollocationGrid>) -> Self {
        let n = grid.len();
        let c = grid.curvature().clone();
        let a_blocks = grid.blocks().iter().map(|b| vec![b.schouten; n]).collect();
        let fields = CurvatureFields::from_schouten(
            &grid,
            vec![grid.radial_schouten(); n],
            a_blocks,
            vec![c.q0; n],
            vec![1.0; n],
        );
        Self::assemble(grid, MetricTag::Background, vec![0.0; n], fields)
    }

    /// Builds the metric `e^(2 omega) g_model` given its curvature fields.
    pub(crate) fn assemble(
        grid: Arc<CollocationGrid>,
        tag: MetricTag,
        log_scale: Vec<f64>,
        fields: CurvatureFields,
    ) -> Self {
        let n = grid.dimension() as f64;
        let log_scale_x = grid.d1().matvec(&log_scale);
        let inv_scale2: Vec<f64> = log_scale.iter().map(|w| exp(-2.0 * w)).collect();
        let gradient_metric: Vec<f64> = grid.gradient_metric().iter().zip(&inv_scale2).map(|(g, e)| g * e).collect();
        let weights = grid.quad_weights().iter().zip(&log_scale).map(|(w, o)| w * exp(n * o)).collect();

        // e^(-2w) [Delta_model + (n - 2) <grad w, grad .>_model]
        let model_grad = grid.gradient_metric();
        let mut laplacian = grid.laplacian_op();
        for i in 0..grid.len() {
            laplacian.first[i] += (n - 2.0) * model_grad[i] * log_scale_x[i];
        }
        let laplacian = laplacian.scaled_by(&inv_scale2);

        let coeff: Vec<f64> = fields.a_radial.iter().zip(&fields.j).map(|(a, j)| 4.0 * a - (n - 2.0) * j).collect();
        let coeff_x = grid.d1().matvec(&coeff);
        let paneitz_drift = coeff_x.iter().zip(&gradient_metric).map(|(c, g)| c * g).collect();
        Self { grid, tag, log_scale, gradient_metric, log_scale_x, weights, fields, laplacian, paneitz_drift }
    }

    pub(crate) fn retagged(mut self, tag: MetricTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn grid(&self) -> &CollocationGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<CollocationGrid> {
        &self.grid
    }

    pub fn tag(&self) -> MetricTag {
        self.tag
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `omega` with `g = e^(2 omega) g_model`.
    pub fn log_scale(&self) -> &[f64] {
        &self.log_scale
    }

    pub fn fields(&self) -> &CurvatureFields {
        &self.fields
    }

    /// Quadrature weights of `dmu_g`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, f)| w * f).sum()
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(int |f|^p dmu)^(1/p)`.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        let s: f64 = self.weights.iter().zip(f).map(|(w, f)| w * crate::math::powf(f.abs(), p)).sum();
        crate::math::powf(s, 1.0 / p)
    }

    /// `sqrt(int f^2 dmu / vol)`.
    pub fn rms(&self, f: &[f64]) -> f64 {
        let s: f64 = self.weights.iter().zip(f).map(|(w, f)| w * f * f).sum();
        crate::math::sqrt(s / self.volume())
    }

    /// `<grad f, grad h>` from `x`-derivatives.
    pub fn grad_dot_x(&self, fx: &[f64], hx: &[f64]) -> Vec<f64> {
        (0..fx.len()).map(|i| self.gradient_metric[i] * fx[i] * hx[i]).collect()
    }

    pub fn grad_dot(&self, f: &[f64], h: &[f64]) -> Vec<f64> {
        let fx = self.grid.d1().matvec(f);
        let hx = self.grid.d1().matvec(h);
        self.grad_dot_x(&fx, &hx)
    }

    pub fn grad_sq(&self, f: &[f64]) -> Vec<f64> {
        let fx = self.grid.d1().matvec(f);
        self.grad_dot_x(&fx, &fx)
    }

    pub fn gradient_metric(&self) -> &[f64] {
        &self.gradient_metric
    }

    pub fn laplacian_op(&self) -> &RadialOp {
        &self.laplacian
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.laplacian.apply(&self.grid, f)
    }

    pub fn laplacian_matrix(&self) -> Matrix {
        self.laplacian.to_matrix(&self.grid)
    }

    /// Hessian endomorphism of a radial function, block by block:
    /// `D^2 f - dw (x) df - df (x) dw + <grad w, grad f> g_model`, raised by `g`.
    pub fn hessian_ops(&self) -> (RadialOp, Vec<RadialOp>) {
        let grid = &*self.grid;
        let inv_scale2: Vec<f64> = self.log_scale.iter().map(|w| exp(-2.0 * w)).collect();
        let model_grad = grid.gradient_metric();
        let cross: Vec<f64> = (0..grid.len()).map(|i| model_grad[i] * self.log_scale_x[i]).collect();
        let mut radial = grid.radial_hessian_op();
        for i in 0..grid.len() {
            radial.first[i] -= cross[i];
        }
        let blocks = grid
            .blocks()
            .iter()
            .map(|b| {
                let mut op = grid.block_hessian_op(b);
                for i in 0..grid.len() {
                    op.first[i] += cross[i];
                }
                op.scaled_by(&inv_scale2)
            })
            .collect();
        (radial.scaled_by(&inv_scale2), blocks)
    }

    pub fn hessian(&self, f: &[f64]) -> HessianComponents {
        let fx = self.grid.d1().matvec(f);
        let fxx = self.grid.d2().matvec(f);
        self.hessian_with(&fx, &fxx)
    }

    pub fn hessian_with(&self, fx: &[f64], fxx: &[f64]) -> HessianComponents {
        let (radial, blocks) = self.hessian_ops();
        HessianComponents {
            radial: radial.apply_with(fx, fxx),
            blocks: blocks.iter().map(|b| b.apply_with(fx, fxx)).collect(),
        }
    }

    /// `P f = Delta^2 f + div((4 a_rad - (n-2) J) grad f) + ((n-4)/2) Q f`.
    pub fn apply_paneitz(&self, f: &[f64]) -> Vec<f64> {
        let n = self.dimension() as f64;
        let fx = self.grid.d1().matvec(f);
        let fxx = self.grid.d2().matvec(f);
        let lap = self.laplacian.apply_with(&fx, &fxx);
        let lap2 = self.laplacian(&lap);
        (0..f.len())
            .map(|i| {
                let c = 4.0 * self.fields.a_radial[i] - (n - 2.0) * self.fields.j[i];
                lap2[i] + c * lap[i] + self.paneitz_drift[i] * fx[i] + 0.5 * (n - 4.0) * self.fields.q[i] * f[i]
            })
            .collect()
    }

    pub fn paneitz_matrix(&self) -> Matrix {
        let n = self.dimension() as f64;
        let lap = self.laplacian_matrix();
        let coeff: Vec<f64> =
            self.fields.a_radial.iter().zip(&self.fields.j).map(|(a, j)| 4.0 * a - (n - 2.0) * j).collect();
        let mut p = lap.matmul(&lap);
        p.add_scaled(1.0, &lap.scale_rows(&coeff));
        p.add_scaled(1.0, &self.grid.d1().scale_rows(&self.paneitz_drift));
        let zeroth: Vec<f64> = self.fields.q.iter().map(|q| 0.5 * (n - 4.0) * q).collect();
        p.add_diagonal(&zeroth);
        p
    }

    /// `L f = -(4(n-1)/(n-2)) Delta f + R f`.
    pub fn apply_conformal_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let a = self.conformal_laplacian_coefficient();
        let lap = self.laplacian(f);
        (0..f.len()).map(|i| -a * lap[i] + self.fields.r[i] * f[i]).collect()
    }

    pub fn conformal_laplacian_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), self.len());
        m.add_scaled(-self.conformal_laplacian_coefficient(), &self.laplacian_matrix());
        m.add_diagonal(&self.fields.r);
        m
    }

    pub fn conformal_laplacian_coefficient(&self) -> f64 {
        let n = self.dimension() as f64;
        4.0 * (n - 1.0) / (n - 2.0)
    }
}
