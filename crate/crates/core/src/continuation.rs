//! The continuity path `lambda: lambda0 -> 0` for
//! `Q~ - lambda sigma2(A~) = chi u^(-(n+4)/(n-4))`, solved by Newton's
//! method through the linearized operator, with per-state diagnostics.

use alloc::format;
use alloc::vec::Vec;

use crate::conformal::{check_positive, margin_from_jet, total_q_residual_of, ConformalFactor, FactorJet};
use crate::error::{Error, Result};
use crate::invariants::StarterMetric;
use crate::linalg::{max_abs, max_value, min_value, symmetric_eigen, Lu};
use crate::math::powf;
use crate::metric::{CurvatureFields, Metric};
use crate::paneitz::{OperatorKind, OperatorMatrix};

/// Refuses dimensions where the linearization is not known to be positive.
pub fn require_dimension(n: usize) -> Result<()> {
    if n >= 6 {
        return Ok(());
    }
    let detail = if n == 5 {
        "in the Bochner form of the linearized quadratic form the coefficient of int J |grad phi|^2 is \
         (4 - lambda + (n-2)(n-2-lambda))/(n-2) = (13 - 4 lambda)/3 for n = 5, negative when lambda is close to 4, \
         so positivity of the linearization (and the openness step) is not available"
            .into()
    } else {
        format!("continuation needs n >= 6, got n = {n}")
    };
    Err(Error::DimensionObstruction { n, detail })
}

/// Exponents of the monitored field `v` and of the integral identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticExponents {
    pub q: f64,
    pub alpha: f64,
}

/// Open window for `q + 1`: `(4(n-1)/(n(n-4)), (n-2)/(n-4))`, intersected with `q >= 0`.
pub fn q_window(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let lo = 4.0 * (nf - 1.0) / (nf * (nf - 4.0)) - 1.0;
    let hi = (nf - 2.0) / (nf - 4.0) - 1.0;
    (lo.max(0.0), hi)
}

impl DiagnosticExponents {
    /// Midpoint of the `q` window rounded down to one decimal (0.8 for
    /// n = 6), and `alpha = 2`.
    pub fn defaults(n: usize) -> Self {
        let (lo, hi) = q_window(n);
        let mid = 0.5 * (lo + hi);
        let rounded = crate::math::floor(10.0 * mid) / 10.0;
        let q = if rounded > lo { rounded } else { mid };
        Self { q, alpha: 2.0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let (lo, hi) = q_window(n);
        let lo_open = 4.0 * (n as f64 - 1.0) / (n as f64 * (n as f64 - 4.0)) - 1.0;
        if !(self.q > lo_open && self.q >= lo && self.q < hi) {
            return Err(Error::InvalidInput(format!("q = {} outside the window ({lo}, {hi})", self.q)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidInput("alpha must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    /// `||u||_{L^(2n/(n-4))}`.
    pub u_critical_norm: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// `u^(-q-1) (-Delta u + ((n-4)/2) J u)`.
    pub v_field: Vec<f64>,
    pub v_sup: f64,
    /// `min(v - (2/(n-4)) u^(-q-2) |grad u|^2)`.
    pub v_lower_margin: f64,
    /// Minimum of the scalar positivity margin.
    pub min_j_margin: f64,
    pub min_q: f64,
    pub min_r: f64,
    /// `min(Q~ - lambda sigma2~)`.
    pub min_q_minus_lambda_sigma2: f64,
    pub identity_34_residual: f64,
    pub identity_37_residual: f64,
    pub total_q_residual: f64,
    pub h_min_eig: f64,
    pub hypothesis_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationState {
    pub lambda: f64,
    pub u: ConformalFactor,
    pub chi: Vec<f64>,
    /// RMS over `dmu` of the strong residual.
    pub residual_norm: f64,
    /// Convergence threshold that was applied.
    pub tolerance: f64,
    pub newton_iterations: usize,
    /// Residual norms from the initial guess to the accepted iterate.
    pub residual_history: Vec<f64>,
    pub fields: CurvatureFields,
    pub diagnostics: DiagnosticsRecord,
}

fn check_inputs(bg: &Metric, u: &[f64], chi: &[f64]) -> Result<()> {
    if u.len() != bg.len() || chi.len() != bg.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} node values, got u: {}, chi: {}",
            bg.len(),
            u.len(),
            chi.len()
        )));
    }
    check_positive(u)
}

/// `P u - lambda u B[u] - ((n-4)/2) chi`, with the bracket `B` assembled term
/// by term from the derivatives of `u` in the background.
pub fn strong_residual(bg: &Metric, u: &[f64], lambda: f64, chi: &[f64]) -> Result<Vec<f64>> {
    check_inputs(bg, u, chi)?;
    Ok(strong_residual_unchecked(bg, &FactorJet::new(bg, u), lambda, chi))
}

fn strong_residual_unchecked(bg: &Metric, jet: &FactorJet, lambda: f64, chi: &[f64]) -> Vec<f64> {
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let f = bg.fields();
    let pu = bg.apply_paneitz(&jet.u);
    let hess_sq = jet.hessian_norm_sq(bg);
    let ah = jet.schouten_hessian(bg);
    (0..jet.u.len())
        .map(|i| {
            let u = jet.u[i];
            let lap = jet.laplacian[i];
            let g = jet.grad_sq[i];
            let hug = jet.hessian.radial[i] * g;
            let ag = f.a_radial[i] * g;
            let b = 0.5 * k * f.sigma2[i] + lap * lap / (k * u * u) - hess_sq[i] / (k * u * u)
                + 2.0 / (k * k) * g * lap / (u * u * u)
                + 2.0 * (n - 2.0) / (k * k) * hug / (u * u * u)
                - f.j[i] * lap / u
                + ah[i] / u
                - (n - 1.0) / (k * k) * g * g / (u * u * u * u)
                - f.j[i] * g / (k * u * u)
                - (n - 2.0) / k * ag / (u * u);
            pu[i] - lambda * u * b - 0.5 * k * chi[i]
        })
        .collect()
}

/// `((n-4)/2) u^((n+4)/(n-4)) (Q~ - lambda sigma2~ - chi u^(-(n+4)/(n-4)))` from
/// the conformal metric's curvature fields.
pub fn geometric_residual(bg: &Metric, u: &ConformalFactor, lambda: f64, chi: &[f64]) -> Result<Vec<f64>> {
    check_inputs(bg, u.values(), chi)?;
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let g = bg.conformal(u)?;
    let f = g.fields();
    Ok((0..chi.len())
        .map(|i| {
            let e = powf(u.values()[i], (n + 4.0) / k);
            0.5 * k * (e * (f.q[i] - lambda * f.sigma2[i]) - chi[i])
        })
        .collect())
}

/// `chi u^(-(n+4)/(n-4))`.
fn chi_term(n: f64, u: &[f64], chi: &[f64]) -> Vec<f64> {
    u.iter().zip(chi).map(|(&u, c)| c * powf(u, -(n + 4.0) / (n - 4.0))).collect()
}

/// Linearization in the conformal metric `g~ = u^(4/(n-4)) bg`:
/// `P~ - ((n+4)/2) Q~ + lambda (J~ Delta~ - <A~, D~^2> + 4 sigma2~) + ((n+4)/2) chi u^(-(n+4)/(n-4))`.
pub fn assemble_h(bg: &Metric, u: &ConformalFactor, lambda: f64, chi: &[f64]) -> Result<OperatorMatrix> {
    require_dimension(bg.dimension())?;
    check_inputs(bg, u.values(), chi)?;
    let g = bg.conformal(u)?;
    Ok(assemble_h_in(&g, u.values(), lambda, chi))
}

fn assemble_h_in(g: &Metric, u: &[f64], lambda: f64, chi: &[f64]) -> OperatorMatrix {
    let n = g.dimension() as f64;
    let f = g.fields();
    let grid = g.grid();
    let mut h = g.paneitz_matrix();
    let x = chi_term(n, u, chi);
    let zeroth: Vec<f64> =
        (0..u.len()).map(|i| -0.5 * (n + 4.0) * f.q[i] + 4.0 * lambda * f.sigma2[i] + 0.5 * (n + 4.0) * x[i]).collect();
    h.add_diagonal(&zeroth);
    if lambda != 0.0 {
        // J~ Delta~ - <A~, D~^2> = (J~ - a_r) D_rr + sum_b m_b (J~ - a_b) D_bb.
        let (radial, blocks) = g.hessian_ops();
        let mut newton = radial.scaled_by(&f.j.iter().zip(&f.a_radial).map(|(j, a)| j - a).collect::<Vec<_>>());
        for ((b, op), a) in grid.blocks().iter().zip(&blocks).zip(&f.a_blocks) {
            let c: Vec<f64> = f.j.iter().zip(a).map(|(j, a)| b.multiplicity as f64 * (j - a)).collect();
            newton.add_scaled(1.0, &op.scaled_by(&c));
        }
        h.add_scaled(lambda, &newton.to_matrix(grid));
    }
    let c1: Vec<f64> = (0..u.len()).map(|i| (n - 2.0 - lambda) * f.j[i] - (4.0 - lambda) * f.a_radial[i]).collect();
    let c0: Vec<f64> = (0..u.len()).map(|i| -4.0 * (f.q[i] - lambda * f.sigma2[i]) + 0.5 * (n + 4.0) * x[i]).collect();
    OperatorMatrix {
        entries: h,
        form: crate::paneitz::form_matrix(g, true, &c1, &c0),
        weights: g.weights().to_vec(),
        weighted_symmetric: true,
        metric_tag: g.tag(),
        kind: OperatorKind::Linearization,
    }
}

/// Three evaluations of `<H~ phi, phi>` in the conformal metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticForms {
    /// From the assembled operator.
    pub operator: f64,
    /// `int (Delta phi)^2 + (n-2-lambda) J |grad phi|^2 - (4-lambda) A(grad phi, grad phi) + c0 phi^2`.
    pub expanded: f64,
    /// The same after the Bochner formula.
    pub bochner: f64,
    /// Coefficients of `int (Delta phi)^2`, `int |D^2 phi|^2`, `int J |grad phi|^2`
    /// and of the zeroth-order term at solutions.
    pub coefficients: [f64; 4],
}

impl QuadraticForms {
    /// Largest pairwise relative disagreement.
    pub fn max_disagreement(&self) -> f64 {
        let v = [self.operator, self.expanded, self.bochner];
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut d = 0.0f64;
        for i in 0..3 {
            for j in i + 1..3 {
                d = d.max((v[i] - v[j]).abs());
            }
        }
        d / scale
    }
}

/// `((n-6+lambda)/(n-2), (4-lambda)/(n-2), (4-lambda+(n-2)(n-2-lambda))/(n-2), (n-4)/2)`.
pub fn bochner_coefficients(n: usize, lambda: f64) -> [f64; 4] {
    let n = n as f64;
    [
        (n - 6.0 + lambda) / (n - 2.0),
        (4.0 - lambda) / (n - 2.0),
        (4.0 - lambda + (n - 2.0) * (n - 2.0 - lambda)) / (n - 2.0),
        0.5 * (n - 4.0),
    ]
}

/// The zeroth-order coefficient of the expanded form is
/// `-4 (Q~ - lambda sigma2~) + ((n+4)/2) chi u^(-(n+4)/(n-4))`, which equals
/// `((n-4)/2)(Q~ - lambda sigma2~)` at solutions.
pub fn quadratic_forms(
    bg: &Metric,
    u: &ConformalFactor,
    lambda: f64,
    chi: &[f64],
    phi: &[f64],
) -> Result<QuadraticForms> {
    require_dimension(bg.dimension())?;
    check_inputs(bg, u.values(), chi)?;
    if phi.len() != bg.len() {
        return Err(Error::InvalidInput("test function has the wrong length".into()));
    }
    let g = bg.conformal(u)?;
    let h = assemble_h_in(&g, u.values(), lambda, chi);
    let n = g.dimension() as f64;
    let f = g.fields();
    let x = chi_term(n, u.values(), chi);
    let c0: Vec<f64> =
        (0..phi.len()).map(|i| -4.0 * (f.q[i] - lambda * f.sigma2[i]) + 0.5 * (n + 4.0) * x[i]).collect();
    let zeroth = g.integrate(&(0..phi.len()).map(|i| c0[i] * phi[i] * phi[i]).collect::<Vec<_>>());

    let jet = FactorJet::new(&g, phi);
    let lap_sq = g.integrate(&jet.laplacian.iter().map(|l| l * l).collect::<Vec<_>>());
    let hess_sq = g.integrate(&jet.hessian_norm_sq(&g));
    let jg = g.integrate(&f.j.iter().zip(&jet.grad_sq).map(|(a, b)| a * b).collect::<Vec<_>>());
    let ag = g.integrate(&jet.schouten_gradient(&g));

    let expanded = lap_sq + (n - 2.0 - lambda) * jg - (4.0 - lambda) * ag + zeroth;
    let c = bochner_coefficients(g.dimension(), lambda);
    let bochner = c[0] * lap_sq + c[1] * hess_sq + c[2] * jg + zeroth;
    Ok(QuadraticForms { operator: h.quadratic_form(phi), expanded, bochner, coefficients: c })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPositivity {
    pub min_eig: f64,
    /// `min(Q~ - lambda sigma2~) > 0`, `min J~ > 0`, `0 <= lambda <= 4`, `n >= 6`.
    pub hypothesis_ok: bool,
}

pub fn h_positivity_check(h: &OperatorMatrix, g: &Metric, lambda: f64) -> Result<HPositivity> {
    require_dimension(g.dimension())?;
    let f = g.fields();
    let qs: Vec<f64> = f.q.iter().zip(&f.sigma2).map(|(q, s)| q - lambda * s).collect();
    let hypothesis_ok = min_value(&qs) > 0.0 && min_value(&f.j) > 0.0 && (0.0..=4.0).contains(&lambda);
    let eig = symmetric_eigen(&h.symmetrized(), false)?;
    Ok(HPositivity { min_eig: eig.values[0], hypothesis_ok })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Overrides the default `1e-9 (1 + ||chi||_inf)`.
    pub tolerance: Option<f64>,
    pub max_halvings: usize,
    pub exponents: Option<DiagnosticExponents>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 20, tolerance: None, max_halvings: 10, exponents: None }
    }
}

/// `max(tol, eps RMS(|P| |u|))`: the requested tolerance, floored at the
/// roundoff level of evaluating `P u`.
fn effective_tolerance(bg: &Metric, pabs: &crate::linalg::Matrix, u: &[f64], tol: f64) -> f64 {
    let floor = f64::EPSILON * bg.rms(&pabs.abs_matvec(u));
    tol.max(floor)
}

fn default_tolerance(chi: &[f64]) -> f64 {
    1e-9 * (1.0 + max_abs(chi))
}

struct Trial {
    u: Vec<f64>,
    jet: FactorJet,
    residual: Vec<f64>,
    norm: f64,
}

fn evaluate(bg: &Metric, u: Vec<f64>, lambda: f64, chi: &[f64]) -> Trial {
    let jet = FactorJet::new(bg, &u);
    let residual = strong_residual_unchecked(bg, &jet, lambda, chi);
    let norm = bg.rms(&residual);
    Trial { u, jet, residual, norm }
}

/// Smallest `|eigenvalue|` of the symmetrized linearization must exceed
/// `1e-8 max(1, ||Q~||_inf, ((n+4)/2) ||chi u^-(n+4)/(n-4)||_inf)`.
fn check_nonsingular(h: &OperatorMatrix, g: &Metric, u: &[f64], chi: &[f64]) -> Result<f64> {
    let n = g.dimension() as f64;
    let x = chi_term(n, u, chi);
    let scale = 1.0f64.max(max_abs(&g.fields().q)).max(0.5 * (n + 4.0) * max_abs(&x));
    let eig = symmetric_eigen(&h.symmetrized(), false)?;
    let smallest = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(smallest > 1e-8 * scale) {
        return Err(Error::Singular);
    }
    Ok(eig.values[0])
}

/// Newton iteration on the strong form at fixed `lambda`: solve
/// `(2/(n-4)) H~ psi = -N[u]` and update `u <- u + t u psi`, halving `t`
/// until the factor stays positive with positive scalar curvature and the
/// residual decreases.
pub fn newton_correct(
    bg: &Metric,
    lambda: f64,
    u: &[f64],
    chi: &[f64],
    opts: &NewtonOptions,
) -> Result<ContinuationState> {
    require_dimension(bg.dimension())?;
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    if u.len() != bg.len() || chi.len() != bg.len() {
        return Err(Error::InvalidInput(format!("expected {} node values", bg.len())));
    }
    let exps = opts.exponents.unwrap_or_else(|| DiagnosticExponents::defaults(bg.dimension()));
    exps.validate(bg.dimension())?;
    let mut cur = evaluate(bg, u.to_vec(), lambda, chi);
    let initial_margin = min_value(&margin_from_jet(bg, &cur.jet));
    if !(min_value(u) > 0.0) || !(initial_margin > 0.0) {
        return Err(Error::PositivityLost { u_min: min_value(u), margin_min: initial_margin });
    }
    let mut pabs = bg.paneitz_matrix();
    pabs.as_mut_slice().iter_mut().for_each(|v| *v = v.abs());
    let requested = opts.tolerance.unwrap_or_else(|| default_tolerance(chi));
    let mut history = alloc::vec![cur.norm];
    let mut iterations = 0;
    let mut checked = false;
    loop {
        let tol = effective_tolerance(bg, &pabs, &cur.u, requested);
        if cur.norm <= tol {
            return finish(bg, lambda, cur, chi, tol, iterations, history, exps);
        }
        if iterations == opts.max_iterations {
            return Err(Error::NonConvergence { iterations, residual: cur.norm });
        }
        iterations += 1;
        let factor = ConformalFactor::fourth_order(cur.u.clone())?;
        let g = bg.conformal(&factor)?;
        let h = assemble_h_in(&g, &cur.u, lambda, chi);
        if !checked {
            check_nonsingular(&h, &g, &cur.u, chi)?;
            checked = true;
        }
        // N[u] = (2/k) u^(-(n+4)/k) F.
        let rhs: Vec<f64> = cur.residual.iter().zip(&cur.u).map(|(r, &u)| -powf(u, -(n + 4.0) / k) * r).collect();
        let psi = Lu::factor(&h.entries)?.solve(&rhs);
        let delta: Vec<f64> = psi.iter().zip(&cur.u).map(|(p, u)| p * u).collect();
        let mut t = 1.0;
        let mut accepted = None;
        let mut last_positivity = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = cur.u.iter().zip(&delta).map(|(u, d)| u + t * d).collect();
            let u_min = min_value(&cand);
            if u_min > 0.0 {
                let trial = evaluate(bg, cand, lambda, chi);
                let margin = min_value(&margin_from_jet(bg, &trial.jet));
                if margin > 0.0 {
                    if trial.norm < cur.norm {
                        accepted = Some(trial);
                        break;
                    }
                    last_positivity = None;
                } else {
                    last_positivity = Some((u_min, margin));
                }
            } else {
                last_positivity = Some((u_min, f64::NAN));
            }
            t *= 0.5;
        }
        match accepted {
            Some(trial) => {
                history.push(trial.norm);
                cur = trial;
            }
            None => {
                return Err(match last_positivity {
                    Some((u_min, margin_min)) => Error::PositivityLost { u_min, margin_min },
                    None => Error::NonConvergence { iterations, residual: cur.norm },
                });
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    bg: &Metric,
    lambda: f64,
    cur: Trial,
    chi: &[f64],
    tolerance: f64,
    newton_iterations: usize,
    residual_history: Vec<f64>,
    exps: DiagnosticExponents,
) -> Result<ContinuationState> {
    let u = ConformalFactor::fourth_order(cur.u)?;
    let g = bg.conformal(&u)?;
    let diagnostics = diagnostics_in(bg, &g, &u, lambda, chi, exps)?;
    Ok(ContinuationState {
        lambda,
        u,
        chi: chi.to_vec(),
        residual_norm: cur.norm,
        tolerance,
        newton_iterations,
        residual_history,
        fields: g.fields().clone(),
        diagnostics,
    })
}

/// Recomputes the diagnostics of a state with other exponents.
pub fn diagnostics(bg: &Metric, state: &ContinuationState, exps: DiagnosticExponents) -> Result<DiagnosticsRecord> {
    require_dimension(bg.dimension())?;
    exps.validate(bg.dimension())?;
    let g = bg.conformal(&state.u)?;
    diagnostics_in(bg, &g, &state.u, state.lambda, &state.chi, exps)
}

fn diagnostics_in(
    bg: &Metric,
    g: &Metric,
    u: &ConformalFactor,
    lambda: f64,
    chi: &[f64],
    exps: DiagnosticExponents,
) -> Result<DiagnosticsRecord> {
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let uv = u.values();
    let jet = FactorJet::new(bg, uv);
    let fb = bg.fields();
    let q = exps.q;
    let v_field: Vec<f64> =
        (0..uv.len()).map(|i| powf(uv[i], -q - 1.0) * (-jet.laplacian[i] + 0.5 * k * fb.j[i] * uv[i])).collect();
    let v_lower: Vec<f64> =
        (0..uv.len()).map(|i| v_field[i] - 2.0 / k * powf(uv[i], -q - 2.0) * jet.grad_sq[i]).collect();
    let margin = margin_from_jet(bg, &jet);

    let f = g.fields();
    let qs: Vec<f64> = f.q.iter().zip(&f.sigma2).map(|(q, s)| q - lambda * s).collect();

    // (1 - lambda/4) int Q~ + ((n-4)/8) lambda int J~^2 = int chi u.
    let int_q = g.integrate(&f.q);
    let int_j2 = g.integrate(&f.j.iter().map(|j| j * j).collect::<Vec<_>>());
    let int_chi_u = bg.integrate(&chi.iter().zip(uv).map(|(c, u)| c * u).collect::<Vec<_>>());
    let identity_34_residual =
        ((1.0 - 0.25 * lambda) * int_q + 0.125 * k * lambda * int_j2 - int_chi_u).abs() / (1.0 + int_chi_u.abs());

    let identity_37_residual = identity_37(bg, &jet, lambda, chi, exps.alpha);

    let h = assemble_h_in(g, uv, lambda, chi);
    let pos = h_positivity_check(&h, g, lambda)?;
    Ok(DiagnosticsRecord {
        u_critical_norm: bg.lp_norm(uv, 2.0 * n / k),
        u_min: min_value(uv),
        u_max: max_value(uv),
        v_sup: max_abs(&v_field),
        v_field,
        v_lower_margin: min_value(&v_lower),
        min_j_margin: min_value(&margin),
        min_q: min_value(&f.q),
        min_r: min_value(&f.r),
        min_q_minus_lambda_sigma2: min_value(&qs),
        identity_34_residual,
        identity_37_residual,
        total_q_residual: total_q_residual_of(g),
        h_min_eig: pos.min_eig,
        hypothesis_ok: pos.hypothesis_ok,
    })
}

/// The strong form tested against `u^alpha` and integrated by parts, as a
/// normalized mismatch `|lhs - rhs| / (1 + |lhs|)`.
fn identity_37(bg: &Metric, jet: &FactorJet, lambda: f64, chi: &[f64], alpha: f64) -> f64 {
    let n = bg.dimension() as f64;
    let k = n - 4.0;
    let f = bg.fields();
    let u = &jet.u;
    let int = |h: &dyn Fn(usize) -> f64| bg.integrate(&(0..u.len()).map(h).collect::<Vec<_>>());
    let lhs = 0.5 * k * int(&|i| chi[i] * powf(u[i], alpha));
    let lap = &jet.laplacian;
    let g = &jet.grad_sq;
    let ag = jet.schouten_gradient(bg);
    let rhs = alpha * int(&|i| powf(u[i], alpha - 1.0) * lap[i] * lap[i])
        + (alpha * (alpha - 1.0) + (3.0 * alpha - 1.0) / (2.0 * k) * lambda)
            * int(&|i| powf(u[i], alpha - 2.0) * g[i] * lap[i])
        + (k * alpha * alpha - (n - 8.0) * alpha - 2.0) / (2.0 * k * k)
            * lambda
            * int(&|i| powf(u[i], alpha - 3.0) * g[i] * g[i])
        + (n - 2.0 - lambda) * alpha * int(&|i| f.j[i] * powf(u[i], alpha - 1.0) * g[i])
        - (4.0 - lambda) * alpha * int(&|i| powf(u[i], alpha - 1.0) * ag[i])
        + 0.5 * k * int(&|i| (f.q[i] - lambda * f.sigma2[i]) * powf(u[i], alpha + 1.0));
    (lhs - rhs).abs() / (1.0 + lhs.abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathConfig {
    /// First step as a fraction of `lambda0`.
    pub initial_step_fraction: f64,
    pub min_step: f64,
    /// Consecutive successes before the step doubles.
    pub growth_after: usize,
    pub max_steps: usize,
    pub newton: NewtonOptions,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            initial_step_fraction: 0.05,
            min_step: 1e-4,
            growth_after: 3,
            max_steps: 10_000,
            newton: NewtonOptions::default(),
        }
    }
}

/// A path that stopped early, with every state accepted before the failure.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFailure {
    pub error: Error,
    pub states: Vec<ContinuationState>,
}

impl core::fmt::Display for PathFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} after {} accepted states", self.error, self.states.len())
    }
}

impl core::error::Error for PathFailure {}

/// Linear extrapolation from the last two accepted states, or the last state
/// alone when that would not stay positive.
fn predict(states: &[ContinuationState], lambda: f64) -> Vec<f64> {
    let last = &states[states.len() - 1];
    if states.len() >= 2 {
        let prev = &states[states.len() - 2];
        let dl = last.lambda - prev.lambda;
        if dl != 0.0 {
            let s = (lambda - last.lambda) / dl;
            let guess: Vec<f64> = last.u.values().iter().zip(prev.u.values()).map(|(a, b)| a + s * (a - b)).collect();
            if min_value(&guess) > 0.0 {
                return guess;
            }
        }
    }
    last.u.values().to_vec()
}

fn accept(state: &ContinuationState) -> Result<()> {
    let d = &state.diagnostics;
    if d.hypothesis_ok && !(d.h_min_eig > 0.0) {
        return Err(Error::Precondition {
            what: format!(
                "linearization positive definite at lambda = {:.6e} under the curvature hypotheses",
                state.lambda
            ),
            value: d.h_min_eig,
        });
    }
    Ok(())
}

/// Steps `lambda` from `lambda0` down to exactly 0.
pub fn run_path(
    bg: &Metric,
    starter: &StarterMetric,
    config: &PathConfig,
) -> core::result::Result<Vec<ContinuationState>, PathFailure> {
    let fail = |error: Error, states: Vec<ContinuationState>| PathFailure { error, states };
    if let Err(e) = require_dimension(bg.dimension()) {
        return Err(fail(e, Vec::new()));
    }
    let lambda0 = starter.lambda0;
    if !(lambda0 > 0.0 && lambda0 < 4.0) {
        return Err(fail(Error::InvalidInput(format!("lambda0 = {lambda0} outside (0, 4)")), Vec::new()));
    }
    let first = newton_correct(bg, lambda0, starter.u0.values(), &starter.chi, &config.newton)
        .and_then(|s| accept(&s).map(|_| s));
    let mut states = match first {
        Ok(s) => alloc::vec![s],
        Err(e) => return Err(fail(e, Vec::new())),
    };
    let mut step = config.initial_step_fraction * lambda0;
    let mut streak = 0;
    for _ in 0..config.max_steps {
        let current = states[states.len() - 1].lambda;
        if current == 0.0 {
            return Ok(states);
        }
        let target = (current - step).max(0.0);
        let guess = predict(&states, target);
        let result =
            newton_correct(bg, target, &guess, &starter.chi, &config.newton).and_then(|s| accept(&s).map(|_| s));
        match result {
            Ok(s) => {
                states.push(s);
                streak += 1;
                if streak >= config.growth_after {
                    step *= 2.0;
                    streak = 0;
                }
            }
            Err(e @ Error::Precondition { .. }) => return Err(fail(e, states)),
            Err(_) => {
                streak = 0;
                step *= 0.5;
                if step < config.min_step {
                    return Err(fail(Error::PathStuck { lambda: current, step }, states));
                }
            }
        }
    }
    let lambda = states[states.len() - 1].lambda;
    Err(fail(Error::PathStuck { lambda, step }, states))
}

/// Sup-norm boundedness along a sweep: the max over all states against the
/// max over the first half.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundednessReport {
    pub critical_norm_ratio: f64,
    pub inverse_min_ratio: f64,
    pub v_sup_ratio: f64,
    /// Every ratio is at most 2.
    pub bounded: bool,
}

pub fn boundedness_proxy(states: &[ContinuationState]) -> Result<BoundednessReport> {
    if states.len() < 2 {
        return Err(Error::InvalidInput("boundedness needs at least two states".into()));
    }
    let half = states.len().div_ceil(2);
    let ratio = |f: &dyn Fn(&ContinuationState) -> f64| {
        let all = states.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let first = states[..half].iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        all / first
    };
    let critical_norm_ratio = ratio(&|s| s.diagnostics.u_critical_norm);
    let inverse_min_ratio = ratio(&|s| 1.0 / s.diagnostics.u_min);
    let v_sup_ratio = ratio(&|s| s.diagnostics.v_sup);
    let bounded = [critical_norm_ratio, inverse_min_ratio, v_sup_ratio].iter().all(|r| *r <= 2.0);
    Ok(BoundednessReport { critical_norm_ratio, inverse_min_ratio, v_sup_ratio, bounded })
}

/// RMS over `dmu` of the strong residual.
pub fn residual_norm(bg: &Metric, u: &[f64], lambda: f64, chi: &[f64]) -> Result<f64> {
    let r = strong_residual(bg, u, lambda, chi)?;
    Ok(bg.rms(&r))
}
