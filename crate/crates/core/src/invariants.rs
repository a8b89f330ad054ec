//! Yamabe-type invariants `Y`, `Y4`, `Y4+`, `Y4*` by preconditioned descent,
//! and the starting metric of the continuation from the subcritical
//! equation `L u = u^p`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::conformal::{convert_exponent, q_conformal, ConformalFactor, ExponentConvention};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, min_value, Lu, Matrix};
use crate::math::{exp, ln, powf};
use crate::metric::Metric;

#[derive(Clone, Debug, PartialEq)]
pub struct QuotientReport {
    pub value: f64,
    pub minimizer: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Only meaningful for `Y4*`: the minimizer sits against the barrier.
    pub constraint_active: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarterMetric {
    pub u0: ConformalFactor,
    /// Exponent of the subcritical solve, when the starter came from one.
    pub p_used: Option<f64>,
    pub chi: Vec<f64>,
    pub lambda0: f64,
    /// `(min J~, min(Q~ - lambda0 sigma2~))`.
    pub margins: (f64, f64),
}

/// Options of the descent loop shared by every quotient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentOptions {
    pub max_iterations: usize,
    /// Stop once a step decreases the objective by less than `rel_decrease * max(1, |F|)`.
    pub rel_decrease: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, rel_decrease: 1e-10 }
    }
}

/// Margin floor of the `Y4*` barrier.
pub const BARRIER_FLOOR: f64 = 1e-6;

fn critical_exponent(n: usize, order: usize) -> f64 {
    let n = n as f64;
    2.0 * n / (n - 2.0 * order as f64)
}

fn reject_zero(u: &[f64]) -> Result<()> {
    if u.is_empty() || max_abs(u) == 0.0 || u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("quotient of the zero (or non-finite) function".into()));
    }
    Ok(())
}

fn check_len(bg: &Metric, u: &[f64]) -> Result<()> {
    if u.len() != bg.len() {
        return Err(Error::InvalidInput(format!("expected {} node values, got {}", bg.len(), u.len())));
    }
    Ok(())
}

/// `int (4(n-1)/(n-2) |grad u|^2 + R u^2) dmu / ||u||^2_{2n/(n-2)}`.
pub fn yamabe_quotient(bg: &Metric, u: &[f64]) -> Result<f64> {
    check_len(bg, u)?;
    reject_zero(u)?;
    let a = bg.conformal_laplacian_coefficient();
    let g = bg.grad_sq(u);
    let r = &bg.fields().r;
    let integrand: Vec<f64> = (0..u.len()).map(|i| a * g[i] + r[i] * u[i] * u[i]).collect();
    let norm = bg.lp_norm(u, critical_exponent(bg.dimension(), 1));
    Ok(bg.integrate(&integrand) / (norm * norm))
}

/// `E(u) / ||u||^2_{2n/(n-4)}` with the expanded Paneitz energy.
pub fn y4_quotient(bg: &Metric, u: &[f64]) -> Result<f64> {
    check_len(bg, u)?;
    reject_zero(u)?;
    let norm = bg.lp_norm(u, critical_exponent(bg.dimension(), 2));
    Ok(crate::paneitz::paneitz_energy(bg, u) / (norm * norm))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Param {
    /// `u = z`.
    Linear,
    /// `u = exp(z)`.
    Exponential,
}

/// Logarithmic barrier `-mu * mean ln(m(u / ||u||) - floor)` on the scalar
/// positivity margin.
struct Barrier<'a> {
    bg: &'a Metric,
    mu: f64,
    lap_t: Matrix,
    d1_t: Matrix,
}

impl<'a> Barrier<'a> {
    fn new(bg: &'a Metric, mu: f64) -> Self {
        Self { bg, mu, lap_t: bg.laplacian_matrix().transpose(), d1_t: bg.grid().d1().transpose() }
    }

    /// Value and gradient with respect to the normalized factor, or `None`
    /// outside the feasible set.
    fn eval(&self, v: &[f64]) -> Option<(f64, Vec<f64>)> {
        let bg = self.bg;
        let k = bg.dimension() as f64 - 4.0;
        let vx = bg.grid().d1().matvec(v);
        let lap = bg.laplacian(v);
        let gm = bg.gradient_metric();
        let j = &bg.fields().j;
        let len = v.len() as f64;
        let mut value = 0.0;
        let mut y = vec![0.0; v.len()];
        for i in 0..v.len() {
            let m = -lap[i] - 2.0 / k * gm[i] * vx[i] * vx[i] / v[i] + 0.5 * k * j[i] * v[i];
            let slack = m - BARRIER_FLOOR;
            if !(slack > 0.0) {
                return None;
            }
            value -= self.mu * ln(slack) / len;
            y[i] = -self.mu / (len * slack);
        }
        // Transpose of the margin's Jacobian applied to y.
        let mut grad: Vec<f64> = self.lap_t.matvec(&y).iter().map(|v| -v).collect();
        let first: Vec<f64> = (0..v.len()).map(|i| 2.0 * gm[i] * vx[i] / v[i] * y[i]).collect();
        let first_t = self.d1_t.matvec(&first);
        for i in 0..v.len() {
            grad[i] += -2.0 / k * (first_t[i] - gm[i] * vx[i] * vx[i] / (v[i] * v[i]) * y[i]) + 0.5 * k * j[i] * y[i];
        }
        Some((value, grad))
    }
}

struct Objective<'a> {
    energy: Matrix,
    weights: &'a [f64],
    exponent: f64,
    param: Param,
    barrier: Option<Barrier<'a>>,
}

struct Evaluation {
    total: f64,
    grad: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn factor(&self, z: &[f64]) -> Vec<f64> {
        match self.param {
            Param::Linear => z.to_vec(),
            Param::Exponential => z.iter().map(|&v| exp(v)).collect(),
        }
    }

    fn norm(&self, u: &[f64]) -> f64 {
        let s: f64 = self.weights.iter().zip(u).map(|(w, u)| w * powf(u.abs(), self.exponent)).sum();
        powf(s, 1.0 / self.exponent)
    }

    /// Quotient at `u` (scale invariant).
    fn quotient(&self, u: &[f64]) -> f64 {
        let su = self.energy.matvec(u);
        let e: f64 = su.iter().zip(u).map(|(a, b)| a * b).sum();
        let nrm = self.norm(u);
        e / (nrm * nrm)
    }

    fn eval(&self, z: &[f64]) -> Option<Evaluation> {
        let u = self.factor(z);
        let p = self.exponent;
        let nrm = self.norm(&u);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return None;
        }
        let su = self.energy.matvec(&u);
        let e: f64 = su.iter().zip(&u).map(|(a, b)| a * b).sum();
        let n2 = nrm * nrm;
        let f = e / n2;
        let dn2 = |i: usize| 2.0 * powf(nrm, 2.0 - p) * self.weights[i] * powf(u[i].abs(), p - 2.0) * u[i];
        let mut grad: Vec<f64> = (0..u.len()).map(|i| (2.0 * su[i] - f * dn2(i)) / n2).collect();
        let mut total = f;
        if let Some(b) = &self.barrier {
            let v: Vec<f64> = u.iter().map(|x| x / nrm).collect();
            let (bv, bg) = b.eval(&v)?;
            total += bv;
            let gu: f64 = bg.iter().zip(&u).map(|(a, b)| a * b).sum();
            for i in 0..u.len() {
                grad[i] += bg[i] / nrm - gu * powf(nrm, -1.0 - p) * self.weights[i] * powf(u[i].abs(), p - 2.0) * u[i];
            }
        }
        if self.param == Param::Exponential {
            for (g, x) in grad.iter_mut().zip(&u) {
                *g *= x;
            }
        }
        if !total.is_finite() {
            return None;
        }
        Some(Evaluation { total, grad })
    }

    /// Rescales `z` so that the factor has unit critical norm.
    fn normalize(&self, z: &mut [f64]) {
        let nrm = self.norm(&self.factor(z));
        match self.param {
            Param::Linear => z.iter_mut().for_each(|v| *v /= nrm),
            Param::Exponential => {
                let s = ln(nrm);
                z.iter_mut().for_each(|v| *v -= s);
            }
        }
    }
}

/// `(I - Delta)^power` as an LU factorization.
fn preconditioner(bg: &Metric, power: usize) -> Result<Lu> {
    let mut base = bg.laplacian_matrix();
    base.scale(-1.0);
    base.add_diagonal(&vec![1.0; bg.len()]);
    let mut k = Matrix::identity(bg.len());
    for _ in 0..power {
        k = k.matmul(&base);
    }
    Lu::factor(&k)
}

struct DescentOutcome {
    z: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Preconditioned gradient descent with Armijo backtracking, renormalizing
/// after each accepted step.
fn descend(obj: &Objective, pre: &Lu, z0: Vec<f64>, opts: &DescentOptions) -> Result<DescentOutcome> {
    let mut z = z0;
    obj.normalize(&mut z);
    let mut cur = obj.eval(&z).ok_or_else(|| Error::Infeasible("descent started outside the feasible set".into()))?;
    let mut step = 1.0f64;
    for it in 1..=opts.max_iterations {
        let scaled: Vec<f64> = cur.grad.iter().zip(obj.weights).map(|(g, w)| g / w).collect();
        let mut dir: Vec<f64> = pre.solve(&scaled).iter().map(|v| -v).collect();
        let mut slope: f64 = cur.grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            dir = scaled.iter().map(|v| -v).collect();
            slope = cur.grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        }
        let scale = cur.total.abs().max(1.0);
        if -slope <= opts.rel_decrease * scale * 1e-3 {
            return Ok(DescentOutcome { z, iterations: it - 1, converged: true });
        }
        let mut t = (2.0 * step).min(1.0);
        let mut accepted = None;
        while t > 1e-14 {
            let trial: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            if let Some(e) = obj.eval(&trial) {
                if e.total <= cur.total + 1e-4 * t * slope {
                    accepted = Some((trial, e));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((mut trial, _)) = accepted else {
            // No decrease is representable: the predicted decrease is at roundoff.
            let converged = -slope <= 1e-8 * scale;
            return Ok(DescentOutcome { z, iterations: it, converged });
        };
        step = t;
        obj.normalize(&mut trial);
        let next = obj.eval(&trial).ok_or_else(|| Error::Infeasible("normalization left the feasible set".into()))?;
        let decrease = cur.total - next.total;
        z = trial;
        cur = next;
        if decrease < opts.rel_decrease * cur.total.abs().max(1.0) {
            return Ok(DescentOutcome { z, iterations: it, converged: true });
        }
    }
    Ok(DescentOutcome { z, iterations: opts.max_iterations, converged: false })
}

/// Constant plus a small first-mode perturbation.
fn default_start(bg: &Metric) -> Vec<f64> {
    bg.grid().x().iter().map(|x| 1.0 + 0.01 * x).collect()
}

pub fn minimize_yamabe(bg: &Metric, opts: &DescentOptions) -> Result<QuotientReport> {
    let obj = Objective {
        energy: crate::paneitz::conformal_laplacian_form(bg),
        weights: bg.weights(),
        exponent: critical_exponent(bg.dimension(), 1),
        param: Param::Linear,
        barrier: None,
    };
    let pre = preconditioner(bg, 1)?;
    let out = descend(&obj, &pre, default_start(bg), opts)?;
    let value = yamabe_quotient(bg, &out.z)?;
    Ok(QuotientReport {
        value,
        minimizer: out.z,
        iterations: out.iterations,
        converged: out.converged,
        constraint_active: false,
    })
}

fn y4_objective<'a>(bg: &'a Metric, param: Param) -> Objective<'a> {
    Objective {
        energy: crate::paneitz::paneitz_form(bg),
        weights: bg.weights(),
        exponent: critical_exponent(bg.dimension(), 2),
        param,
        barrier: None,
    }
}

/// Unconstrained in sign; starts from `start` or constants plus a low mode.
pub fn minimize_y4(bg: &Metric, start: Option<&[f64]>, opts: &DescentOptions) -> Result<QuotientReport> {
    let z0 = match start {
        Some(s) => {
            check_len(bg, s)?;
            reject_zero(s)?;
            s.to_vec()
        }
        None => default_start(bg),
    };
    let obj = y4_objective(bg, Param::Linear);
    let pre = preconditioner(bg, 2)?;
    let out = descend(&obj, &pre, z0, opts)?;
    let value = y4_quotient(bg, &out.z)?;
    Ok(QuotientReport {
        value,
        minimizer: out.z,
        iterations: out.iterations,
        converged: out.converged,
        constraint_active: false,
    })
}

fn log_start(bg: &Metric, start: Option<&[f64]>) -> Result<Vec<f64>> {
    match start {
        Some(s) => {
            check_len(bg, s)?;
            crate::conformal::check_positive(s)?;
            Ok(s.iter().map(|&v| ln(v)).collect())
        }
        None => Ok(default_start(bg).iter().map(|&v| ln(v)).collect()),
    }
}

/// Infimum over positive factors, parametrized as `u = exp(phi)`.
pub fn estimate_y4_plus(bg: &Metric, start: Option<&[f64]>, opts: &DescentOptions) -> Result<QuotientReport> {
    let obj = y4_objective(bg, Param::Exponential);
    let pre = preconditioner(bg, 2)?;
    let out = descend(&obj, &pre, log_start(bg, start)?, opts)?;
    let u = obj.factor(&out.z);
    let value = y4_quotient(bg, &u)?;
    Ok(QuotientReport {
        value,
        minimizer: u,
        iterations: out.iterations,
        converged: out.converged,
        constraint_active: false,
    })
}

/// Threshold below which a Yamabe estimate does not count as positive.
fn yamabe_positivity_floor(bg: &Metric) -> f64 {
    let n = bg.dimension() as f64;
    1e-9 * (max_abs(&bg.fields().r) * powf(bg.volume(), 2.0 / n)).max(1.0)
}

/// Margin of the normalized factor, against the barrier floor.
fn normalized_margin_ok(bg: &Metric, u: &[f64]) -> bool {
    let nrm = bg.lp_norm(u, critical_exponent(bg.dimension(), 2));
    let v: Vec<f64> = u.iter().map(|x| x / nrm).collect();
    let Ok(f) = ConformalFactor::fourth_order(v) else { return false };
    match crate::conformal::scalar_positivity_margin(bg, &f) {
        Ok((m, _)) => min_value(&m) > BARRIER_FLOOR,
        Err(_) => false,
    }
}

/// Infimum over positive factors whose metric has positive scalar curvature.
/// Requires `Y > 0`; the constraint is a logarithmic barrier on the margin,
/// run at weight `1e-4 |F|` and then `1e-7 |F|`.
pub fn estimate_y4_star(bg: &Metric, start: Option<&[f64]>, opts: &DescentOptions) -> Result<QuotientReport> {
    let y = minimize_yamabe(bg, opts)?;
    if !(y.value > yamabe_positivity_floor(bg)) {
        return Err(Error::Infeasible(format!("Y4* needs Y(M,g) > 0, but the Yamabe estimate is {:.3e}", y.value)));
    }
    let mut z0 = log_start(bg, start)?;
    if !normalized_margin_ok(bg, &z0.iter().map(|&v| exp(v)).collect::<Vec<_>>()) {
        // The Yamabe minimizer has constant positive scalar curvature.
        let n = bg.dimension();
        let w = ConformalFactor::new(y.minimizer.iter().map(|v| v.abs()).collect(), ExponentConvention::SecondOrder)
            .map_err(|_| Error::Infeasible("Yamabe minimizer changes sign".into()))?;
        let u = convert_exponent(&w, n)?;
        if !normalized_margin_ok(bg, u.values()) {
            return Err(Error::Infeasible("no starting factor with positive scalar curvature".into()));
        }
        z0 = u.values().iter().map(|&v| ln(v)).collect();
    }
    let pre = preconditioner(bg, 2)?;
    let mut obj = y4_objective(bg, Param::Exponential);
    let f0 = obj.quotient(&obj.factor(&z0)).abs().max(1.0);
    let mut iterations = 0;
    let mut converged = true;
    for mu in [1e-4 * f0, 1e-7 * f0] {
        obj.barrier = Some(Barrier::new(bg, mu));
        let out = descend(&obj, &pre, z0, opts)?;
        iterations += out.iterations;
        converged = out.converged;
        z0 = out.z;
    }
    let u = obj.factor(&z0);
    let value = y4_quotient(bg, &u)?;
    let nrm = bg.lp_norm(&u, critical_exponent(bg.dimension(), 2));
    let v = ConformalFactor::fourth_order(u.iter().map(|x| x / nrm).collect())?;
    let (m, _) = crate::conformal::scalar_positivity_margin(bg, &v)?;
    let constraint_active = min_value(&m) - BARRIER_FLOOR <= 1e-2 * max_abs(&m);
    Ok(QuotientReport { value, minimizer: u, iterations, converged, constraint_active })
}

/// All four estimates, warm-started down the chain `Y4* -> Y4+ -> Y4`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantChain {
    pub yamabe: QuotientReport,
    pub y4: QuotientReport,
    pub y4_plus: QuotientReport,
    /// `Err` when `Y4*` is not defined or has no feasible start.
    pub y4_star: core::result::Result<QuotientReport, Error>,
}

pub fn estimate_invariants(bg: &Metric, opts: &DescentOptions) -> Result<InvariantChain> {
    let yamabe = minimize_yamabe(bg, opts)?;
    let y4_star = estimate_y4_star(bg, None, opts);
    let y4_plus = match &y4_star {
        Ok(r) => estimate_y4_plus(bg, Some(&r.minimizer), opts)?,
        Err(_) => estimate_y4_plus(bg, None, opts)?,
    };
    let y4 = minimize_y4(bg, Some(&y4_plus.minimizer), opts)?;
    Ok(InvariantChain { yamabe, y4, y4_plus, y4_star })
}

/// Open window `(max(1, 6/(n-2)), (n+2)/(n-2))` for the subcritical exponent.
pub fn subcritical_window(n: usize) -> (f64, f64) {
    let n = n as f64;
    ((6.0 / (n - 2.0)).max(1.0), (n + 2.0) / (n - 2.0))
}

pub fn default_subcritical_exponent(n: usize) -> f64 {
    let (lo, hi) = subcritical_window(n);
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubcriticalSolution {
    /// Second-order factor: `u^(4/(n-2)) g`.
    pub factor: ConformalFactor,
    pub iterations: usize,
    /// `||L u - u^p||_inf / ||u^p||_inf`.
    pub residual: f64,
}

pub const SUBCRITICAL_TOLERANCE: f64 = 1e-9;

/// Positive solution of `L u = u^p` by the normalized iteration
/// `v <- L^-1(v^p) / ||L^-1(v^p)||_{p+1}`, rescaled at the end.
pub fn subcritical_starter(bg: &Metric, p: f64, max_iterations: usize) -> Result<SubcriticalSolution> {
    let n = bg.dimension();
    let (lo, hi) = subcritical_window(n);
    if !(p > lo && p < hi) {
        return Err(Error::InvalidInput(format!("subcritical exponent p = {p} outside the open window ({lo}, {hi})")));
    }
    let y = minimize_yamabe(bg, &DescentOptions::default())?;
    if !(y.value > yamabe_positivity_floor(bg)) {
        return Err(Error::Precondition { what: "Y(M,g) > 0".into(), value: y.value });
    }
    let l = bg.conformal_laplacian_matrix();
    let lu = Lu::factor(&l)?;
    let mut v = vec![1.0; bg.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iterations {
        let rhs: Vec<f64> = v.iter().map(|&x| powf(x, p)).collect();
        let t = lu.solve(&rhs);
        if let Some((index, &value)) = t.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            return Err(Error::NonPositiveFactor { index, value });
        }
        let c = bg.lp_norm(&t, p + 1.0);
        v = t.iter().map(|x| x / c).collect();
        let s = powf(c, -1.0 / (p - 1.0));
        let u: Vec<f64> = v.iter().map(|x| s * x).collect();
        let up: Vec<f64> = u.iter().map(|&x| powf(x, p)).collect();
        let lu_u = l.matvec(&u);
        let diff: Vec<f64> = lu_u.iter().zip(&up).map(|(a, b)| a - b).collect();
        residual = max_abs(&diff) / max_abs(&up);
        if residual <= SUBCRITICAL_TOLERANCE {
            return Ok(SubcriticalSolution { factor: ConformalFactor::second_order(u)?, iterations: it, residual });
        }
    }
    Err(Error::NonConvergence { iterations: max_iterations, residual })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarterCheck {
    /// `-Delta~ J~ + ((n-4)/2) J~^2` from the conformal metric's curvature.
    pub geometric: Vec<f64>,
    /// The closed form in powers of `u`, `R` and `|grad u|^2`.
    pub closed_form: Vec<f64>,
    /// Relative `L2(dmu)` distance of the two routes.
    pub relative_difference: f64,
    pub agree: bool,
    pub positive: bool,
}

pub const STARTER_AGREEMENT: f64 = 1e-6;

/// Evaluates `-Delta~ J~ + ((n-4)/2) J~^2` for `g~ = u^(4/(n-2)) g` two ways.
pub fn verify_starter(bg: &Metric, u: &ConformalFactor, p: f64) -> Result<StarterCheck> {
    if u.convention() != ExponentConvention::SecondOrder {
        return Err(Error::InvalidInput("verify_starter expects a second-order factor".into()));
    }
    let n = bg.dimension();
    let nf = n as f64;
    let g = bg.conformal(&convert_exponent(u, n)?)?;
    let jt = g.fields().j.clone();
    let uv = u.values();
    let lap_j = bg.laplacian(&jt);
    let grad = bg.grad_dot(uv, &jt);
    let geometric: Vec<f64> = (0..uv.len())
        .map(|i| {
            let lt = powf(uv[i], -4.0 / (nf - 2.0)) * lap_j[i] + 2.0 * powf(uv[i], -(nf + 2.0) / (nf - 2.0)) * grad[i];
            -lt + 0.5 * (nf - 4.0) * jt[i] * jt[i]
        })
        .collect();

    let gu = bg.grad_sq(uv);
    let r = &bg.fields().r;
    let top = (nf + 2.0) / (nf - 2.0);
    let c = (nf - 2.0) / (4.0 * (nf - 1.0));
    let closed_form: Vec<f64> = (0..uv.len())
        .map(|i| {
            let x = uv[i];
            let rt = c * (p - 6.0 / (nf - 2.0)) * powf(x, 2.0 * p - 2.0 * top)
                + c * (top - p) * r[i] * powf(x, p - (nf + 6.0) / (nf - 2.0))
                + (top - p) * (p - 4.0 / (nf - 2.0)) * powf(x, p - (3.0 * nf + 2.0) / (nf - 2.0)) * gu[i];
            rt / (2.0 * (nf - 1.0))
        })
        .collect();
    let diff: Vec<f64> = geometric.iter().zip(&closed_form).map(|(a, b)| a - b).collect();
    let denom = bg.rms(&closed_form);
    let relative_difference = if denom == 0.0 { bg.rms(&diff) } else { bg.rms(&diff) / denom };
    Ok(StarterCheck {
        positive: min_value(&geometric) > 0.0,
        agree: relative_difference <= STARTER_AGREEMENT,
        relative_difference,
        geometric,
        closed_form,
    })
}

/// Descending ladder of candidate starting parameters: `4(1 - 2^-k)` for
/// `k = 40..1`, then `2^(1-k)` for `k = 2..40`.
fn lambda_ladder() -> Vec<f64> {
    let mut v: Vec<f64> = (1..=40).rev().map(|k| 4.0 * (1.0 - powf(2.0, -(k as f64)))).collect();
    v.extend((2..=40).map(|k| powf(2.0, 1.0 - k as f64)));
    v
}

/// Relative margin required of `Q~ - lambda0 sigma2~`.
pub const LAMBDA0_MARGIN: f64 = 1e-3;

/// Largest ladder value `lambda0` with `min(Q~ - lambda0 sigma2~) >= 1e-3 max(1, ||Q~||_inf)`,
/// and `chi = (Q~ - lambda0 sigma2~) u0^((n+4)/(n-4))`.
pub fn find_lambda0_chi(bg: &Metric, u0: &ConformalFactor) -> Result<StarterMetric> {
    if u0.convention() != ExponentConvention::FourthOrder {
        return Err(Error::InvalidInput("find_lambda0_chi expects a fourth-order factor".into()));
    }
    let n = bg.dimension() as f64;
    let g = bg.conformal(u0)?;
    let f = g.fields();
    let min_j = min_value(&f.j);
    if !(min_j > 0.0) {
        return Err(Error::Precondition { what: "J~ > 0".into(), value: min_j });
    }
    let lap_j = g.laplacian(&f.j);
    let start: Vec<f64> = (0..f.j.len()).map(|i| -lap_j[i] + 0.5 * (n - 4.0) * f.j[i] * f.j[i]).collect();
    let min_start = min_value(&start);
    if !(min_start > 0.0) {
        return Err(Error::Precondition { what: "-Delta~ J~ + ((n-4)/2) J~^2 > 0".into(), value: min_start });
    }
    let q = q_conformal(bg, u0)?;
    let eps = LAMBDA0_MARGIN * max_abs(&q).max(1.0);
    let margin = |lambda: f64| min_value(&q.iter().zip(&f.sigma2).map(|(q, s)| q - lambda * s).collect::<Vec<_>>());
    let lambda0 = lambda_ladder().into_iter().find(|&l| margin(l) >= eps).ok_or_else(|| Error::Precondition {
        what: format!("min(Q~ - lambda sigma2~) >= {eps:.3e} for some lambda in (0, 4)"),
        value: margin(0.0),
    })?;
    let e = (n + 4.0) / (n - 4.0);
    let chi = (0..q.len()).map(|i| (q[i] - lambda0 * f.sigma2[i]) * powf(u0.values()[i], e)).collect();
    Ok(StarterMetric { u0: u0.clone(), p_used: None, chi, lambda0, margins: (min_j, margin(lambda0)) })
}

/// Subcritical solve, exponent conversion and parameter search in one go.
pub fn build_starter(bg: &Metric, p: f64) -> Result<(StarterMetric, SubcriticalSolution)> {
    let sol = subcritical_starter(bg, p, 5000)?;
    let u0 = convert_exponent(&sol.factor, bg.dimension())?;
    let mut starter = find_lambda0_chi(bg, &u0)?;
    starter.p_used = Some(p);
    Ok((starter, sol))
}
