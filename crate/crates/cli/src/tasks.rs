//! Task dispatch: each task maps a validated config to results and checks.

use paneitz_core::conformal::{sigma2_conformal, total_q_identity_residual};
use paneitz_core::continuation::{bochner_coefficients, boundedness_proxy, quadratic_forms, run_path};
use paneitz_core::invariants::{
    build_starter, estimate_invariants, verify_starter, y4_quotient, DescentOptions, QuotientReport,
};
use paneitz_core::paneitz::{bochner_residual, conformal_covariance_residual};
use paneitz_core::{make_background, ConformalFactor, Error, Metric};
use serde_json::{json, Value};

use crate::config::{build_background, Background, ExperimentConfig, Task};
use crate::report::{Check, ErrorPayload, PathRow};

/// What a task produced before the report is assembled.
pub struct TaskOutput {
    pub results: Value,
    pub checks: Vec<Check>,
    pub rows: Option<Vec<PathRow>>,
    pub error: Option<ErrorPayload>,
}

impl TaskOutput {
    fn ok(results: Value, checks: Vec<Check>) -> Self {
        Self { results, checks, rows: None, error: None }
    }

    fn failed(e: &Error) -> Self {
        Self { results: Value::Null, checks: Vec::new(), rows: None, error: Some(e.into()) }
    }
}

pub fn dispatch(cfg: &ExperimentConfig) -> TaskOutput {
    let bg = match build_background(cfg) {
        Ok(bg) => bg,
        Err(e) => return TaskOutput::failed(&e),
    };
    let out = match cfg.task {
        Task::Curvature => curvature(cfg, &bg),
        Task::CovarianceTest => covariance(cfg, &bg),
        Task::Invariants => invariants(cfg, &bg),
        Task::Starter => starter(cfg, &bg),
        Task::Continue => return continuation(cfg, &bg),
        Task::Identities => identities(&bg),
    };
    out.unwrap_or_else(|e| TaskOutput::failed(&e))
}

fn nodes(g: &Metric, f: impl Fn(f64) -> f64) -> Vec<f64> {
    g.grid().x().iter().map(|&x| f(x)).collect()
}

fn chebyshev(g: &Metric, k: usize) -> Vec<f64> {
    nodes(g, |x| (k as f64 * x.clamp(-1.0, 1.0).acos()).cos())
}

fn min(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn range(v: &[f64]) -> Value {
    json!({ "min": min(v), "max": max(v) })
}

/// Relative L2 mismatch over the metric's measure.
fn rel_l2(g: &Metric, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    g.rms(&d) / g.rms(b).max(f64::MIN_POSITIVE)
}

fn curvature(cfg: &ExperimentConfig, bg: &Background) -> paneitz_core::Result<TaskOutput> {
    let c = make_background(&cfg.background.manifold())?;
    let f = bg.metric.fields();
    let mut checks = Vec::new();
    let law = (0..f.j.len()).map(|i| (f.sigma2[i] - 0.5 * (f.j[i] * f.j[i] - f.abs_a2[i])).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most(
        "sigma2_law",
        "conformal_geometry: sigma2 = (J^2 - |A|^2)/2 pointwise",
        law / (1.0 + c.abs_a2.abs().max(c.j0 * c.j0)),
        1e-12,
    ));
    match &bg.rho {
        None => {
            let dev = [(&f.j, c.j0), (&f.abs_a2, c.abs_a2), (&f.sigma2, c.sigma2), (&f.q, c.q0), (&f.r, c.r0)]
                .iter()
                .flat_map(|(v, want)| v.iter().map(move |x| (x - want).abs() / want.abs().max(1.0)))
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                "model_constants",
                "background_manifolds: sampled curvature equals the closed-form constants",
                dev,
                1e-10,
            ));
        }
        Some(rho) => {
            let expanded = sigma2_conformal(&bg.model, rho)?;
            checks.push(Check::at_most(
                "sigma2_routes",
                "conformal_geometry: expanded sigma2 of the conformal metric matches the Schouten route",
                rel_l2(&bg.metric, &expanded, &f.sigma2),
                1e-8,
            ));
            let lap_j = bg.metric.laplacian(&f.j);
            let n = bg.metric.dimension() as f64;
            let direct: Vec<f64> =
                (0..f.q.len()).map(|i| -lap_j[i] - 2.0 * f.abs_a2[i] + 0.5 * n * f.j[i] * f.j[i]).collect();
            checks.push(Check::at_most(
                "q_transformation",
                "conformal_geometry: Q from the transformation law matches -Delta J - 2|A|^2 + (n/2) J^2",
                rel_l2(&bg.metric, &f.q, &direct),
                1e-6,
            ));
        }
    }
    let results = json!({
        "background": {
            "n": c.n,
            "R": c.r0,
            "J": c.j0,
            "abs_A2": c.abs_a2,
            "sigma2": c.sigma2,
            "Q": c.q0,
            "schouten_blocks": c.a_blocks,
            "volume": cfg.background.manifold().volume(),
        },
        "fields": {
            "J": range(&f.j),
            "abs_A2": range(&f.abs_a2),
            "sigma2": range(&f.sigma2),
            "Q": range(&f.q),
            "R": range(&f.r),
        },
        "volume": bg.metric.volume(),
    });
    Ok(TaskOutput::ok(results, checks))
}

fn covariance(cfg: &ExperimentConfig, bg: &Background) -> paneitz_core::Result<TaskOutput> {
    let c = cfg.params.covariance_amplitude.unwrap_or(0.3);
    let g = &bg.metric;
    let rho = ConformalFactor::fourth_order(nodes(g, |x| 1.0 + c * x))?;
    let phi = chebyshev(g, 2);
    let r = conformal_covariance_residual(g, &rho, &phi)?;
    let checks = vec![Check::at_most(
        "covariance_residual",
        "paneitz_operator: conformal covariance of P under rho = 1 + c cos(theta)",
        r,
        1e-5,
    )];
    Ok(TaskOutput::ok(json!({ "amplitude": c, "resolution": cfg.resolution, "residual": r }), checks))
}

fn quotient(r: &QuotientReport) -> Value {
    json!({ "value": r.value, "iterations": r.iterations, "converged": r.converged, "constraint_active": r.constraint_active })
}

fn invariants(cfg: &ExperimentConfig, bg: &Background) -> paneitz_core::Result<TaskOutput> {
    let chain = estimate_invariants(&bg.metric, &DescentOptions::default())?;
    let (y4, plus) = (chain.y4.value, chain.y4_plus.value);
    let mut checks = Vec::new();
    let star = match &chain.y4_star {
        Ok(s) => quotient(s),
        Err(e) => json!({ "error": ErrorPayload::from(e) }),
    };
    let scale = chain.y4_star.as_ref().map(|s| s.value.abs()).unwrap_or(plus.abs()).max(1.0);
    checks.push(Check::at_most("y4_below_y4_plus", "invariants: Y4 <= Y4+", y4 - plus, 1e-6 * scale));
    if let Ok(s) = &chain.y4_star {
        checks.push(Check::at_most("y4_plus_below_y4_star", "invariants: Y4+ <= Y4*", plus - s.value, 1e-6 * scale));
    }
    let mut results = json!({
        "yamabe": quotient(&chain.yamabe),
        "y4": quotient(&chain.y4),
        "y4_plus": quotient(&chain.y4_plus),
        "y4_star": star,
    });
    if matches!(cfg.background, crate::config::BackgroundSpec::RoundSphere { .. }) {
        // Conformal invariance: the model's constant-function value is the reference.
        let reference = y4_quotient(&bg.model, &vec![1.0; bg.model.len()])?;
        results["constant_function_value"] = json!(reference);
        let mut worst = ((y4 - reference) / reference).abs().max(((plus - reference) / reference).abs());
        if let Ok(s) = &chain.y4_star {
            worst = worst.max(((s.value - reference) / reference).abs());
        }
        checks.push(Check::at_most(
            "round_sphere_value",
            "invariants: on a conformally round sphere the estimates equal the constant-function value",
            worst,
            1e-3,
        ));
    }
    Ok(TaskOutput::ok(results, checks))
}

fn starter(cfg: &ExperimentConfig, bg: &Background) -> paneitz_core::Result<TaskOutput> {
    let p = cfg.subcritical_exponent();
    let (st, sol) = build_starter(&bg.metric, p)?;
    let check = verify_starter(&bg.metric, &sol.factor, p)?;
    let checks = vec![
        Check::at_most(
            "subcritical_residual",
            "invariants: subcritical starter solves its equation",
            sol.residual,
            1e-9,
        ),
        Check::at_most(
            "starter_routes",
            "invariants: geometric and closed-form starter expressions agree",
            check.relative_difference,
            1e-6,
        ),
        Check::above(
            "starter_positivity",
            "invariants: closed-form starter expression is positive",
            min(&check.closed_form),
            0.0,
        ),
        Check::above("lambda0_min_j", "invariants: starter has positive scalar curvature", st.margins.0, 0.0),
        Check::above(
            "lambda0_min_q_sigma2",
            "invariants: Q~ - lambda0 sigma2~ is positive at the starter",
            st.margins.1,
            0.0,
        ),
    ];
    let results = json!({
        "p": p,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "lambda0": st.lambda0,
        "chi": range(&st.chi),
        "u0": range(st.u0.values()),
        "margins": { "min_J": st.margins.0, "min_Q_minus_lambda0_sigma2": st.margins.1 },
    });
    Ok(TaskOutput::ok(results, checks))
}

fn continuation(cfg: &ExperimentConfig, bg: &Background) -> TaskOutput {
    let g = &bg.metric;
    let p = cfg.subcritical_exponent();
    let st = match build_starter(g, p) {
        Ok((st, _)) => st,
        Err(e) => return TaskOutput::failed(&e),
    };
    let (states, error) = match run_path(g, &st, &cfg.path_config()) {
        Ok(s) => (s, None),
        Err(f) => (f.states, Some(f.error)),
    };
    let rows: Vec<PathRow> = states.iter().map(PathRow::from).collect();
    let worst = |f: &dyn Fn(&PathRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let total_q = states.iter().map(|s| s.diagnostics.total_q_residual).fold(0.0, f64::max);
    let violations = states.iter().filter(|s| s.diagnostics.hypothesis_ok && !(s.diagnostics.h_min_eig > 0.0)).count();
    let converged = states.iter().map(|s| s.residual_norm / s.tolerance).fold(0.0, f64::max);
    // Per-state checks are vacuous on an empty path; the error payload carries the refusal.
    let mut checks = if states.is_empty() {
        Vec::new()
    } else {
        vec![
            Check::at_most(
                "newton_converged",
                "continuation_solver: every state meets its Newton tolerance",
                converged,
                1.0,
            ),
            Check::at_most("total_q_identity", "conformal_geometry: total-Q identity on every state", total_q, 1e-6),
            Check::at_most(
                "path_identity",
                "continuation_solver: integrated path identity on every state",
                worst(&|r| r.identity_34_residual),
                1e-6,
            ),
            Check::at_most(
                "weighted_identity",
                "continuation_solver: u^alpha-weighted identity on every state",
                worst(&|r| r.identity_37_residual),
                1e-6,
            ),
            Check::at_most(
                "h_positivity",
                "continuation_solver: H~ positive definite wherever the curvature hypotheses hold",
                violations as f64,
                0.0,
            ),
        ]
    };
    let last = states.last();
    if let Some(s) = last.filter(|s| s.lambda == 0.0) {
        checks.push(Check::above("final_min_q", "continuation_solver: Q~ > 0 at lambda = 0", s.diagnostics.min_q, 0.0));
        checks.push(Check::above("final_min_r", "continuation_solver: R~ > 0 at lambda = 0", s.diagnostics.min_r, 0.0));
    }
    let bounded = boundedness_proxy(&states).ok().map(|b| {
        json!({
            "critical_norm_ratio": b.critical_norm_ratio,
            "inverse_min_ratio": b.inverse_min_ratio,
            "v_sup_ratio": b.v_sup_ratio,
            "bounded": b.bounded,
        })
    });
    let results = json!({
        "p": p,
        "lambda0": st.lambda0,
        "states": states.len(),
        "completed": error.is_none(),
        "newton_iterations": states.iter().map(|s| s.newton_iterations).collect::<Vec<_>>(),
        "lambdas": states.iter().map(|s| s.lambda).collect::<Vec<_>>(),
        "final": last.map(|s| json!({
            "lambda": s.lambda,
            "min_Q": s.diagnostics.min_q,
            "min_R": s.diagnostics.min_r,
            "min_J_margin": s.diagnostics.min_j_margin,
            "u_min": s.diagnostics.u_min,
            "u_max": s.diagnostics.u_max,
            "theta": g.grid().theta(),
            "u": s.u.values(),
        })),
        "boundedness": bounded,
    });
    TaskOutput { results, checks, rows: Some(rows), error: error.as_ref().map(ErrorPayload::from) }
}

fn identities(bg: &Background) -> paneitz_core::Result<TaskOutput> {
    let g = &bg.metric;
    let n = g.dimension();
    let bochner = (1..=10).map(|k| bochner_residual(g, &chebyshev(g, k))).fold(0.0, f64::max);
    let mut checks = vec![Check::at_most(
        "bochner",
        "paneitz_operator: Bochner identity on ten band-limited functions",
        bochner,
        1e-8,
    )];
    let one = ConformalFactor::fourth_order(vec![1.0; g.len()])?;
    let tilted = ConformalFactor::fourth_order(nodes(g, |x| 1.0 + 0.2 * x))?;
    let total_q = total_q_identity_residual(g, &one)?.max(total_q_identity_residual(g, &tilted)?);
    checks.push(Check::at_most("total_q_identity", "conformal_geometry: total-Q identity", total_q, 1e-6));
    let mut results = json!({ "bochner_residual": bochner, "total_q_residual": total_q });
    if n >= 6 {
        let u = ConformalFactor::fourth_order(nodes(g, |x| 1.0 + 0.15 * x))?;
        let chi = nodes(g, |x| 5.0 + x);
        let mut worst = 0.0f64;
        for lambda in [0.0, 2.0] {
            for k in 1..=3 {
                let f = quadratic_forms(g, &u, lambda, &chi, &chebyshev(g, k))?;
                worst = worst.max(f.max_disagreement());
            }
        }
        checks.push(Check::at_most(
            "triality",
            "continuation_solver: operator, expanded and Bochner forms of H~ agree",
            worst,
            1e-8,
        ));
        results["triality_disagreement"] = json!(worst);
        results["bochner_coefficients_lambda0"] = json!(bochner_coefficients(n, 0.0));
    } else {
        results["triality_disagreement"] = Value::Null;
        results["triality_skipped"] = json!(format!("linearization not defined for n = {n}"));
    }
    Ok(TaskOutput::ok(results, checks))
}
