mod common;

use common::*;
use paneitz_core::grid::SymmetryClass;
use paneitz_core::{hessian_components, laplacian, make_background, make_grid, BackgroundManifold, Error};

fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!((got - want).abs() <= tol * want.abs().max(1.0), "{what}: got {got}, want {want}");
}

#[test]
fn sphere_curvature_matches_ricci_oracle_and_frozen_values() {
    let c = make_background(&BackgroundManifold::RoundSphere { n: 6, radius: 1.0 }).unwrap();
    let o = model_curvature(&[(6, 5.0)]);
    for (got, want, frozen, name) in [
        (c.r0, o.r, 30.0, "R"),
        (c.j0, o.j, 3.0, "J"),
        (c.abs_a2, o.abs_a2, 1.5, "|A|^2"),
        (c.sigma2, o.sigma2, 3.75, "sigma2"),
        (c.q0, o.q, 24.0, "Q"),
    ] {
        assert_close(want, frozen, 1e-12, name);
        assert_close(got, frozen, 1e-10, name);
    }
    assert_close(c.a_blocks[0], 0.5, 1e-12, "A");
}

#[test]
fn product_curvature_matches_ricci_oracle_and_frozen_values() {
    let c = make_background(&BackgroundManifold::SphereProduct { p: 2, a: 1.0, q: 4, b: 1.0 }).unwrap();
    let o = model_curvature(&[(2, 1.0), (4, 3.0)]);
    for (got, want, frozen, name) in [
        (c.r0, o.r, 14.0, "R"),
        (c.j0, o.j, 1.4, "J"),
        (c.abs_a2, o.abs_a2, 0.66, "|A|^2"),
        (c.sigma2, o.sigma2, 0.65, "sigma2"),
        (c.q0, o.q, 4.56, "Q"),
    ] {
        assert_close(want, frozen, 1e-12, name);
        assert_close(got, frozen, 1e-10, name);
    }
    assert_close(c.a_blocks[0], -0.1, 1e-12, "A on S^2");
    assert_close(c.a_blocks[1], 0.4, 1e-12, "A on S^4");
}

#[test]
fn torus_is_flat() {
    let c = make_background(&BackgroundManifold::FlatTorus { n: 6, period: 1.0 }).unwrap();
    assert_eq!((c.r0, c.j0, c.abs_a2, c.sigma2, c.q0), (0.0, 0.0, 0.0, 0.0, 0.0));
}

#[test]
fn curvature_consistency_laws_hold_exactly() {
    for spec in [
        BackgroundManifold::RoundSphere { n: 7, radius: 1.7 },
        BackgroundManifold::SphereProduct { p: 3, a: 0.8, q: 5, b: 2.0 },
        BackgroundManifold::FlatTorus { n: 9, period: 3.0 },
    ] {
        let c = make_background(&spec).unwrap();
        let n = c.n as f64;
        assert_eq!(c.j0, c.r0 / (2.0 * (n - 1.0)));
        assert_eq!(c.sigma2, 0.5 * (c.j0 * c.j0 - c.abs_a2));
        assert_eq!(c.q0, -2.0 * c.abs_a2 + 0.5 * n * c.j0 * c.j0);
    }
}

#[test]
fn invalid_backgrounds_are_rejected() {
    let bad = [
        BackgroundManifold::RoundSphere { n: 4, radius: 1.0 },
        BackgroundManifold::RoundSphere { n: 6, radius: 0.0 },
        BackgroundManifold::FlatTorus { n: 6, period: -1.0 },
        BackgroundManifold::SphereProduct { p: 0, a: 1.0, q: 6, b: 1.0 },
        BackgroundManifold::SphereProduct { p: 2, a: f64::NAN, q: 4, b: 1.0 },
    ];
    for spec in bad {
        assert!(matches!(make_background(&spec), Err(Error::InvalidInput(_))), "{spec:?}");
    }
    let s6 = BackgroundManifold::RoundSphere { n: 6, radius: 1.0 };
    assert!(matches!(make_grid(&s6, 15), Err(Error::InvalidInput(_))));
    assert!(make_grid(&s6, 16).is_ok());
}

#[test]
fn quadrature_reproduces_volumes() {
    let s6 = make_grid(&BackgroundManifold::RoundSphere { n: 6, radius: 1.0 }, 128).unwrap();
    let w6 = 16.0 * std::f64::consts::PI.powi(3) / 15.0;
    assert!(rel(sphere_volume(6), w6) < 1e-14);
    assert!(rel(s6.integrate(&vec![1.0; 128]), w6) <= 1e-10);

    let prod = make_grid(&BackgroundManifold::SphereProduct { p: 2, a: 1.0, q: 4, b: 1.0 }, 128).unwrap();
    let want = 4.0 * std::f64::consts::PI * (8.0 * std::f64::consts::PI.powi(2) / 3.0);
    assert!(rel(prod.integrate(&vec![1.0; 128]), want) <= 1e-10);

    for spec in [
        BackgroundManifold::RoundSphere { n: 9, radius: 0.7 },
        BackgroundManifold::FlatTorus { n: 6, period: 2.5 },
        BackgroundManifold::SphereProduct { p: 3, a: 1.3, q: 3, b: 0.6 },
    ] {
        let g = make_grid(&spec, 128).unwrap();
        assert!(rel(g.integrate(&vec![1.0; 128]), spec.volume()) <= 1e-10, "{spec:?}");
    }
}

#[test]
fn torus_grid_is_uniform_with_equal_weights() {
    let g = make_grid(&BackgroundManifold::FlatTorus { n: 6, period: 2.0 * std::f64::consts::PI }, 64).unwrap();
    assert!(matches!(g.symmetry_class(), SymmetryClass::EvenPeriodic { .. }));
    let s = g.nodes();
    let h = s[1] - s[0];
    for k in 1..s.len() {
        assert!((s[k] - s[k - 1] - h).abs() < 1e-12);
    }
    let w0 = g.quad_weights()[0];
    assert!(g.quad_weights().iter().all(|w| rel(*w, w0) < 1e-12));
}

#[test]
fn differentiation_annihilates_constants_and_affine_data() {
    let g = make_grid(&BackgroundManifold::RoundSphere { n: 6, radius: 1.0 }, 128).unwrap();
    let ones = vec![1.0; g.len()];
    assert!(max_abs(&g.d1().matvec(&ones)) <= 1e-12 * g.d1().max_abs());
    let affine: Vec<f64> = g.x().iter().map(|x| 2.0 - 3.0 * x).collect();
    assert!(max_abs(&g.d2().matvec(&affine)) <= 1e-12 * g.d2().max_abs() * max_abs(&affine));
}

#[test]
fn theta_derivative_vanishes_towards_the_poles() {
    let g = make_grid(&BackgroundManifold::RoundSphere { n: 6, radius: 1.0 }, 64).unwrap();
    let f: Vec<f64> = g.x().iter().map(|x| x * x + x).collect();
    let fx = g.d1().matvec(&f);
    let ftheta: Vec<f64> = g.theta().iter().zip(&fx).map(|(t, d)| -t.sin() * d).collect();
    let last = ftheta.len() - 1;
    assert!(ftheta[0].abs() < 0.1 && ftheta[last].abs() < 0.1);
    assert!(ftheta[0].abs() < ftheta[10].abs());
}

#[test]
fn laplacian_examples() {
    let s6 = sphere(6, 64);
    let lap1 = laplacian(s6.grid(), &vec![1.0; 64]);
    assert!(max_abs(&lap1) < 1e-10);
    let x = nodes(&s6, |x| x);
    let lx = laplacian(s6.grid(), &x);
    let want: Vec<f64> = x.iter().map(|x| -6.0 * x).collect();
    assert!(max_diff(&lx, &want) < 1e-10);

    let t = torus(6, 64);
    for k in 1..5 {
        let f: Vec<f64> = t.grid().theta().iter().map(|s| (k as f64 * s).cos()).collect();
        let lf = laplacian(t.grid(), &f);
        let want: Vec<f64> = f.iter().map(|v| -((k * k) as f64) * v).collect();
        assert!(max_diff(&lf, &want) < 1e-9, "k = {k}");
    }
}

#[test]
fn laplacian_matches_zonal_formula_on_polynomials() {
    // Delta g(cos theta) = (1 - x^2) g'' - m x g' on a unit round factor S^m.
    for (m, metric) in [(6usize, sphere(6, 48)), (4, product(48))] {
        let g = nodes(&metric, |x| x.powi(5) - 2.0 * x * x + 0.5);
        let want = nodes(&metric, |x| {
            let g1 = 5.0 * x.powi(4) - 4.0 * x;
            let g2 = 20.0 * x.powi(3) - 4.0;
            (1.0 - x * x) * g2 - m as f64 * x * g1
        });
        assert!(rel_field(&laplacian(metric.grid(), &g), &want) < 1e-10, "m = {m}");
    }
}

#[test]
fn hessian_examples() {
    let s6 = sphere(6, 64);
    let h = hessian_components(s6.grid(), &vec![1.0; 64]);
    assert!(max_abs(&h.radial) < 1e-10 && h.blocks.iter().all(|b| max_abs(b) < 1e-10));

    // D^2 cos = -cos g on the unit sphere: every component equals -x.
    let x = nodes(&s6, |x| x);
    let h = hessian_components(s6.grid(), &x);
    let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!(max_diff(&h.radial, &minus_x) < 1e-10);
    assert!(max_diff(&h.blocks[0], &minus_x) < 1e-10);
    let norm = h.norm_sq(s6.grid());
    let trace = h.trace(s6.grid());
    for i in 0..64 {
        assert!((norm[i] - 6.0 * x[i] * x[i]).abs() < 1e-9);
        assert!((trace[i] + 6.0 * x[i]).abs() < 1e-9);
    }
    assert!(max_abs(&h.trace_free_norm_sq(s6.grid())) < 1e-9);
}

#[test]
fn hessian_trace_is_the_laplacian() {
    for metric in [sphere(6, 64), torus(6, 64), product(64)] {
        let f = nodes(&metric, |x| (1.3 * x).sin() + x * x * x);
        let tr = hessian_components(metric.grid(), &f).trace(metric.grid());
        let lap = laplacian(metric.grid(), &f);
        assert!(rel_field(&tr, &lap) <= 1e-9);
    }
}

#[test]
fn laplacian_is_symmetric_on_band_limited_pairs() {
    for metric in [sphere(6, 64), torus(6, 64), product(64)] {
        let f = nodes(&metric, |x| x.powi(3) - x + 0.7 * x * x);
        let h = nodes(&metric, |x| x * x + 0.5 * x.powi(4) + x);
        let lf = metric.laplacian(&f);
        let lh = metric.laplacian(&h);
        let a = metric.integrate(&lf.iter().zip(&h).map(|(p, q)| p * q).collect::<Vec<_>>());
        let b = metric.integrate(&f.iter().zip(&lh).map(|(p, q)| p * q).collect::<Vec<_>>());
        assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "{a} vs {b}");
    }
}

#[test]
fn laplacian_error_decays_spectrally_under_refinement() {
    let exact = |x: f64| {
        let d = 1.05 - x;
        (1.0 - x * x) * 2.0 / d.powi(3) - 6.0 * x / d.powi(2)
    };
    let err = |res: usize| {
        let g = sphere(6, res);
        let f = nodes(&g, |x| 1.0 / (1.05 - x));
        max_diff(&g.laplacian(&f), &nodes(&g, exact)) / max_abs(&nodes(&g, exact))
    };
    let (e32, e64) = (err(32), err(64));
    assert!(e64 * 4.0 <= e32, "{e32:.3e} -> {e64:.3e}");
}
