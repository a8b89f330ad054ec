mod common;

use common::*;
use paneitz_core::conformal::{
    conformal_j_from_margin, convert_exponent, q_conformal, scalar_positivity_margin, schouten_conformal,
    sigma2_conformal, total_q_identity_residual,
};
use paneitz_core::{ConformalFactor, Error, ExponentConvention, Metric};

fn band_limited(g: &Metric) -> ConformalFactor {
    factor(g, |x| 1.0 + 0.25 * x - 0.15 * (2.0 * x * x - 1.0) + 0.05 * x.powi(3))
}

#[test]
fn factors_must_be_positive() {
    assert!(matches!(
        ConformalFactor::fourth_order(vec![1.0, 0.0, 2.0]),
        Err(Error::NonPositiveFactor { index: 1, .. })
    ));
    assert!(matches!(
        ConformalFactor::second_order(vec![1.0, f64::INFINITY]),
        Err(Error::NonPositiveFactor { index: 1, .. })
    ));
    let s6 = sphere(6, 32);
    let second = ConformalFactor::second_order(vec![1.0; 32]).unwrap();
    assert!(matches!(schouten_conformal(&s6, &second), Err(Error::InvalidInput(_))));
    assert!(matches!(q_conformal(&s6, &second), Err(Error::InvalidInput(_))));
}

#[test]
fn identity_factor_leaves_curvature_unchanged() {
    for g in [sphere(6, 48), product(48), torus(6, 48)] {
        let one = factor(&g, |_| 1.0);
        let a = schouten_conformal(&g, &one).unwrap();
        let f = g.fields();
        assert!(max_diff(&a.radial, &f.a_radial) < 1e-12);
        for (got, want) in a.blocks.iter().zip(&f.a_blocks) {
            assert!(max_diff(got, want) < 1e-12);
        }
        let s = sigma2_conformal(&g, &one).unwrap();
        assert!(max_diff(&s, &f.sigma2) < 1e-10);
    }
}

#[test]
fn homothety_laws() {
    // Fourth-order collocation roundoff grows like N^4 eps; 1e-10 holds at N = 32.
    for (g, c) in [(sphere(6, 32), 2.0), (sphere(7, 32), 0.6), (product(32), 1.7)] {
        let n = g.dimension() as f64;
        let k2 = f64::powf(c, 4.0 / (n - 4.0));
        let u = factor(&g, |_| c);
        let h = g.conformal(&u).unwrap();
        let (f, ft) = (g.fields(), h.fields());
        for i in 0..g.len() {
            assert!(rel(ft.j[i], f.j[i] / k2) <= 1e-10);
            assert!(rel(ft.abs_a2[i], f.abs_a2[i] / (k2 * k2)) <= 1e-10);
            assert!(rel(ft.sigma2[i], f.sigma2[i] / (k2 * k2)) <= 1e-10);
            assert!(rel(ft.q[i], f.q[i] / (k2 * k2)) <= 1e-10);
        }
    }
}

#[test]
fn constant_factor_examples_on_s6() {
    let g = sphere(6, 32);
    let u = factor(&g, |_| 1.7);
    let j = schouten_conformal(&g, &u).unwrap();
    let jt: Vec<f64> = (0..32).map(|i| j.radial[i] + 5.0 * j.blocks[0][i]).collect();
    let want = 3.0 / (1.7 * 1.7);
    assert!(jt.iter().all(|v| rel(*v, want) < 1e-10));

    let two = factor(&g, |_| 2.0);
    let s = sigma2_conformal(&g, &two).unwrap();
    assert!(s.iter().all(|v| rel(*v, 15.0 / 64.0) < 1e-10));
    let q = q_conformal(&g, &two).unwrap();
    assert!(q.iter().all(|v| rel(*v, 1.5) < 1e-10));
    let q1 = q_conformal(&g, &factor(&g, |_| 1.0)).unwrap();
    assert!(q1.iter().all(|v| rel(*v, 24.0) < 1e-10));
}

#[test]
fn torus_schouten_matches_direct_substitution() {
    // u(s) = 2 + cos s + cos(2s)/4 on the 2 pi torus; derivatives in arclength.
    let n = 6.0;
    let k = n - 4.0;
    let g = torus(6, 48);
    let th = g.grid().theta().to_vec();
    let u: Vec<f64> = th.iter().map(|s| 2.0 + s.cos() + 0.25 * (2.0 * s).cos()).collect();
    let us: Vec<f64> = th.iter().map(|s| -s.sin() - 0.5 * (2.0 * s).sin()).collect();
    let uss: Vec<f64> = th.iter().map(|s| -s.cos() - (2.0 * s).cos()).collect();
    let a = schouten_conformal(&g, &ConformalFactor::fourth_order(u.clone()).unwrap()).unwrap();
    for i in 0..48 {
        let (v, d1, d2) = (u[i], us[i], uss[i]);
        let raise = v.powf(-4.0 / k);
        let grad = d1 * d1 / (v * v);
        let radial = raise * (-2.0 / k * d2 / v - 2.0 / (k * k) * grad + 2.0 * (n - 2.0) / (k * k) * grad);
        let flat = raise * (-2.0 / (k * k) * grad);
        assert!((a.radial[i] - radial).abs() < 1e-9, "radial at {i}");
        assert!((a.blocks[0][i] - flat).abs() < 1e-9, "flat block at {i}");
    }
}

#[test]
fn sigma2_expansion_matches_schouten_route() {
    for g in [sphere(6, 64), sphere(8, 64), product(64), torus(6, 64)] {
        let u = band_limited(&g);
        let expanded = sigma2_conformal(&g, &u).unwrap();
        let h = g.conformal(&u).unwrap();
        let direct = &h.fields().sigma2;
        assert!(rel_field(&expanded, direct) <= 1e-8, "n = {}", g.dimension());
    }
}

#[test]
fn curvature_field_laws_hold_pointwise() {
    let g = sphere(6, 64);
    let u = band_limited(&g);
    let h = g.conformal(&u).unwrap();
    let f = h.fields();
    let a = schouten_conformal(&g, &u).unwrap();
    for i in 0..64 {
        let tr = a.radial[i] + 5.0 * a.blocks[0][i];
        let sq = a.radial[i].powi(2) + 5.0 * a.blocks[0][i].powi(2);
        assert!((f.j[i] - tr).abs() <= 1e-12 * tr.abs().max(1.0));
        assert!((f.abs_a2[i] - sq).abs() <= 1e-12 * sq.max(1.0));
        assert!((f.sigma2[i] - 0.5 * (f.j[i] * f.j[i] - f.abs_a2[i])).abs() <= 1e-12 * sq.max(1.0));
        assert!((f.r[i] - 10.0 * f.j[i]).abs() <= 1e-12 * f.r[i].abs().max(1.0));
        assert!(rel(f.volume_element[i], u.values()[i].powi(6)) < 1e-12);
    }
}

#[test]
fn flat_torus_q_of_constants_vanishes() {
    let g = torus(6, 32);
    let q = q_conformal(&g, &factor(&g, |_| 3.0)).unwrap();
    assert!(max_abs(&q) < 1e-10);
}

#[test]
fn q_transformation_matches_curvature_formula() {
    // Operator route against -Delta J - 2 |A|^2 + (n/2) J^2 evaluated in the new metric.
    let bg = perturbed_s6(256, 0.2);
    for u in [factor(&bg, |_| 1.0), band_limited(&bg)] {
        let h = bg.conformal(&u).unwrap();
        let f = h.fields();
        let lap_j = h.laplacian(&f.j);
        let direct: Vec<f64> = (0..h.len()).map(|i| -lap_j[i] - 2.0 * f.abs_a2[i] + 3.0 * f.j[i] * f.j[i]).collect();
        assert!(rel_field(&f.q, &direct) <= 1e-6, "mismatch {:.3e}", rel_field(&f.q, &direct));
    }
}

#[test]
fn composition_of_conformal_changes() {
    let g = sphere(6, 64);
    let u = band_limited(&g);
    let v = factor(&g, |x| 1.0 - 0.2 * x * x + 0.1 * x);
    let uv: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    let twice = g.conformal(&u).unwrap().conformal(&v).unwrap();
    let once = g.conformal(&ConformalFactor::fourth_order(uv).unwrap()).unwrap();
    let (a, b) = (twice.fields(), once.fields());
    for (x, y) in [(&a.j, &b.j), (&a.abs_a2, &b.abs_a2), (&a.sigma2, &b.sigma2), (&a.q, &b.q)] {
        assert!(rel_field(x, y) <= 1e-8, "{:.3e}", rel_field(x, y));
    }
    assert!(rel_field(twice.weights(), once.weights()) <= 1e-12);
}

#[test]
fn positivity_margin_examples() {
    let s6 = sphere(6, 32);
    let (m, ok) = scalar_positivity_margin(&s6, &factor(&s6, |_| 1.0)).unwrap();
    assert!(ok && m.iter().all(|v| (v - 3.0).abs() < 1e-10));
    let (m, ok) = scalar_positivity_margin(&s6, &factor(&s6, |_| 2.5)).unwrap();
    assert!(ok && m.iter().all(|v| (v - 7.5).abs() < 1e-10));
    let prod = product(32);
    let (m, ok) = scalar_positivity_margin(&prod, &factor(&prod, |_| 0.5)).unwrap();
    assert!(ok && m.iter().all(|v| (v - 0.7).abs() < 1e-10));

    let t = torus(6, 32);
    let (m, ok) = scalar_positivity_margin(&t, &factor(&t, |_| 1.0)).unwrap();
    assert!(!ok && max_abs(&m) < 1e-12);
}

#[test]
fn margin_sign_tracks_conformal_scalar_curvature() {
    let g = sphere(6, 64);
    let u = band_limited(&g);
    let j_margin = conformal_j_from_margin(&g, &u).unwrap();
    let h = g.conformal(&u).unwrap();
    let j_direct = &h.fields().j;
    assert!(rel_field(&j_margin, j_direct) <= 1e-9);
}

#[test]
fn exponent_conversion() {
    let one = ConformalFactor::second_order(vec![1.0; 4]).unwrap();
    let w = convert_exponent(&one, 6).unwrap();
    assert_eq!(w.convention(), ExponentConvention::FourthOrder);
    assert!(w.values().iter().all(|v| *v == 1.0));
    let sixteen = ConformalFactor::second_order(vec![16.0; 4]).unwrap();
    let w = convert_exponent(&sixteen, 6).unwrap();
    assert!(w.values().iter().all(|v| (v - 4.0).abs() < 1e-14));
    let already = ConformalFactor::fourth_order(vec![3.0]).unwrap();
    assert_eq!(convert_exponent(&already, 6).unwrap(), already);
}

#[test]
fn total_q_identity_examples() {
    let s6 = sphere(6, 64);
    let w6 = sphere_volume(6);
    // 24 - 4 (15/4) - 9 = 0 per unit volume.
    assert_eq!(24.0 - 4.0 * 3.75 - 0.5 * 2.0 * 9.0, 0.0);
    assert!(total_q_identity_residual(&s6, &factor(&s6, |_| 1.0)).unwrap() < 1e-10 * w6);
    let t = torus(6, 64);
    assert!(total_q_identity_residual(&t, &factor(&t, |_| 1.0)).unwrap() < 1e-10);
    let s6 = sphere(6, 256);
    let r = total_q_identity_residual(&s6, &band_limited(&s6)).unwrap();
    assert!(r <= 1e-6, "{r:.3e}");
}
