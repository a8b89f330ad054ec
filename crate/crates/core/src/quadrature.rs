//! Chebyshev-Gauss angles, interpolatory weights for `sin^p(theta) dtheta`,
//! and barycentric differentiation in `x = cos(theta)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math::{cos, sin, PI};

/// `theta_j = (j + 1/2) pi / n`, ascending; the poles are never nodes.
pub fn chebyshev_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| (j as f64 + 0.5) * PI / n as f64).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// `mu_k = int_0^pi cos(k theta) sin^p(theta) dtheta` for `k < count`, from
/// the finite Fourier expansion of `sin^p`.
pub fn sine_power_moments(p: usize, count: usize) -> Vec<f64> {
    let mut mu = vec![0.0; count];
    let scale = libm::ldexp(1.0, -(p as i32));
    if p.is_multiple_of(2) {
        // sin^p = 2^-p [C(p,p/2) + 2 sum_j (-1)^(p/2-j) C(p,j) cos((p-2j) theta)]
        let half = p / 2;
        if count > 0 {
            mu[0] = scale * binomial(p, half) * PI;
        }
        for j in 0..half {
            let l = p - 2 * j;
            if l < count {
                let sign = if (half - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                mu[l] += scale * 2.0 * sign * binomial(p, j) * PI / 2.0;
            }
        }
    } else {
        // sin^p = 2^(1-p) sum_j (-1)^((p-1)/2-j) C(p,j) sin((p-2j) theta)
        let half = (p - 1) / 2;
        for j in 0..=half {
            let l = (p - 2 * j) as i64;
            let sign = if (half - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            let c = 2.0 * scale * sign * binomial(p, j);
            for (k, m) in mu.iter_mut().enumerate() {
                let k = k as i64;
                if (l + k) % 2 == 1 {
                    *m += c * (2 * l) as f64 / (l * l - k * k) as f64;
                }
            }
        }
    }
    mu
}

/// Weights `w_j` with `sum_j w_j f(theta_j) = int_0^pi f sin^p dtheta` for every
/// `f` that is a polynomial of degree `< n` in `cos(theta)`.
pub fn interpolatory_weights(theta: &[f64], p: usize) -> Vec<f64> {
    let n = theta.len();
    let mu = sine_power_moments(p, n);
    theta
        .iter()
        .map(|&t| {
            let mut s = mu[0];
            for (k, m) in mu.iter().enumerate().skip(1) {
                if *m != 0.0 {
                    s += 2.0 * m * cos(k as f64 * t);
                }
            }
            s / n as f64
        })
        .collect()
}

/// First and second derivative matrices in `x = cos(theta)` on the given
/// Chebyshev-Gauss angles. Node differences are formed from half-angle sines
/// so that clustered nodes near the poles keep full relative accuracy.
pub fn differentiation_matrices(theta: &[f64]) -> (Matrix, Matrix) {
    let n = theta.len();
    let bary: Vec<f64> = theta.iter().enumerate().map(|(j, &t)| if j % 2 == 0 { sin(t) } else { -sin(t) }).collect();
    let mut d1 = Matrix::zeros(n, n);
    let mut d2 = Matrix::zeros(n, n);
    let mut inv_diff = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = -2.0 * sin(0.5 * (theta[i] + theta[j])) * sin(0.5 * (theta[i] - theta[j]));
                inv_diff[(i, j)] = 1.0 / dx;
                d1[(i, j)] = bary[j] / bary[i] / dx;
            }
        }
        let s: f64 = d1.row(i).iter().sum();
        d1[(i, i)] = -s;
    }
    for i in 0..n {
        let dii = d1[(i, i)];
        for j in 0..n {
            if i != j {
                d2[(i, j)] = 2.0 * d1[(i, j)] * (dii - inv_diff[(i, j)]);
            }
        }
        let s: f64 = d2.row(i).iter().sum();
        d2[(i, i)] = -s;
    }
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_direct_values() {
        // int sin^5 = 16/15, int cos(2t) sin^5 = -16/21.
        let mu = sine_power_moments(5, 4);
        assert!((mu[0] - 16.0 / 15.0).abs() < 1e-14);
        assert!(mu[1].abs() < 1e-14);
        assert!((mu[2] + 16.0 / 21.0).abs() < 1e-14);
        let mu = sine_power_moments(2, 3);
        assert!((mu[0] - PI / 2.0).abs() < 1e-14);
        assert!((mu[2] + PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn weights_integrate_polynomials() {
        let th = chebyshev_angles(16);
        let w = interpolatory_weights(&th, 5);
        // int x^2 sin^5 dtheta = int_{-1}^{1} x^2 (1-x^2)^2 dx = 16/105
        let s: f64 = th.iter().zip(&w).map(|(t, w)| w * cos(*t) * cos(*t)).sum();
        assert!((s - 16.0 / 105.0).abs() < 1e-14);
        assert!(w.iter().all(|&v| v > 0.0));
    }
}
