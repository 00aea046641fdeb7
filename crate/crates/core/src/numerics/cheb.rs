//! One-dimensional Chebyshev interpolation on first-kind points.
//!
//! Leaf patches are tensor products of these 1D objects; everything here works
//! on the reference interval [-1, 1].

use std::f64::consts::PI;

/// First-kind Chebyshev points in ascending order:
/// x_i = -cos((i + 1/2) pi / k), i = 0..k-1.
pub fn nodes(k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| -((i as f64 + 0.5) * PI / k as f64).cos())
        .collect()
}

/// Values T_j(x) for j = 0..k-1 by the three-term recurrence.
pub fn t_values(k: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(k);
    let mut t0 = 1.0;
    let mut t1 = x;
    for j in 0..k {
        t.push(match j {
            0 => t0,
            1 => t1,
            _ => {
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
                t1
            }
        });
    }
    t
}

/// Row-major k x k matrix M with c = M f mapping node samples (ascending node
/// order) to Chebyshev coefficients, using the discrete orthogonality of
/// first-kind points: c_j = (2 - delta_{j0})/k * sum_i f(x_i) T_j(x_i).
pub fn fit_matrix(k: usize) -> Vec<f64> {
    let xs = nodes(k);
    let mut m = vec![0.0; k * k];
    for (i, &x) in xs.iter().enumerate() {
        let t = t_values(k, x);
        for j in 0..k {
            let scale = if j == 0 { 1.0 } else { 2.0 } / k as f64;
            m[j * k + i] = scale * t[j];
        }
    }
    m
}

/// Evaluate sum_j c_j T_j(x) by the Clenshaw recurrence.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + x * b1 - b2
}

/// Coefficients of the derivative series: if f = sum c_j T_j then
/// f' = sum d_j T_j with the standard backward recurrence.
pub fn derivative_coeffs(coeffs: &[f64]) -> Vec<f64> {
    let k = coeffs.len();
    let mut d = vec![0.0; k];
    if k < 2 {
        return d;
    }
    d[k - 2] = 2.0 * (k - 1) as f64 * coeffs[k - 1];
    for j in (0..k.saturating_sub(2)).rev() {
        let upper = if j + 2 < k { d[j + 2] } else { 0.0 };
        d[j] = upper + 2.0 * (j + 1) as f64 * coeffs[j + 1];
    }
    d[0] *= 0.5;
    d
}

/// Fejer-1 quadrature weights for the first-kind points returned by [`nodes`]:
/// positive, and exact for polynomials of degree < k on [-1, 1].
pub fn fejer1_weights(k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            let theta = (i as f64 + 0.5) * PI / k as f64;
            let mut s = 0.0;
            for m in 1..=(k / 2) {
                s += (2.0 * m as f64 * theta).cos() / (4.0 * (m * m) as f64 - 1.0);
            }
            2.0 / k as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

/// Exact integrals m[a][j] = int_{-1}^{1} u^a T_j(u) du for a <= amax, j < k.
///
/// Computed by Gauss-Legendre quadrature with enough nodes to be exact for
/// polynomials of degree amax + k.
pub fn monomial_t_integrals(amax: usize, k: usize) -> Vec<Vec<f64>> {
    let n = (amax + k) / 2 + 2;
    let (xs, ws) = super::gauss::legendre_rule(n);
    let mut out = vec![vec![0.0; k]; amax + 1];
    for (&x, &w) in xs.iter().zip(ws.iter()) {
        let t = t_values(k, x);
        let mut xa = 1.0;
        for a in 0..=amax {
            for j in 0..k {
                out[a][j] += w * xa * t[j];
            }
            xa *= x;
        }
    }
    out
}
