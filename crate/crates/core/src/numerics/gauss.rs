//! Legendre polynomials and Gauss-Legendre rules.

use std::f64::consts::PI;

/// Value and derivative of P_n at x.
pub fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 1..n {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Values P_0(x)..P_{k-1}(x).
pub fn legendre_values(k: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(k);
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 0..k {
        p.push(match j {
            0 => p0,
            1 => p1,
            _ => {
                let jf = (j - 1) as f64;
                let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
                p0 = p1;
                p1 = p2;
                p1
            }
        });
    }
    p
}

/// Evaluate a Legendre series sum_j c_j P_j(x).
pub fn legendre_eval(coeffs: &[f64], x: f64) -> f64 {
    let p = legendre_values(coeffs.len(), x);
    coeffs.iter().zip(p.iter()).map(|(c, pj)| c * pj).sum()
}

/// Coefficients of the derivative of a Legendre series.
pub fn legendre_derivative_coeffs(coeffs: &[f64]) -> Vec<f64> {
    // P'_{j} contributes to P_{j-1}, P_{j-3}, ... with weight (2m+1).
    let k = coeffs.len();
    let mut d = vec![0.0; k];
    for j in 1..k {
        let mut m = j as isize - 1;
        while m >= 0 {
            d[m as usize] += (2.0 * m as f64 + 1.0) * coeffs[j];
            m -= 2;
        }
    }
    d
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration from the
/// Chebyshev initial guess.
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = -((PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos());
        for _ in 0..100 {
            let (p, dp) = legendre_pd(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pd(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = x;
        ws[i] = w;
        xs[n - 1 - i] = -x;
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
        let (_, dp) = legendre_pd(n, 0.0);
        ws[n / 2] = 2.0 / (dp * dp);
    }
    (xs, ws)
}

/// Interpolation matrix from samples at the k-node Gauss-Legendre points to
/// Legendre coefficients (row-major k x k), using discrete orthogonality of
/// the Gauss rule: c_j = (2j+1)/2 sum_i w_i f(x_i) P_j(x_i).
pub fn legendre_fit_matrix(k: usize) -> Vec<f64> {
    let (xs, ws) = legendre_rule(k);
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        let p = legendre_values(k, xs[i]);
        for j in 0..k {
            m[j * k + i] = (2.0 * j as f64 + 1.0) / 2.0 * ws[i] * p[j];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (xs, ws) = legendre_rule(10);
        assert!((ws.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // Degree 19 monomial: int x^18 = 2/19.
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn rule_integrates_smooth_function() {
        let (xs, ws) = legendre_rule(20);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.cos()).sum();
        assert!((s - 2.0 * 1.0f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn fit_matrix_recovers_series() {
        let k = 8;
        let m = legendre_fit_matrix(k);
        let (xs, _) = legendre_rule(k);
        let f: Vec<f64> = xs.iter().map(|&x| legendre_pd(3, x).0).collect();
        for j in 0..k {
            let cj: f64 = (0..k).map(|i| m[j * k + i] * f[i]).sum();
            let expect = if j == 3 { 1.0 } else { 0.0 };
            assert!((cj - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_coeffs_match_finite_difference() {
        let c = vec![0.3, -1.2, 0.8, 0.05, -0.4, 0.11];
        let d = legendre_derivative_coeffs(&c);
        let h = 1e-6;
        for &x in &[-0.7, 0.2, 0.6] {
            let fd = (legendre_eval(&c, x + h) - legendre_eval(&c, x - h)) / (2.0 * h);
            assert!((legendre_eval(&d, x) - fd).abs() < 1e-8);
        }
    }
}
