//! Shared numerical kernels: Chebyshev and Legendre machinery, Gauss-Legendre
//! rules, adaptive quadrature, and the special functions used by the layer
//! potential asymptotics.

pub mod cheb;
pub mod gauss;
pub mod quad;
pub mod special;

/// Binomial coefficient as f64, valid well past the expansion orders used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
