//! Brute-force reference implementations used for verification.
//!
//! Everything here trades speed for transparency: direct summation over
//! charges, dense per-leaf quadrature of patch sources, truncated image sums,
//! and theta-series products. The fast code paths are tested against these
//! routines, so they deliberately share no machinery with [`crate::fgt`].

use crate::numerics::quad;
use crate::treegrid::GridFunction;
use crate::{dist2, Point};

/// Direct sum of exp(-|x - y_j|^2 / delta) * q_j over all charges.
pub fn gauss_sum(charges: &[(Point, f64)], delta: f64, x: Point) -> f64 {
    charges.iter().map(|&(y, q)| q * (-dist2(x, y) / delta).exp()).sum()
}

/// Integral of exp(-|x - y|^2 / delta) f(y) dy over the support of `gf`,
/// computed leaf by leaf.
///
/// The kernel factors per axis, so on a leaf with coefficients c_{j1 j2} the
/// integral is sum_{j1,j2} c_{j1 j2} I_{j1}(x1) I_{j2}(x2) with 1D integrals
/// I_j(xi) = int exp(-(xi - yi)^2/delta) T_j((yi - c)/h) dyi evaluated by
/// adaptive quadrature.
pub fn gauss_integral(gf: &GridFunction, delta: f64, x: Point) -> f64 {
    let tree = &gf.tree;
    let k = tree.k;
    let mut total = 0.0;
    for &leaf in &tree.leaves() {
        let Some(patch) = gf.patches[leaf as usize].as_ref() else { continue };
        let c = tree.box_center(leaf);
        let h = tree.box_halfwidth(leaf);
        // Leaves where the kernel never exceeds e^-60 contribute below any
        // tolerance this oracle is used at.
        let dx = ((x[0] - c[0]).abs() - h).max(0.0);
        let dy = ((x[1] - c[1]).abs() - h).max(0.0);
        if dx * dx + dy * dy > 60.0 * delta {
            continue;
        }
        let ix = axis_integrals(x[0], c[0], h, delta, k);
        let iy = axis_integrals(x[1], c[1], h, delta, k);
        for j1 in 0..k {
            for j2 in 0..k {
                total += patch.coeffs[j1 * k + j2] * ix[j1] * iy[j2];
            }
        }
    }
    total
}

fn axis_integrals(xi: f64, c: f64, h: f64, delta: f64, k: usize) -> Vec<f64> {
    let tol = 1e-15 * (delta.sqrt() * std::f64::consts::PI.sqrt()).min(2.0 * h);
    // The kernel is below e^-60 outside this window, and splitting at the
    // peak keeps the adaptive recursion shallow when the Gaussian is narrow.
    let w = (60.0 * delta).sqrt();
    let lo = (c - h).max(xi - w);
    let hi = (c + h).min(xi + w);
    if lo >= hi {
        return vec![0.0; k];
    }
    let cuts: Vec<f64> = if xi > lo && xi < hi { vec![lo, xi, hi] } else { vec![lo, hi] };
    (0..k)
        .map(|j| {
            let f = |y: f64| {
                let d = xi - y;
                let t = crate::numerics::cheb::t_values(j + 1, (y - c) / h);
                (-d * d / delta).exp() * t[j]
            };
            cuts.windows(2).map(|ab| quad::adaptive(&f, ab[0], ab[1], tol)).sum()
        })
        .collect()
}

/// Boundary layer integral by adaptive quadrature over the curve parameter.
///
/// `pos` and `deriv` give the curve and its parameter derivative on
/// [0, 2 pi); `sigma` is the density in the same parameter. The single-layer
/// kernel exp(-|x - y|^2 / delta) is used, or its outward-normal y-derivative
/// when `double` is set. The range is pre-split into `splits` panels so the
/// adaptive rule cannot step over a narrow kernel peak.
pub fn boundary_gauss(
    pos: &dyn Fn(f64) -> Point,
    deriv: &dyn Fn(f64) -> Point,
    sigma: &dyn Fn(f64) -> f64,
    delta: f64,
    x: Point,
    double: bool,
    splits: usize,
    tol: f64,
) -> f64 {
    let f = |u: f64| {
        let y = pos(u);
        let d = deriv(u);
        let speed = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let g = (-dist2(x, y) / delta).exp();
        let k = if double {
            // Outward normal of a positively oriented curve.
            let nu = [d[1] / speed, -d[0] / speed];
            2.0 * ((x[0] - y[0]) * nu[0] + (x[1] - y[1]) * nu[1]) / delta * g
        } else {
            g
        };
        k * sigma(u) * speed
    };
    let full = 2.0 * std::f64::consts::PI;
    let mut total = 0.0;
    for i in 0..splits {
        let a = full * i as f64 / splits as f64;
        let b = full * (i + 1) as f64 / splits as f64;
        total += quad::adaptive(&f, a, b, tol / splits as f64);
    }
    total
}

/// Periodic direct sum over charges with images |j|_inf <= `images` on the
/// unit lattice.
pub fn gauss_sum_periodic(charges: &[(Point, f64)], delta: f64, x: Point, images: i64) -> f64 {
    let mut total = 0.0;
    for jx in -images..=images {
        for jy in -images..=images {
            let xs = [x[0] + jx as f64, x[1] + jy as f64];
            total += gauss_sum(charges, delta, xs);
        }
    }
    total
}

/// Periodic dense quadrature of a patch source with images |j|_inf <= `images`.
pub fn gauss_integral_periodic(gf: &GridFunction, delta: f64, x: Point, images: i64) -> f64 {
    let mut total = 0.0;
    for jx in -images..=images {
        for jy in -images..=images {
            let xs = [x[0] + jx as f64, x[1] + jy as f64];
            total += gauss_integral(gf, delta, xs);
        }
    }
    total
}

/// One-dimensional theta sum sum_{j in Z} exp(-(d - j)^2 / delta), truncated
/// when terms fall below 1e-18 of the running total.
pub fn theta1d(delta: f64, d: f64) -> f64 {
    let d = d - d.round();
    let mut total = (-d * d / delta).exp();
    let mut j = 1i64;
    loop {
        let a = d - j as f64;
        let b = d + j as f64;
        let term = (-a * a / delta).exp() + (-b * b / delta).exp();
        total += term;
        if term < 1e-18 * total || j > 10_000 {
            return total;
        }
        j += 1;
    }
}

/// Fully periodized Gaussian kernel on the unit lattice as a product of 1D
/// theta sums.
pub fn periodic_kernel(delta: f64, x: Point, y: Point) -> f64 {
    theta1d(delta, x[0] - y[0]) * theta1d(delta, x[1] - y[1])
}
