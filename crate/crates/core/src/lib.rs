//! # heatpot
//!
//! Solvers for the two-dimensional heat equation built on parabolic potential
//! theory. Initial, volume, and layer heat potentials are evaluated by fast
//! Gauss transforms over level-restricted adaptive quadtrees, and those
//! evaluators power two time-stepping drivers:
//!
//! - implicit Adams-Moulton marching for periodic semilinear problems
//!   u_t = Laplace(u) + F(u, x, t) with per-step spatial adaptivity, and
//! - Volterra marching of the double-layer density for Dirichlet problems in
//!   stationary, moving, or periodic geometries.
//!
//! The crate is organized as:
//!
//! - [`treegrid`]: quadtrees with tensor-product Chebyshev leaf patches,
//!   refinement, balancing, and interaction lists;
//! - [`fgt`]: the hierarchical fast Gauss transform (free-space and periodic)
//!   plus the free-space grid extension rule;
//! - [`boundary`]: time-dependent boundaries as Legendre panels and the
//!   boundary Gauss transform with near-singular corrections;
//! - [`potentials`]: heat-potential evaluators with the local / near-history /
//!   far-history time splitting;
//! - [`solvers`]: Adams-Moulton and Dirichlet marching drivers;
//! - [`problems`]: built-in example problems used by the CLI and tests;
//! - [`oracle`]: brute-force reference implementations (direct summation,
//!   adaptive space-time quadrature) used for verification only.

#![warn(missing_docs)]

pub mod boundary;
pub mod error;
pub mod fgt;
pub mod numerics;
pub mod oracle;
pub mod potentials;
pub mod solvers;
pub mod treegrid;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];

pub(crate) fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}
