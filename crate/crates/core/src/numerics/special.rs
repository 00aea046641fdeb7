//! Special functions for the layer-potential asymptotics.

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Exponential integral of order 3/2:
/// E_{3/2}(x) = int_1^inf e^{-x t} t^{-3/2} dt = 2 e^{-x} - 2 sqrt(pi x) erfc(sqrt(x)).
pub fn e32(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return 2.0;
    }
    let s = x.sqrt();
    2.0 * (-x).exp() - 2.0 * std::f64::consts::PI.sqrt() * s * erfc(s)
}
