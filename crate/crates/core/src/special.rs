//! Error-function helpers that stay accurate far in the tails.

use std::f64::consts::PI;

/// `ln(erfc(z))`, finite for every finite `z`.
pub fn ln_erfc(z: f64) -> f64 {
    if z < 3.0 {
        return libm::erfc(z).ln();
    }
    // erfc(z) = exp(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    let mut tail = z;
    for k in (1..=80).rev() {
        tail = z + (k as f64 / 2.0) / tail;
    }
    -z * z - 0.5 * PI.ln() - tail.ln()
}

/// `ln(erfc(a) - erfc(b))` for `a < b`.
pub fn ln_erfc_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if a >= 0.0 {
        let la = ln_erfc(a);
        let lb = ln_erfc(b);
        la + (-(lb - la).exp_m1()).ln()
    } else if b <= 0.0 {
        // erfc(a) - erfc(b) = erfc(-b) - erfc(-a)
        ln_erfc_diff(-b, -a)
    } else {
        (libm::erf(b) - libm::erf(a)).ln()
    }
}
