//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use kpp_core::solver::Field;
use nalgebra::{DMatrix, DVector};

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rule<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = rule(f, a, fa, m, fm);
        let (rm, frm, right) = rule(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = rule(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 60)
}

/// Heat-kernel mass of `(-1, 0)` at `x` after time `t`, by quadrature.
pub fn heat_band_by_quadrature(t: f64, x: f64) -> f64 {
    let kernel = |y: f64| (-(x - y).powi(2) / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
    simpson(&kernel, -1.0, 0.0, 1e-13)
}

/// `(d_t - d_xx) f / f` by fourth-order central differences with step `h`.
pub fn heat_operator_ratio<F: Fn(f64, f64) -> f64>(f: F, t: f64, x: f64, h: f64) -> f64 {
    let v = f(t, x);
    let dt = (-f(t + 2.0 * h, x) + 8.0 * f(t + h, x) - 8.0 * f(t - h, x) + f(t - 2.0 * h, x)) / (12.0 * h);
    let dxx =
        (-f(t, x + 2.0 * h) + 16.0 * f(t, x + h) - 30.0 * v + 16.0 * f(t, x - h) - f(t, x - 2.0 * h)) / (12.0 * h * h);
    (dt - dxx) / v
}

/// Dense `(I - a L) u1 = (I + b L) u0 + dt mu u0 (1 - u0) + boundary`, with
/// `L` the Dirichlet second difference, `a = theta lambda`, `b = (1 - theta) lambda`.
pub fn dense_density_step(field: &Field, mu: &[f64], dt: f64, theta: f64) -> Vec<f64> {
    let n = field.len();
    let lam = dt / (field.dx * field.dx);
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        lap[(i, i)] = -2.0;
        if i > 0 {
            lap[(i, i - 1)] = 1.0;
        }
        if i + 1 < n {
            lap[(i, i + 1)] = 1.0;
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let u0 = DVector::from_column_slice(&field.values);
    let mut rhs = (&id + &lap * ((1.0 - theta) * lam)) * &u0;
    for i in 0..n {
        rhs[i] += dt * mu[i] * u0[i] * (1.0 - u0[i]);
    }
    rhs[0] += lam * field.left_value;
    let a = &id - &lap * (theta * lam);
    a.lu().solve(&rhs).unwrap().iter().copied().collect()
}

/// Deterministic test profile in `[0, 1]`: a ramp, a bump and noise.
pub fn random_field(seed: u64, n: usize, x_left: f64, dx: f64) -> Field {
    // decreasing profile with a bump, in [0, 1]
    let mut state = seed;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let values = (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            (0.5 * (1.0 - x) + 0.3 * (-(x - 0.6f64).powi(2) * 50.0).exp() + 0.2 * next()).min(1.0)
        })
        .collect();
    Field::new(0.0, x_left, dx, values, 1.0)
}
