//! Trigonometric polynomials of degree `n` on `[0, 2 pi)`.
//!
//! The spectral basis is `1/sqrt(2), cos x, sin x, cos 2x, sin 2x, ...`, so
//! its Gram matrix is `pi * I`. The cardinal basis lives on the `2n + 1`
//! equispaced points `2 pi k / (2n + 1)` and has Gram matrix
//! `(2 pi / (2n + 1)) * I`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

/// Number of basis functions for degree `n`.
pub fn dimension(n: usize) -> usize {
    2 * n + 1
}

/// Equispaced grid of `2n + 1` points on `[0, 2 pi)`.
pub fn grid_points(n: usize) -> Vec<f64> {
    let m = dimension(n);
    (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect()
}

/// `d^deriv/dx^deriv cos(k x)` and `sin(k x)`.
fn trig_derivative(k: usize, x: f64, deriv: usize) -> (f64, f64) {
    let kf = k as f64;
    let scale = kf.powi(deriv as i32);
    let (s, c) = (kf * x).sin_cos();
    match deriv % 4 {
        0 => (scale * c, scale * s),
        1 => (-scale * s, scale * c),
        2 => (-scale * c, -scale * s),
        _ => (scale * s, -scale * c),
    }
}

/// Derivatives of the spectral basis functions at `x`, in basis order.
pub fn eval_spectral(n: usize, x: f64, deriv: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dimension(n));
    out.push(if deriv == 0 { FRAC_1_SQRT_2 } else { 0.0 });
    for k in 1..=n {
        let (c, s) = trig_derivative(k, x, deriv);
        out.push(c);
        out.push(s);
    }
    out
}

/// Derivatives of the cardinal (Dirichlet kernel) basis functions at `x`.
pub fn eval_cardinal(n: usize, x: f64, deriv: usize) -> Vec<f64> {
    let m = dimension(n);
    let mf = m as f64;
    grid_points(n)
        .iter()
        .map(|&xk| {
            let mut acc = if deriv == 0 { 1.0 } else { 0.0 };
            for k in 1..=n {
                acc += 2.0 * trig_derivative(k, x - xk, deriv).0;
            }
            acc / mf
        })
        .collect()
}

/// Complex modes `c_k`, `k = -n..=n` stored at index `k + n`, of a real
/// spectral-basis coefficient vector.
pub fn spectral_to_modes(coeffs: &[f64]) -> Vec<Complex64> {
    let n = (coeffs.len() - 1) / 2;
    let mut modes = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
    modes[n] = Complex64::new(coeffs[0] * FRAC_1_SQRT_2, 0.0);
    for k in 1..=n {
        let a = coeffs[2 * k - 1];
        let b = coeffs[2 * k];
        modes[n + k] = Complex64::new(a / 2.0, -b / 2.0);
        modes[n - k] = Complex64::new(a / 2.0, b / 2.0);
    }
    modes
}

/// Inverse of [`spectral_to_modes`]; imaginary parts of conjugate-symmetric
/// input are discarded.
pub fn modes_to_spectral(modes: &[Complex64]) -> Vec<f64> {
    let n = (modes.len() - 1) / 2;
    let mut coeffs = vec![0.0; 2 * n + 1];
    coeffs[0] = modes[n].re / FRAC_1_SQRT_2;
    for k in 1..=n {
        let plus = modes[n + k];
        let minus = modes[n - k];
        coeffs[2 * k - 1] = plus.re + minus.re;
        coeffs[2 * k] = minus.im - plus.im;
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cardinal_is_kronecker_on_grid() {
        let n = 4;
        for (i, &x) in grid_points(n).iter().enumerate() {
            let v = eval_cardinal(n, x, 0);
            for (j, vj) in v.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(*vj, e, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn mode_conversion_round_trip() {
        let coeffs = vec![0.3, -1.0, 2.0, 0.5, 0.25];
        let back = modes_to_spectral(&spectral_to_modes(&coeffs));
        for (a, b) in coeffs.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivative_phases() {
        let x = 0.7;
        let d1 = eval_spectral(2, x, 1);
        assert_abs_diff_eq!(d1[3], -2.0 * (2.0 * x).sin(), epsilon = 1e-14);
        let d3 = eval_spectral(2, x, 3);
        assert_abs_diff_eq!(d3[1], x.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(d3[2], -x.cos(), epsilon = 1e-14);
    }
}
