//! Legendre polynomials: Gauss–Legendre rules, derivative evaluation and
//! exact Chebyshev <-> Legendre connection coefficients.

use std::f64::consts::PI;

use super::{Grid, GridKind};
use crate::error::{Error, Result};

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Grid, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidBasis(
            "Gauss-Legendre rule needs n >= 1".to_string(),
        ));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Roots of P_n, largest first, refined by Newton.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_and_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((
        Grid {
            points: nodes,
            kind: GridKind::GaussLegendre,
        },
        weights,
    ))
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Values of `P_k^{(deriv)}(x)` for `k = 0..=n`.
pub fn eval_derivative(n: usize, x: f64, deriv: usize) -> Vec<f64> {
    let mut table = vec![vec![0.0; n + 1]; deriv + 1];
    for d in 0..=deriv {
        let (lower, cur) = if d == 0 {
            (None, &mut table[0])
        } else {
            let (lo, hi) = table.split_at_mut(d);
            (Some(&lo[d - 1]), &mut hi[0])
        };
        cur[0] = if d == 0 { 1.0 } else { 0.0 };
        if n >= 1 {
            cur[1] = match d {
                0 => x,
                1 => 1.0,
                _ => 0.0,
            };
        }
        for k in 1..n {
            let kf = k as f64;
            let prev_d = lower.map_or(0.0, |l| l[k]);
            cur[k + 1] = ((2.0 * kf + 1.0) * (x * cur[k] + d as f64 * prev_d) - kf * cur[k - 1])
                / (kf + 1.0);
        }
    }
    table.pop().unwrap()
}

/// Evaluate a Legendre series at `x`.
pub fn eval_series(coeffs: &[f64], x: f64) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    eval_derivative(coeffs.len() - 1, x, 0)
        .iter()
        .zip(coeffs)
        .map(|(p, c)| p * c)
        .sum()
}

/// `Gamma(z + 1/2) / Gamma(z + 1)` tabulated at `z = j / 2`, `j = 0..len`.
fn lambda_table(len: usize) -> Vec<f64> {
    let mut table = vec![0.0; len.max(2)];
    table[0] = PI.sqrt();
    table[1] = 2.0 / PI.sqrt();
    for j in 2..table.len() {
        let z = (j as f64 - 2.0) / 2.0;
        table[j] = table[j - 2] * (z + 0.5) / (z + 1.0);
    }
    table
}

/// Legendre coefficients of the polynomial with Chebyshev coefficients `c`.
///
/// Uses the closed-form connection coefficients, `O(n^2)` and exact up to
/// roundoff.
pub fn cheb_to_legendre(c: &[f64]) -> Vec<f64> {
    let len = c.len();
    if len == 0 {
        return Vec::new();
    }
    let lam = lambda_table(2 * len + 2);
    let at = |twice_z: usize| lam[twice_z];
    let mut out = vec![0.0; len];
    for (n, slot) in out.iter_mut().enumerate() {
        let nf = n as f64;
        let mut acc = 0.0;
        for k in (n..len).step_by(2) {
            let weight = if k == n {
                if n == 0 {
                    1.0
                } else {
                    PI.sqrt() / (2.0 * at(2 * n))
                }
            } else {
                let kf = k as f64;
                // Lambda((k - n - 2) / 2) * Lambda((k + n - 1) / 2)
                -kf * (nf + 0.5) / ((kf + nf + 1.0) * (kf - nf)) * at(k - n - 2) * at(k + n - 1)
            };
            acc += weight * c[k];
        }
        *slot = acc;
    }
    out
}

/// Chebyshev coefficients of the polynomial with Legendre coefficients `a`.
pub fn legendre_to_cheb(a: &[f64]) -> Vec<f64> {
    let len = a.len();
    if len == 0 {
        return Vec::new();
    }
    let lam = lambda_table(2 * len + 2);
    let mut out = vec![0.0; len];
    for (k, slot) in out.iter_mut().enumerate() {
        let scale = if k == 0 { 1.0 / PI } else { 2.0 / PI };
        let mut acc = 0.0;
        for n in (k..len).step_by(2) {
            acc += scale * lam[n - k] * lam[n + k] * a[n];
        }
        *slot = acc;
    }
    out
}
