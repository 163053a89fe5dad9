//! Chebyshev grids, the modal/cardinal cosine transform, and derivative
//! evaluation of Chebyshev polynomials.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{BasisId, Grid, GridKind, TransformMatrix};
use crate::error::{Error, Result};

/// The `n + 1` Chebyshev points `-cos(i pi / n)`, ascending.
///
/// Computed as `sin(pi (2i - n) / (2n))`, which makes the grid exactly
/// antisymmetric about zero and pins the endpoints to -1 and 1.
pub fn chebyshev_points(n: usize) -> Result<Grid> {
    if n == 0 {
        return Err(Error::InvalidBasis(
            "Chebyshev grid needs n >= 1".to_string(),
        ));
    }
    let nf = n as f64;
    let points = (0..=n)
        .map(|i| (PI * (2.0 * i as f64 - nf) / (2.0 * nf)).sin())
        .collect();
    Ok(Grid {
        points,
        kind: GridKind::Chebyshev,
    })
}

/// `cos(m pi / n)` with the argument reduced mod `2n` first, so large
/// products `i * j` do not lose accuracy.
fn cos_pi_frac(m: usize, n: usize) -> f64 {
    let r = m % (2 * n);
    (PI * r as f64 / n as f64).cos()
}

/// `F_ij = T_j(x_i)` on the ascending grid `x_i = -cos(i pi / n)`.
///
/// Since `T_j(-cos t) = (-1)^j cos(j t)`, each entry is
/// `(-1)^j cos(i j pi / n)`. `F` maps modal coefficients to grid values.
pub fn cardinal_transform(n: usize) -> Result<TransformMatrix> {
    if n == 0 {
        return Err(Error::InvalidBasis(
            "cardinal transform needs n >= 1".to_string(),
        ));
    }
    let matrix = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * cos_pi_frac(i * j, n)
    });
    Ok(TransformMatrix {
        matrix,
        from: BasisId::new("chebyshev-modal", n),
        to: BasisId::new("chebyshev-cardinal", n),
    })
}

/// Explicit inverse of [`cardinal_transform`] from the DCT-I relations:
/// `(F^-1)_ji = 2 F_ij / (n c_i c_j)` with `c_0 = c_n = 2`, otherwise 1.
pub fn inverse_cardinal_transform(n: usize) -> Result<TransformMatrix> {
    let f = cardinal_transform(n)?;
    let c = |k: usize| if k == 0 || k == n { 2.0 } else { 1.0 };
    let nf = n as f64;
    let matrix = DMatrix::from_fn(n + 1, n + 1, |j, i| {
        2.0 * f.matrix[(i, j)] / (nf * c(i) * c(j))
    });
    Ok(TransformMatrix {
        matrix,
        from: f.to,
        to: f.from,
    })
}

/// Values of `T_k^{(deriv)}(x)` for `k = 0..=n`, returned as a vector
/// indexed by `k`.
pub fn eval_derivative(n: usize, x: f64, deriv: usize) -> Vec<f64> {
    // table[d][k] = T_k^{(d)}(x)
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
            let prev_d = lower.map_or(0.0, |l| l[k]);
            cur[k + 1] = 2.0 * x * cur[k] + 2.0 * d as f64 * prev_d - cur[k - 1];
        }
    }
    table.pop().unwrap()
}

/// Clenshaw evaluation of a Chebyshev series.
pub fn eval_series(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// Chebyshev coefficients of the derivative of a Chebyshev series.
pub fn differentiate_series(coeffs: &[f64]) -> Vec<f64> {
    let len = coeffs.len();
    if len <= 1 {
        return vec![0.0; len.max(1)];
    }
    let n = len - 1;
    let mut out = vec![0.0; len];
    // c'_{k-1} = c'_{k+1} + 2 k c_k, with the k = 0 term halved.
    for k in (1..=n).rev() {
        let next = if k < n { out[k + 1] } else { 0.0 };
        out[k - 1] = next + 2.0 * k as f64 * coeffs[k];
    }
    out[0] *= 0.5;
    out[n] = 0.0;
    out
}

/// `int_{-1}^{1} T_k dx`.
pub fn integral(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        let kf = k as f64;
        2.0 / (1.0 - kf * kf)
    }
}

/// Closed-form Gram matrix `<T_i, T_j>` on `[-1, 1]`.
pub fn modal_gram(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if (i + j) % 2 == 1 {
            return 0.0;
        }
        let (i, j) = (i as f64, j as f64);
        let s = i + j;
        let d = i - j;
        -2.0 * (i * i + j * j - 1.0) / ((s * s - 1.0) * (d * d - 1.0))
    })
}

/// Closed-form `<T_i, T_j'>` on `[-1, 1]`: `2 j^2 / (j^2 - i^2)` for
/// `i - j` odd, zero otherwise.
pub fn modal_derivative_matrix(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidBasis(
            "Chebyshev operator matrix needs n >= 1".to_string(),
        ));
    }
    Ok(DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if (i + j) % 2 == 0 {
            return 0.0;
        }
        let (i, j) = (i as f64, j as f64);
        2.0 * j * j / (j * j - i * i)
    }))
}

/// Clenshaw–Curtis weights on the `n + 1` point Chebyshev grid.
pub fn clenshaw_curtis_weights(n: usize) -> Result<Vec<f64>> {
    let finv = inverse_cardinal_transform(n)?;
    Ok((0..=n)
        .map(|j| (0..=n).map(|m| finv.matrix[(m, j)] * integral(m)).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn points_n3() {
        let g = chebyshev_points(3).unwrap();
        let expected = [-1.0, -0.5, 0.5, 1.0];
        for (x, e) in g.points.iter().zip(expected) {
            assert_abs_diff_eq!(*x, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn points_n1_and_symmetry() {
        assert_eq!(chebyshev_points(1).unwrap().points, vec![-1.0, 1.0]);
        let g = chebyshev_points(8).unwrap();
        for i in 0..=8 {
            assert_eq!(g.points[i], -g.points[8 - i]);
            let reference = -(i as f64 * PI / 8.0).cos();
            assert_abs_diff_eq!(g.points[i], reference, epsilon = 1e-14);
        }
        assert!(chebyshev_points(0).is_err());
    }

    #[test]
    fn transform_structure() {
        let f = cardinal_transform(5).unwrap();
        for i in 0..=5 {
            assert_eq!(f.matrix[(i, 0)], 1.0);
        }
        let f3 = cardinal_transform(3).unwrap();
        let row: Vec<f64> = f3.matrix.row(0).iter().copied().collect();
        assert_eq!(row, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn explicit_inverse_matches_dense_solve() {
        let n = 8;
        let f = cardinal_transform(n).unwrap().matrix;
        let finv = inverse_cardinal_transform(n).unwrap().matrix;
        let product = &f * &finv;
        assert!((product - DMatrix::identity(n + 1, n + 1)).amax() < 1e-12);
        let solved = f.clone().lu().try_inverse().unwrap();
        assert!((solved - finv).amax() < 1e-12);
    }

    #[test]
    fn derivative_recurrence_matches_series_derivative() {
        let n = 7;
        let x = 0.37;
        for d in 0..4 {
            let vals = eval_derivative(n, x, d);
            for k in 0..=n {
                let mut c = vec![0.0; k + 1];
                c[k] = 1.0;
                for _ in 0..d {
                    c = differentiate_series(&c);
                }
                assert_abs_diff_eq!(vals[k], eval_series(&c, x), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cc_weights_sum_to_two() {
        let w = clenshaw_curtis_weights(2).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 4.0 / 3.0, epsilon = 1e-15);
        let w16 = clenshaw_curtis_weights(16).unwrap();
        assert_abs_diff_eq!(w16.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }
}
