//! Fast exact Galerkin application of operators that are linear in `u`.
//!
//! Fourier: zero-padded FFT products, truncated back to degree `n`. Since the
//! spectral basis is orthogonal, truncation is the Galerkin projection.
//!
//! Chebyshev: products are formed on the `2n + 1` point grid, where they are
//! exact, converted to a Legendre series and truncated to `n + 1` terms.
//! Legendre truncation is the L2 projection onto `P_n`, so the result equals
//! `S^-1 A(u) v` in the cardinal basis without forming either matrix.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::assembly::{OperatorSpec, OperatorTerm};
use crate::basis::{chebyshev, fourier, legendre};
use crate::error::{Error, Result};

#[derive(Clone)]
enum Transforms {
    Fourier {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    Chebyshev {
        /// Modal to values on the `n + 1` grid, and its inverse.
        f_n: DMatrix<f64>,
        finv_n: DMatrix<f64>,
        /// Same on the `2n + 1` point grid.
        f_2n: DMatrix<f64>,
        finv_2n: DMatrix<f64>,
    },
}

/// Transforms and scratch storage for repeated fast applications at a fixed
/// degree. Not shared between threads; give each caller its own.
#[derive(Clone)]
pub struct PaddedWorkspace {
    n: usize,
    padded: usize,
    transforms: Transforms,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for PaddedWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.transforms {
            Transforms::Fourier { .. } => "fourier",
            Transforms::Chebyshev { .. } => "chebyshev",
        };
        f.debug_struct("PaddedWorkspace")
            .field("kind", &kind)
            .field("n", &self.n)
            .field("padded", &self.padded)
            .finish()
    }
}

/// Smallest `2^a 3^b 5^c` that is at least `m`.
fn smooth_size(m: usize) -> usize {
    let mut k = m.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

impl PaddedWorkspace {
    /// Workspace for degree-`n` trigonometric data. The FFT length is at
    /// least `3n + 1`, enough that products of two degree-`n` functions do
    /// not alias into modes `|k| <= n`.
    pub fn fourier(n: usize) -> Self {
        let padded = smooth_size(3 * n + 1);
        let mut planner = FftPlanner::new();
        Self {
            n,
            padded,
            transforms: Transforms::Fourier {
                forward: planner.plan_fft_forward(padded),
                inverse: planner.plan_fft_inverse(padded),
            },
            scratch: vec![Complex64::new(0.0, 0.0); padded],
        }
    }

    /// Workspace for degree-`n` polynomial data on the Chebyshev grid.
    pub fn chebyshev(n: usize) -> Result<Self> {
        let f = chebyshev::cardinal_transform(n)?;
        let finv = chebyshev::inverse_cardinal_transform(n)?;
        let f2 = chebyshev::cardinal_transform(2 * n)?;
        let finv2 = chebyshev::inverse_cardinal_transform(2 * n)?;
        Ok(Self {
            n,
            padded: 2 * n + 1,
            transforms: Transforms::Chebyshev {
                f_n: f.matrix,
                finv_n: finv.matrix,
                f_2n: f2.matrix,
                finv_2n: finv2.matrix,
            },
            scratch: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn padded_len(&self) -> usize {
        self.padded
    }
}

fn check_op(op: &OperatorSpec) -> Result<()> {
    op.validate()?;
    if op.is_block() {
        return Err(Error::UnsupportedTerm(
            "fast application needs a scalar operator linear in u".to_string(),
        ));
    }
    Ok(())
}

fn check_len(expected: usize, v: &DVector<f64>) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// `(i k)^order`.
fn ik_pow(k: i64, order: usize) -> Complex64 {
    Complex64::new(0.0, k as f64).powu(order as u32)
}

/// Galerkin projection of `D(u) v` onto trigonometric polynomials of degree
/// `n`, in spectral-basis coefficients. Equals `S^-1 A(u) v` for the
/// spectral basis.
pub fn antialiased_apply_fourier(
    ws: &mut PaddedWorkspace,
    op: &OperatorSpec,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_op(op)?;
    let n = ws.n;
    let dim = fourier::dimension(n);
    check_len(dim, u)?;
    check_len(dim, v)?;
    let m = ws.padded;
    let (forward, inverse) = match &ws.transforms {
        Transforms::Fourier { forward, inverse } => (forward.clone(), inverse.clone()),
        Transforms::Chebyshev { .. } => {
            return Err(Error::IncompatibleSpaces(
                "Chebyshev workspace used for Fourier data".to_string(),
            ))
        }
    };
    let um = fourier::spectral_to_modes(u.as_slice());
    let vm = fourier::spectral_to_modes(v.as_slice());
    let mut out = vec![Complex64::new(0.0, 0.0); dim];

    // Linear terms act diagonally on modes.
    for term in &op.terms {
        if let OperatorTerm::Derivative { coef, order } = *term {
            for (idx, slot) in out.iter_mut().enumerate() {
                let k = idx as i64 - n as i64;
                *slot += vm[idx] * ik_pow(k, order) * coef;
            }
        }
    }

    let pair: f64 = op
        .terms
        .iter()
        .map(|t| match *t {
            OperatorTerm::SymmetricPair { coef } => coef,
            OperatorTerm::Derivative { .. } => 0.0,
        })
        .sum();
    if pair != 0.0 {
        // Values on the padded grid of a mode vector scaled by (ik)^order.
        let to_grid = |modes: &[Complex64], order: usize, buf: &mut Vec<Complex64>| {
            buf.clear();
            buf.resize(m, Complex64::new(0.0, 0.0));
            for (idx, &c) in modes.iter().enumerate() {
                let k = idx as i64 - n as i64;
                buf[k.rem_euclid(m as i64) as usize] = c * ik_pow(k, order);
            }
            inverse.process(buf);
        };
        let mut u0 = Vec::new();
        let mut u1 = Vec::new();
        let mut v0 = Vec::new();
        let mut v1 = Vec::new();
        to_grid(&um, 0, &mut u0);
        to_grid(&um, 1, &mut u1);
        to_grid(&vm, 0, &mut v0);
        to_grid(&vm, 1, &mut v1);
        let prod = &mut ws.scratch;
        prod.clear();
        for j in 0..m {
            // u v' + (u v)' = 2 u v' + u' v
            prod.push(u0[j] * v1[j] * 2.0 + u1[j] * v0[j]);
        }
        forward.process(prod);
        let scale = pair / m as f64;
        for (idx, slot) in out.iter_mut().enumerate() {
            let k = idx as i64 - n as i64;
            *slot += prod[k.rem_euclid(m as i64) as usize] * scale;
        }
    }
    Ok(DVector::from_vec(fourier::modes_to_spectral(&out)))
}

/// Galerkin projection of `D(u) v` onto `P_n`, with `u`, `v` and the result
/// given as values on the `n + 1` point Chebyshev grid.
pub fn fast_cheb_galerkin_apply(
    ws: &PaddedWorkspace,
    op: &OperatorSpec,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_op(op)?;
    let n = ws.n;
    check_len(n + 1, u)?;
    check_len(n + 1, v)?;
    let (f_n, finv_n, f_2n, finv_2n) = match &ws.transforms {
        Transforms::Chebyshev {
            f_n,
            finv_n,
            f_2n,
            finv_2n,
        } => (f_n, finv_n, f_2n, finv_2n),
        Transforms::Fourier { .. } => {
            return Err(Error::IncompatibleSpaces(
                "Fourier workspace used for Chebyshev data".to_string(),
            ))
        }
    };
    // (i) modal coefficients, (ii) padded to formal degree 2n.
    let pad = |c: DVector<f64>| {
        let mut p = c.as_slice().to_vec();
        p.resize(2 * n + 1, 0.0);
        p
    };
    let uc = pad(finv_n * u);
    let vc = pad(finv_n * v);
    // (iii) values on the 2n + 1 point grid.
    let values = |c: &[f64]| f_2n * DVector::from_column_slice(c);

    // (iv) D(u) v on the dense grid, exact since every term has degree <= 2n.
    let mut dv = DVector::zeros(2 * n + 1);
    let mut vd = vec![vc.clone()];
    for term in &op.terms {
        match *term {
            OperatorTerm::Derivative { coef, order } => {
                while vd.len() <= order {
                    let next = chebyshev::differentiate_series(vd.last().unwrap());
                    vd.push(next);
                }
                dv += values(&vd[order]) * coef;
            }
            OperatorTerm::SymmetricPair { coef } => {
                let u0 = values(&uc);
                let u1 = values(&chebyshev::differentiate_series(&uc));
                let v0 = values(&vc);
                let v1 = values(&chebyshev::differentiate_series(&vc));
                dv += (u0.component_mul(&v1) * 2.0 + u1.component_mul(&v0)) * coef;
            }
        }
    }
    let modal = finv_2n * dv;
    // (v) Legendre series, (vi) truncation = projection onto P_n.
    let mut leg = legendre::cheb_to_legendre(modal.as_slice());
    leg.truncate(n + 1);
    // (vii) back to Chebyshev, (viii) values on the original grid.
    let cheb = legendre::legendre_to_cheb(&leg);
    Ok(f_n * DVector::from_vec(cheb))
}
