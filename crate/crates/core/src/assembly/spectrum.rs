use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Magnitude below which an eigenvalue counts as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Sorted by imaginary part, then real part.
    #[serde(serialize_with = "serialize_complex")]
    pub eigenvalues: Vec<Complex64>,
    pub max_abs_real: f64,
    pub zero_count: usize,
    pub spectral_radius: f64,
    pub symmetric: bool,
}

fn serialize_complex<S: serde::Serializer>(
    v: &[Complex64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

pub fn spectrum_report(m: &DMatrix<f64>) -> Result<SpectrumReport> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let scale = m.amax();
    let symmetric = (m - m.transpose()).amax() <= 1e-13 * scale.max(1.0);
    let mut eigenvalues: Vec<Complex64> = if scale == 0.0 {
        vec![Complex64::new(0.0, 0.0); m.nrows()]
    } else if symmetric {
        m.clone()
            .symmetric_eigenvalues()
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect()
    } else {
        let schur = m
            .clone()
            .try_schur(f64::EPSILON, 10_000)
            .ok_or(Error::EigenFailure)?;
        schur.complex_eigenvalues().iter().copied().collect()
    };
    if eigenvalues
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::EigenFailure);
    }
    eigenvalues.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    Ok(SpectrumReport {
        max_abs_real: eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max),
        zero_count: eigenvalues
            .iter()
            .filter(|z| z.norm() < ZERO_EIGENVALUE_TOL)
            .count(),
        spectral_radius: eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max),
        eigenvalues,
        symmetric,
    })
}
