//! Hamiltonian functionals `H(u) = int sum_t c_t a_t(x) prod (d^k u_f)^p dx`
//! with polynomial densities, and their coordinate gradients.
//!
//! Gradients are assembled term by term from the analytic derivative of the
//! density; all integrals use a quadrature rule exact for the density degree.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{common_quadrature, Space};
use crate::error::{Error, Result};

/// `(d^deriv u_field / dx^deriv)^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub field: usize,
    pub deriv: usize,
    pub power: u32,
}

impl Factor {
    pub fn new(field: usize, deriv: usize, power: u32) -> Self {
        Self {
            field,
            deriv,
            power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTerm {
    pub coef: f64,
    /// Monomial coefficients of a spatial weight `a(x)`; empty means 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight: Vec<f64>,
    pub factors: Vec<Factor>,
}

impl DensityTerm {
    pub fn new(coef: f64, factors: Vec<Factor>) -> Self {
        Self {
            coef,
            weight: Vec::new(),
            factors,
        }
    }

    pub fn weighted(coef: f64, weight: Vec<f64>, factors: Vec<Factor>) -> Self {
        Self {
            coef,
            weight,
            factors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub terms: Vec<DensityTerm>,
}

impl HamiltonianSpec {
    pub fn new(terms: Vec<DensityTerm>) -> Self {
        Self { terms }
    }

    /// `int (-u^3 + u_x^2 / 2) dx`.
    pub fn kdv_cubic() -> Self {
        Self::new(vec![
            DensityTerm::new(-1.0, vec![Factor::new(0, 0, 3)]),
            DensityTerm::new(0.5, vec![Factor::new(0, 1, 2)]),
        ])
    }

    /// `int u^2 / 2 dx`.
    pub fn half_l2() -> Self {
        Self::new(vec![DensityTerm::new(0.5, vec![Factor::new(0, 0, 2)])])
    }

    /// `int (a(x) p^2 + q_x^2) / 2 dx` for the state `(q, p)`.
    pub fn wave_energy(a: &[f64]) -> Self {
        Self::new(vec![
            DensityTerm::weighted(0.5, a.to_vec(), vec![Factor::new(1, 0, 2)]),
            DensityTerm::new(0.5, vec![Factor::new(0, 1, 2)]),
        ])
    }

    pub fn fields(&self) -> usize {
        self.terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.field + 1))
            .max()
            .unwrap_or(1)
    }

    /// Polynomial degree of the density in the state.
    pub fn state_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.factors.iter().map(|f| f.power).sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Prepare evaluation on a product space.
    pub fn bind(&self, spaces: &[Space]) -> Result<BoundHamiltonian> {
        if self.terms.is_empty() {
            return Err(Error::InvalidHamiltonian("no density terms".to_string()));
        }
        if self.fields() > spaces.len() {
            return Err(Error::InvalidHamiltonian(format!(
                "density uses {} fields but {} spaces were given",
                self.fields(),
                spaces.len()
            )));
        }
        let mut degree = 0;
        let mut max_deriv = vec![0usize; spaces.len()];
        for term in &self.terms {
            if term.factors.is_empty() || term.factors.iter().any(|f| f.power == 0) {
                return Err(Error::InvalidHamiltonian(
                    "every term needs factors with positive powers".to_string(),
                ));
            }
            let wdeg = term.weight.len().saturating_sub(1);
            if wdeg > 0 && spaces.iter().any(Space::is_periodic) {
                return Err(Error::InvalidHamiltonian(
                    "polynomial weights are not exact on periodic spaces".to_string(),
                ));
            }
            let mut d = wdeg;
            for f in &term.factors {
                let space = &spaces[f.field];
                if space.is_piecewise() && f.deriv > 1 {
                    return Err(Error::InvalidHamiltonian(format!(
                        "derivative of order {} on a piecewise-linear field",
                        f.deriv
                    )));
                }
                d += f.power as usize * space.degree();
                max_deriv[f.field] = max_deriv[f.field].max(f.deriv);
            }
            degree = degree.max(d);
        }
        let refs: Vec<&Space> = spaces.iter().collect();
        let rule = common_quadrature(&refs, degree)?;
        let tables = spaces
            .iter()
            .zip(&max_deriv)
            .map(|(s, &md)| (0..=md).map(|d| s.eval(&rule.points, d)).collect())
            .collect();
        let weights = self
            .terms
            .iter()
            .map(|t| {
                DVector::from_iterator(
                    rule.points.len(),
                    rule.points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&x, &w)| w * t.coef * polyval(&t.weight, x)),
                )
            })
            .collect();
        let offsets = spaces
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s.dim();
                Some(o)
            })
            .collect();
        Ok(BoundHamiltonian {
            spec: self.clone(),
            tables,
            weights,
            offsets,
            dims: spaces.iter().map(Space::dim).collect(),
        })
    }
}

/// Horner evaluation of monomial coefficients; empty means 1.
pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    if coeffs.is_empty() {
        return 1.0;
    }
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// A Hamiltonian sampled on an exact quadrature rule for given spaces.
#[derive(Debug, Clone)]
pub struct BoundHamiltonian {
    spec: HamiltonianSpec,
    /// tables[field][deriv][q, j]
    tables: Vec<Vec<DMatrix<f64>>>,
    /// Per-term quadrature weight times coefficient times `a(x_q)`.
    weights: Vec<DVector<f64>>,
    offsets: Vec<usize>,
    dims: Vec<usize>,
}

impl BoundHamiltonian {
    pub fn spec(&self) -> &HamiltonianSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().sum()
    }

    fn check(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    fn factor_values(&self, u: &DVector<f64>, f: &Factor) -> DVector<f64> {
        let seg = u.rows(self.offsets[f.field], self.dims[f.field]);
        &self.tables[f.field][f.deriv] * seg
    }

    pub fn value(&self, u: &DVector<f64>) -> Result<f64> {
        self.check(u)?;
        let mut total = 0.0;
        for (term, w) in self.spec.terms.iter().zip(&self.weights) {
            let mut density = w.clone();
            for f in &term.factors {
                let v = self.factor_values(u, f);
                density.zip_apply(&v, |d, x| *d *= x.powi(f.power as i32));
            }
            total += density.sum();
        }
        Ok(total)
    }

    /// `grad H(u)`, the coordinate gradient.
    pub fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(u)?;
        let mut grad = DVector::zeros(self.dim());
        for (term, w) in self.spec.terms.iter().zip(&self.weights) {
            let values: Vec<DVector<f64>> = term
                .factors
                .iter()
                .map(|f| self.factor_values(u, f))
                .collect();
            for (k, fk) in term.factors.iter().enumerate() {
                let mut partial = w.clone();
                for (m, fm) in term.factors.iter().enumerate() {
                    if m == k {
                        let p = fm.power as i32;
                        partial.zip_apply(&values[m], |d, x| *d *= p as f64 * x.powi(p - 1));
                    } else {
                        partial.zip_apply(&values[m], |d, x| *d *= x.powi(fm.power as i32));
                    }
                }
                let contrib = self.tables[fk.field][fk.deriv].transpose() * partial;
                let mut seg = grad.rows_mut(self.offsets[fk.field], self.dims[fk.field]);
                seg += contrib;
            }
        }
        Ok(grad)
    }
}

/// Worst relative error between `<grad H, v>` and the central difference
/// `(H(u + h v) - H(u - h v)) / 2h` over the given directions.
///
/// Errors are measured relative to `|grad H| |v|`, the natural scale of the
/// directional derivative.
pub fn gradient_check(
    h: &BoundHamiltonian,
    u: &DVector<f64>,
    directions: &[DVector<f64>],
    step: f64,
) -> Result<f64> {
    let grad = h.gradient(u)?;
    let mut worst = 0.0f64;
    for v in directions {
        let exact = grad.dot(v);
        let fd = (h.value(&(u + v * step))? - h.value(&(u - v * step))?) / (2.0 * step);
        let scale = grad.norm() * v.norm();
        let rel = if scale == 0.0 {
            (fd - exact).abs()
        } else {
            (fd - exact).abs() / scale
        };
        worst = worst.max(rel);
    }
    Ok(worst)
}
