//! Quadrature Hamiltonians `H_q(u) = sum_j h(u_j) w_j` on grids, and the
//! configurations in which `D W^-1` is antisymmetric, so that
//! `u' = D W^-1 grad H_q` conserves `H_q`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assembly::{assemble, diff_matrix, OperatorSpec, OperatorState};
use crate::basis::{quadrature_weights, BasisSpec, Family, Space};
use crate::error::{Error, Result};
use crate::hamiltonian::polyval;
use crate::system::project_function;
use crate::timeint::{integrate, Method, StepperConfig, VectorField};

/// Verdict threshold for `|D W^-1 + (D W^-1)^T|_max`.
pub const ANTISYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureHamiltonian {
    /// Monomial coefficients of the pointwise density `h`.
    h: Vec<f64>,
    w: DVector<f64>,
}

impl QuadratureHamiltonian {
    pub fn new(h: Vec<f64>, w: DVector<f64>) -> Result<Self> {
        if w.iter().any(|&x| x.is_nan() || x <= 0.0) {
            return Err(Error::InvalidHamiltonian(
                "quadrature weights must be strictly positive".to_string(),
            ));
        }
        Ok(Self { h, w })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }

    fn check(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                found: u.len(),
            });
        }
        Ok(())
    }

    fn dh(&self) -> Vec<f64> {
        self.h
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect()
    }

    /// `h'(u)` pointwise.
    pub fn density_derivative(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(u)?;
        let dh = self.dh();
        Ok(u.map(|x| polyval(&dh, x)))
    }

    pub fn eval(&self, u: &DVector<f64>) -> Result<f64> {
        self.check(u)?;
        Ok(u.iter()
            .zip(self.w.iter())
            .map(|(&x, &w)| polyval(&self.h, x) * w)
            .sum())
    }

    /// `W h'(u)`.
    pub fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.density_derivative(u)?.component_mul(&self.w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    /// Equispaced periodic grid, `W` a multiple of the identity.
    ConstantGrid,
    /// Any grid, two fields, `D = [[0, I], [-I, 0]]`.
    CanonicalBlock,
    /// Gauss–Legendre nodes with `F0 = F1`, where `S = W`.
    GaussLegendre,
    /// Chebyshev points with pseudospectral `d/dx`: not antisymmetric.
    ChebyshevControl,
}

impl Case {
    pub const ALL: [Case; 4] = [
        Case::ConstantGrid,
        Case::CanonicalBlock,
        Case::GaussLegendre,
        Case::ChebyshevControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Case::ConstantGrid => "constant-grid",
            Case::CanonicalBlock => "canonical-block",
            Case::GaussLegendre => "gauss-legendre",
            Case::ChebyshevControl => "chebyshev-control",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub case: Case,
    /// `|D W^-1 + (D W^-1)^T|_max`.
    pub defect: f64,
    pub antisymmetric: bool,
    /// `|S - W|_max`, when a Gram matrix is supplied.
    pub gram_defect: Option<f64>,
}

/// Antisymmetry defect of `D W^-1` for diagonal `W = diag(w)`.
pub fn antisymmetry_case(
    d: &DMatrix<f64>,
    w: &DVector<f64>,
    case: Case,
    s: Option<&DMatrix<f64>>,
) -> Result<CaseReport> {
    if !d.is_square() || d.nrows() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: d.nrows(),
        });
    }
    if w.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::Singular);
    }
    let dw = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] / w[j]);
    let defect = (&dw + dw.transpose()).amax();
    let gram_defect = match s {
        Some(s) => {
            if s.shape() != d.shape() {
                return Err(Error::DimensionMismatch {
                    expected: d.nrows(),
                    found: s.nrows(),
                });
            }
            Some((s - DMatrix::from_diagonal(w)).amax())
        }
        None => None,
    };
    Ok(CaseReport {
        case,
        defect,
        antisymmetric: defect < ANTISYMMETRY_TOL,
        gram_defect,
    })
}

/// `D`, `W` and (where meaningful) `S` for one of the standard cases.
#[derive(Debug, Clone)]
pub struct CaseSetup {
    pub case: Case,
    pub d: DMatrix<f64>,
    pub w: DVector<f64>,
    pub s: Option<DMatrix<f64>>,
}

impl CaseSetup {
    pub fn report(&self) -> Result<CaseReport> {
        antisymmetry_case(&self.d, &self.w, self.case, self.s.as_ref())
    }
}

/// State coefficient for the `u`-dependent operator in the Gauss case:
/// `u = (1 - x^2)(1 + x/2)` vanishes at both ends, so `u d/dx + d/dx u` has
/// an antisymmetric Galerkin matrix on `P_n`.
pub fn gauss_case_state(x: f64) -> f64 {
    (1.0 - x * x) * (1.0 + 0.5 * x)
}

/// `S` and `A` for `u d/dx + d/dx u` with `u` from [`gauss_case_state`].
fn skew_pair(space: &Space) -> Result<crate::assembly::AssembledPair> {
    let op = OperatorSpec::parse("upair", false)?;
    let state_space = Space::new(BasisSpec::new(Family::LegendreModal, 3))?;
    let coeffs = project_function(&state_space, &gauss_case_state)?;
    let state = OperatorState::Field {
        space: &state_space,
        coeffs: &coeffs,
    };
    assemble(&op, state, space, space)
}

pub fn case_setup(case: Case, n: usize) -> Result<CaseSetup> {
    let dx = OperatorSpec::dx();
    match case {
        Case::ConstantGrid => {
            let spec = BasisSpec::new(Family::FourierCardinal, n);
            let space = Space::new(spec.clone())?;
            let pair = assemble(&dx, OperatorState::Constant, &space, &space)?;
            Ok(CaseSetup {
                case,
                d: diff_matrix(&pair)?,
                w: DVector::from_vec(quadrature_weights(&spec)?),
                s: Some(pair.s),
            })
        }
        Case::CanonicalBlock => {
            // Chebyshev weights: deliberately far from constant.
            let w1 = quadrature_weights(&BasisSpec::new(Family::ChebyshevCardinal, n))?;
            let m = w1.len();
            let mut d = DMatrix::zeros(2 * m, 2 * m);
            for i in 0..m {
                d[(i, m + i)] = 1.0;
                d[(m + i, i)] = -1.0;
            }
            let w = DVector::from_iterator(2 * m, w1.iter().chain(w1.iter()).copied());
            Ok(CaseSetup {
                case,
                d,
                w,
                s: None,
            })
        }
        Case::GaussLegendre => {
            let spec = BasisSpec::new(Family::LegendreCardinal, n);
            let space = Space::new(spec.clone())?;
            let pair = skew_pair(&space)?;
            Ok(CaseSetup {
                case,
                d: diff_matrix(&pair)?,
                w: DVector::from_vec(quadrature_weights(&spec)?),
                s: Some(pair.s),
            })
        }
        Case::ChebyshevControl => {
            let spec = BasisSpec::new(Family::ChebyshevCardinal, n);
            let space = Space::new(spec.clone())?;
            let pair = assemble(&dx, OperatorState::Constant, &space, &space)?;
            Ok(CaseSetup {
                case,
                d: diff_matrix(&pair)?,
                w: DVector::from_vec(quadrature_weights(&spec)?),
                s: Some(pair.s),
            })
        }
    }
}

/// `u' = D W^-1 grad H_q(u) = D h'(u)` on a grid.
#[derive(Debug, Clone)]
pub struct QuadratureSystem {
    pub d: DMatrix<f64>,
    pub h: QuadratureHamiltonian,
}

impl VectorField for QuadratureSystem {
    fn dim(&self) -> usize {
        self.d.nrows()
    }

    fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.d * self.h.density_derivative(u)?)
    }

    fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.h.gradient(u)
    }

    fn constant_operator(&self) -> Result<DMatrix<f64>> {
        let w = self.h.weights();
        Ok(DMatrix::from_fn(self.d.nrows(), self.d.ncols(), |i, j| {
            self.d[(i, j)] / w[j]
        }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub case: Case,
    pub defect: f64,
    pub steps: usize,
    /// `max_t |H_q(t) - H_q(0)|`.
    pub drift: f64,
}

/// Integrate `u' = D W^-1 grad H_q` with `h(s) = s^2 / 2` by the midpoint
/// rule and record the drift of `H_q`. For the grid cases the initial data
/// is a smooth bump sampled on the nodes.
pub fn conservation_drift(setup: &CaseSetup, tau: f64, t_end: f64) -> Result<DriftReport> {
    let m = setup.w.len();
    let u0 = DVector::from_fn(m, |i, _| {
        let t = (i as f64 + 0.5) / m as f64;
        (2.0 * std::f64::consts::PI * t).sin() + 0.5 * (6.0 * t).cos()
    });
    let sys = QuadratureSystem {
        d: setup.d.clone(),
        h: QuadratureHamiltonian::new(vec![0.0, 0.0, 0.5], setup.w.clone())?,
    };
    let h = sys.h.clone();
    let obs = [crate::timeint::Observer::new("Hq", move |u| h.eval(u))];
    let cfg = StepperConfig::new(Method::Midpoint, tau);
    let traj = integrate(&sys, &u0, &cfg, t_end, &obs)?;
    if let Some(e) = traj.failure {
        return Err(e);
    }
    Ok(DriftReport {
        case: setup.case,
        defect: setup.report()?.defect,
        steps: traj.times.len() - 1,
        drift: traj.max_drift()[0],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MixedCompositionReport {
    pub n: usize,
    /// `|grad H_q . f| / (|grad H_q| |f|)` for `f = S^-T A S^-1 grad H_q`.
    pub skew_residual: f64,
    /// `|S^-1 W h'(u) - h'(u)|_max` for smooth `u`: the error of `S^-1 grad H_q`
    /// as an approximation of the variational derivative.
    pub consistency_error: f64,
}

/// Chebyshev grid, `h(s) = s^3 / 3`, skew `A` from `u d/dx + d/dx u`: using `S^-1` in place of `W^-1` gives a
/// skew-gradient system, but `S^-1 grad H_q` does not approximate `h'(u)`.
pub fn mixed_composition(n: usize) -> Result<MixedCompositionReport> {
    let spec = BasisSpec::new(Family::ChebyshevCardinal, n);
    let space = Space::new(spec.clone())?;
    let pair = skew_pair(&space)?;
    let grid = space.grid().expect("cardinal space has a grid");
    let u = DVector::from_iterator(
        grid.len(),
        grid.points.iter().map(|&x| (1.3 * x).sin() + 0.4),
    );
    let w = DVector::from_vec(quadrature_weights(&spec)?);
    let h = QuadratureHamiltonian::new(vec![0.0, 0.0, 0.0, 1.0 / 3.0], w)?;
    let solver = crate::assembly::GramSolver::new(&pair.s)?;
    let g = h.gradient(&u)?;
    let y = solver.solve(&g)?;
    let f = solver.solve_transpose(&(&pair.a * &y))?;
    let scale = g.norm() * f.norm();
    Ok(MixedCompositionReport {
        n,
        skew_residual: if scale == 0.0 {
            0.0
        } else {
            g.dot(&f).abs() / scale
        },
        consistency_error: (y - h.density_derivative(&u)?).amax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn evaluation_and_gradient() {
        let w = DVector::from_vec(vec![0.5, 1.0, 0.25]);
        let h = QuadratureHamiltonian::new(vec![0.0, 1.0, 0.0, 2.0], w.clone()).unwrap();
        let u = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        // h = s + 2 s^3
        assert_abs_diff_eq!(
            h.eval(&u).unwrap(),
            0.5 * 3.0 + 1.0 * -18.0 + 0.25 * 57.0,
            epsilon = 1e-12
        );
        let g = h.gradient(&u).unwrap();
        assert_abs_diff_eq!(g[1], 1.0 * (1.0 + 6.0 * 4.0), epsilon = 1e-12);
        assert!(h.eval(&DVector::zeros(2)).is_err());
        assert!(QuadratureHamiltonian::new(vec![1.0], DVector::from_vec(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn linear_density_is_casimir() {
        let w = DVector::from_vec(vec![0.2, 0.7, 1.1]);
        let h = QuadratureHamiltonian::new(vec![0.0, 1.0], w.clone()).unwrap();
        let u = DVector::from_vec(vec![3.0, -1.0, 0.5]);
        assert_abs_diff_eq!(h.eval(&u).unwrap(), w.dot(&u), epsilon = 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w = DVector::from_vec(vec![0.3, 0.9, 0.4, 0.6]);
        let h = QuadratureHamiltonian::new(vec![0.1, -0.5, 0.0, 1.0, 0.25], w).unwrap();
        let u = DVector::from_vec(vec![0.2, -0.4, 1.1, 0.7]);
        let g = h.gradient(&u).unwrap();
        let step = 1e-6;
        for j in 0..4 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += step;
            dn[j] -= step;
            let fd = (h.eval(&up).unwrap() - h.eval(&dn).unwrap()) / (2.0 * step);
            assert!((fd - g[j]).abs() < 1e-6 * g[j].abs().max(1.0));
        }
    }

    #[test]
    fn compatible_cases_are_antisymmetric() {
        for case in [
            Case::ConstantGrid,
            Case::CanonicalBlock,
            Case::GaussLegendre,
        ] {
            let r = case_setup(case, 10).unwrap().report().unwrap();
            assert!(r.antisymmetric, "{case:?}: {}", r.defect);
        }
        let g = case_setup(Case::GaussLegendre, 10)
            .unwrap()
            .report()
            .unwrap();
        assert!(g.gram_defect.unwrap() < 1e-12);
    }

    #[test]
    fn chebyshev_control_fails() {
        let r = case_setup(Case::ChebyshevControl, 10)
            .unwrap()
            .report()
            .unwrap();
        assert!(!r.antisymmetric);
        assert!(r.defect > 1e-2);
    }

    #[test]
    fn singular_weights_rejected() {
        let d = DMatrix::zeros(2, 2);
        let w = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            antisymmetry_case(&d, &w, Case::CanonicalBlock, None),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn drift_dichotomy() {
        for case in [Case::ConstantGrid, Case::GaussLegendre] {
            let r = conservation_drift(&case_setup(case, 8).unwrap(), 0.01, 0.5).unwrap();
            assert!(r.drift < 1e-10 * r.steps as f64, "{case:?}: {}", r.drift);
        }
        let control =
            conservation_drift(&case_setup(Case::ChebyshevControl, 8).unwrap(), 0.001, 0.05)
                .unwrap();
        assert!(control.drift > 1e-8, "{}", control.drift);
    }

    #[test]
    fn mixed_composition_is_skew_but_inconsistent() {
        let r = mixed_composition(16).unwrap();
        assert!(r.skew_residual < 1e-10);
        assert!(r.consistency_error > 1e-3);
    }
}
