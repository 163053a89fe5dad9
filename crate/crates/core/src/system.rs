//! Dual-composition ODEs `u' = S^-T A(u) S^-1 grad H(u)`.
//!
//! `S` is the Gram matrix between the trial space `F0` (where the state
//! lives) and the weight space `F1`; `S^-1 grad H` is the weighted-residual
//! approximation of the variational derivative in `F1`, and `S^-T A` maps it
//! back to `F0`. When `A(u)` is antisymmetric the composite operator is too,
//! so `H` is a first integral.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::assembly::{
    block_gram, block_operator_matrix, operator_matrix, GramSolver, OperatorSampler, OperatorSpec,
    OperatorState, OperatorTerm,
};
use crate::basis::{basis_integrals, BasisId, BasisSpec, BoundaryConstraint, Family, Space};
use crate::error::{Error, Result};
use crate::hamiltonian::{polyval, BoundHamiltonian, HamiltonianSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    /// Constant operator: the system is Hamiltonian.
    Hamiltonian,
    /// State-dependent operator: skew-gradient with `H` as an integral.
    SkewGradient,
}

/// Coefficients of a state in the basis of `F0`, stamped with a time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub coeffs: DVector<f64>,
    pub basis: Vec<BasisId>,
    pub time: f64,
}

impl State {
    pub fn new(sys: &SkewGradientSystem, coeffs: DVector<f64>, time: f64) -> Result<Self> {
        if coeffs.len() != sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                found: coeffs.len(),
            });
        }
        Ok(Self {
            coeffs,
            basis: sys.f0.iter().map(Space::id).collect(),
            time,
        })
    }
}

#[derive(Debug, Clone)]
enum OperatorImpl {
    Constant(DMatrix<f64>),
    Varying(OperatorSampler),
}

#[derive(Debug, Clone)]
pub struct SkewGradientSystem {
    name: String,
    f0: Vec<Space>,
    f1: Vec<Space>,
    s: DMatrix<f64>,
    solver: GramSolver,
    operator: OperatorSpec,
    op_impl: OperatorImpl,
    hamiltonian: BoundHamiltonian,
    casimir: Option<DVector<f64>>,
    structure: Structure,
    warnings: Vec<String>,
}

impl SkewGradientSystem {
    /// Assemble the system for product spaces `f0` (state) and `f1`
    /// (weights), one space per field.
    pub fn new(
        name: &str,
        f0: Vec<Space>,
        f1: Vec<Space>,
        operator: OperatorSpec,
        hamiltonian: &HamiltonianSpec,
    ) -> Result<Self> {
        operator.validate()?;
        if f0.len() != operator.fields() || f1.len() != operator.fields() {
            return Err(Error::DimensionMismatch {
                expected: operator.fields(),
                found: f0.len().min(f1.len()),
            });
        }
        let s = block_gram(&f0, &f1)?;
        let solver = GramSolver::new(&s)?;
        let op_impl = if operator.is_block() {
            OperatorImpl::Constant(block_operator_matrix(&operator, &f1)?)
        } else if operator.is_constant() {
            OperatorImpl::Constant(operator_matrix(&operator, OperatorState::Constant, &f1[0])?)
        } else {
            OperatorImpl::Varying(OperatorSampler::new(
                &operator,
                Some(&f0[0]),
                &f1[0],
                &f1[0],
            )?)
        };
        let bound = hamiltonian.bind(&f0)?;
        let structure = if operator.is_constant() {
            Structure::Hamiltonian
        } else {
            Structure::SkewGradient
        };
        Ok(Self {
            name: name.to_string(),
            f0,
            f1,
            s,
            solver,
            operator,
            op_impl,
            hamiltonian: bound,
            casimir: None,
            structure,
            warnings: Vec::new(),
        })
    }

    pub fn with_casimir(mut self, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: weights.len(),
            });
        }
        self.casimir = Some(weights);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.f0.iter().map(Space::dim).sum()
    }

    pub fn f0(&self) -> &[Space] {
        &self.f0
    }

    pub fn f1(&self) -> &[Space] {
        &self.f1
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn gram_solver(&self) -> &GramSolver {
        &self.solver
    }

    pub fn operator(&self) -> &OperatorSpec {
        &self.operator
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn hamiltonian(&self) -> &BoundHamiltonian {
        &self.hamiltonian
    }

    pub fn casimir_weights(&self) -> Option<&DVector<f64>> {
        self.casimir.as_ref()
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

    pub fn energy(&self, u: &DVector<f64>) -> Result<f64> {
        self.hamiltonian.value(u)
    }

    pub fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.hamiltonian.gradient(u)
    }

    /// `S^-1 grad H(u)`: coordinates in `F1` of the projected variational
    /// derivative.
    pub fn variational_projection(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        variational_projection(&self.hamiltonian, &self.solver, u)
    }

    /// `A(u)`, reassembled for the given state.
    pub fn operator_matrix_at(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(u)?;
        match &self.op_impl {
            OperatorImpl::Constant(a) => Ok(a.clone()),
            OperatorImpl::Varying(sampler) => {
                sampler.matrix(Some(&u.rows(0, self.f0[0].dim()).into_owned()))
            }
        }
    }

    fn apply_operator(&self, u: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.op_impl {
            OperatorImpl::Constant(a) => Ok(a * y),
            OperatorImpl::Varying(sampler) => sampler.apply(Some(u), y),
        }
    }

    /// `S^-T A(u) S^-1 grad H(u)`.
    pub fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self.variational_projection(u)?;
        let z = self.apply_operator(u, &y)?;
        self.solver.solve_transpose(&z)
    }

    /// `|grad H . rhs| / (|grad H| |rhs|)`, zero for a skew-gradient system.
    pub fn skew_residual(&self, u: &DVector<f64>) -> Result<f64> {
        let g = self.gradient(u)?;
        let f = self.rhs(u)?;
        let scale = g.norm() * f.norm();
        Ok(if scale == 0.0 {
            0.0
        } else {
            g.dot(&f).abs() / scale
        })
    }

    /// `C(u) = w^T u`.
    pub fn casimir(&self, u: &DVector<f64>) -> Result<f64> {
        let w = self.casimir.as_ref().ok_or(Error::NoCasimir)?;
        self.check(u)?;
        Ok(w.dot(u))
    }

    /// `S^-T A S^-1` for constant operators.
    pub fn linear_operator(&self) -> Result<DMatrix<f64>> {
        let a = match &self.op_impl {
            OperatorImpl::Constant(a) => a,
            OperatorImpl::Varying(_) => return Err(Error::NonConstantOperator),
        };
        let n = self.dim();
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
            let col = self.solver.solve_transpose(&(a * self.solver.solve(&e)?))?;
            l.set_column(j, &col);
        }
        Ok(l)
    }

    /// L2 projection of `f` onto `F0`, field by field.
    pub fn project(&self, fields: &[&dyn Fn(f64) -> f64]) -> Result<DVector<f64>> {
        if fields.len() != self.f0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.f0.len(),
                found: fields.len(),
            });
        }
        let parts = self
            .f0
            .iter()
            .zip(fields)
            .map(|(s, f)| project_function(s, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_iterator(
            self.dim(),
            parts
                .into_iter()
                .flat_map(|p| p.into_iter().copied().collect::<Vec<_>>()),
        ))
    }

    /// Evaluate field `field` of the state at the points `x`.
    pub fn eval_field(
        &self,
        u: &DVector<f64>,
        field: usize,
        x: &[f64],
        deriv: usize,
    ) -> DVector<f64> {
        let offset: usize = self.f0[..field].iter().map(Space::dim).sum();
        let space = &self.f0[field];
        space.eval_function(&u.rows(offset, space.dim()).into_owned(), x, deriv)
    }
}

/// `S^-1 grad H(u)`.
pub fn variational_projection(
    h: &BoundHamiltonian,
    solver: &GramSolver,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    solver.solve(&h.gradient(u)?)
}

/// L2-orthogonal projection of a smooth function onto `space`, with
/// overintegrated quadrature.
pub fn project_function(space: &Space, f: &dyn Fn(f64) -> f64) -> Result<DVector<f64>> {
    let rule = space.quadrature(4 * space.degree() + 64);
    let e = space.eval(&rule.points, 0);
    let mut we = e.clone();
    for (q, mut row) in we.row_iter_mut().enumerate() {
        row *= rule.weights[q];
    }
    let gram = e.transpose() * &we;
    let rhs = we.transpose()
        * DVector::from_iterator(rule.points.len(), rule.points.iter().map(|&x| f(x)));
    GramSolver::new(&gram)?.solve(&rhs)
}

fn fourier_space(n: usize) -> Result<Space> {
    if n < 2 {
        return Err(Error::InvalidBasis(
            "KdV systems need degree n >= 2".to_string(),
        ));
    }
    Space::new(BasisSpec::new(Family::Fourier, n))
}

/// KdV `u_t + 6 u u_x + u_xxx = 0` as `u_t = d/dx (dH1/du)`, with
/// `H1 = int (-u^3 + u_x^2 / 2)`, on trigonometric polynomials of degree `n`.
pub fn kdv_form1(n: usize) -> Result<SkewGradientSystem> {
    let space = fourier_space(n)?;
    let casimir = basis_integrals(&space);
    SkewGradientSystem::new(
        "kdv-form1",
        vec![space.clone()],
        vec![space],
        OperatorSpec::dx(),
        &HamiltonianSpec::kdv_cubic(),
    )?
    .with_casimir(casimir)
}

/// KdV as `u_t = -(2 u d/dx + 2 d/dx u + d^3/dx^3)(dH2/du)`, `H2 = int u^2 / 2`.
pub fn kdv_form2(n: usize) -> Result<SkewGradientSystem> {
    let space = fourier_space(n)?;
    let casimir = basis_integrals(&space);
    let op = OperatorSpec::new(vec![
        OperatorTerm::SymmetricPair { coef: -2.0 },
        OperatorTerm::Derivative {
            coef: -1.0,
            order: 3,
        },
    ])?;
    SkewGradientSystem::new(
        "kdv-form2",
        vec![space.clone()],
        vec![space],
        op,
        &HamiltonianSpec::half_l2(),
    )?
    .with_casimir(casimir)
}

/// `q_t = a(x) p`, `p_t = q_xx`, `q_x(+-1) = 0`, with
/// `F0 = {q in P_{n+2} : q_x(+-1) = 0} x P_n` and `F1 = P_n x P_n`.
///
/// `a` holds monomial coefficients. A warning is recorded when `a` is not
/// positive on `[-1, 1]`.
pub fn wave_system(n: usize, a: &[f64]) -> Result<SkewGradientSystem> {
    if n == 0 {
        return Err(Error::InvalidBasis("wave system needs n >= 1".to_string()));
    }
    let q = Space::new(
        BasisSpec::new(Family::LegendreModal, n + 2)
            .with_constraints(BoundaryConstraint::neumann()),
    )?;
    let p = Space::new(BasisSpec::new(Family::LegendreModal, n))?;
    let op = OperatorSpec::block(crate::assembly::BlockStructure::canonical())?;
    let mut sys = SkewGradientSystem::new(
        "wave",
        vec![q, p.clone()],
        vec![p.clone(), p],
        op,
        &HamiltonianSpec::wave_energy(a),
    )?;
    let min_a = (0..=1000)
        .map(|i| polyval(a, -1.0 + 2.0 * i as f64 / 1000.0))
        .fold(f64::INFINITY, f64::min);
    if min_a <= 0.0 {
        sys.warnings.push(format!(
            "a(x) is not positive on [-1, 1] (min {min_a:.3e}); H is indefinite"
        ));
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn tags() {
        assert_eq!(kdv_form1(4).unwrap().structure(), Structure::Hamiltonian);
        assert_eq!(kdv_form2(4).unwrap().structure(), Structure::SkewGradient);
        assert_eq!(
            wave_system(4, &[1.0]).unwrap().structure(),
            Structure::Hamiltonian
        );
        assert!(kdv_form1(1).is_err());
    }

    #[test]
    fn half_l2_projection_returns_state() {
        let sys = kdv_form2(6).unwrap();
        let u = DVector::from_fn(13, |i, _| (i as f64).cos());
        let y = sys.variational_projection(&u).unwrap();
        assert!((y - &u).amax() < 1e-13);
    }

    #[test]
    fn zero_state_zero_projection() {
        let sys = kdv_form1(6).unwrap();
        let y = sys.variational_projection(&DVector::zeros(13)).unwrap();
        assert_eq!(y.amax(), 0.0);
        assert_eq!(
            kdv_form2(6)
                .unwrap()
                .rhs(&DVector::zeros(13))
                .unwrap()
                .amax(),
            0.0
        );
    }

    #[test]
    fn wave_dimensions_and_equilibrium() {
        let sys = wave_system(6, &[2.0, 1.0]).unwrap();
        assert_eq!(sys.f0()[0].dim(), 7);
        assert_eq!(sys.dim(), 14);
        let c = 0.8;
        let u = sys.project(&[&|_| c, &|_| 0.0]).unwrap();
        assert!(sys.rhs(&u).unwrap().amax() < 1e-12);
        assert!(sys.warnings().is_empty());
        assert!(!wave_system(4, &[0.5, 1.0]).unwrap().warnings().is_empty());
    }

    #[test]
    fn casimir_of_fourier_state() {
        let sys = kdv_form1(4).unwrap();
        assert_eq!(sys.casimir(&DVector::zeros(9)).unwrap(), 0.0);
        let mut u = DVector::zeros(9);
        u[0] = 1.0;
        u[3] = 5.0;
        // Only the constant mode 1/sqrt(2) integrates to something nonzero.
        assert_abs_diff_eq!(
            sys.casimir(&u).unwrap(),
            2.0 * PI / 2f64.sqrt(),
            epsilon = 1e-13
        );
        assert!(matches!(
            wave_system(3, &[1.0]).unwrap().casimir(&DVector::zeros(8)),
            Err(Error::NoCasimir)
        ));
    }

    #[test]
    fn linear_operator_antisymmetric() {
        let sys = kdv_form1(5).unwrap();
        let l = sys.linear_operator().unwrap();
        assert!((&l + l.transpose()).amax() < 1e-12);
        assert!(matches!(
            kdv_form2(5).unwrap().linear_operator(),
            Err(Error::NonConstantOperator)
        ));
    }
}
