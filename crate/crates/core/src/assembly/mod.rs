//! Gram matrices `S`, operator matrices `A(u)`, their boundary defects and
//! differentiation matrices `D = S^-T A`.
//!
//! All inner products are integrated exactly: the quadrature rule is chosen
//! from the degrees of the integrand factors.

mod operator;
mod spectrum;

use nalgebra::{DMatrix, DVector};

use crate::basis::{chebyshev, common_quadrature, BasisId, Space, TransformMatrix};
use crate::error::{Error, Result};

pub use operator::{Block, BlockStructure, OperatorSpec, OperatorTerm};
pub use spectrum::{spectrum_report, SpectrumReport, ZERO_EIGENVALUE_TOL};

/// Condition estimate above which `S` is refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// The state `u` a nonconstant operator `D(u)` is evaluated at.
#[derive(Debug, Clone, Copy)]
pub enum OperatorState<'a> {
    /// No state: only valid for constant operators.
    Constant,
    Field {
        space: &'a Space,
        coeffs: &'a DVector<f64>,
    },
}

/// Basis functions of one space sampled on a quadrature rule, per
/// derivative order.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub weights: DVector<f64>,
    pub tables: Vec<DMatrix<f64>>,
}

impl Sampled {
    pub fn new(space: &Space, points: &[f64], weights: &[f64], max_deriv: usize) -> Self {
        Self {
            weights: DVector::from_column_slice(weights),
            tables: (0..=max_deriv).map(|d| space.eval(points, d)).collect(),
        }
    }

    /// `T_d^T diag(w * scale) T_e`.
    fn weighted_product(
        &self,
        other: &Sampled,
        d: usize,
        e: usize,
        scale: Option<&DVector<f64>>,
    ) -> DMatrix<f64> {
        let mut right = other.tables[e].clone();
        for (q, mut row) in right.row_iter_mut().enumerate() {
            let s = self.weights[q] * scale.map_or(1.0, |v| v[q]);
            row *= s;
        }
        self.tables[d].transpose() * right
    }
}

fn check_piecewise_order(space: &Space, order: usize) -> Result<()> {
    if space.is_piecewise() && order > 1 {
        return Err(Error::UnsupportedTerm(format!(
            "derivative of order {order} on the piecewise-linear space {}",
            space.id()
        )));
    }
    Ok(())
}

/// `S_ij = <f_i, g_j>`; `F0` and `F1` must have equal dimension.
pub fn gram_matrix(f0: &Space, f1: &Space) -> Result<DMatrix<f64>> {
    if f0.dim() != f1.dim() {
        return Err(Error::DimensionMismatch {
            expected: f0.dim(),
            found: f1.dim(),
        });
    }
    cross_gram(f0, f1)
}

/// `<f_i, g_j>` for spaces of possibly different dimension.
pub fn cross_gram(f0: &Space, f1: &Space) -> Result<DMatrix<f64>> {
    let rule = common_quadrature(&[f0, f1], f0.degree() + f1.degree())?;
    let a = Sampled::new(f0, &rule.points, &rule.weights, 0);
    let b = Sampled::new(f1, &rule.points, &rule.weights, 0);
    let mut s = a.weighted_product(&b, 0, 0, None);
    if f0.spec() == f1.spec() {
        s = (&s + s.transpose()) * 0.5;
    }
    Ok(s)
}

/// Block-diagonal Gram matrix of product spaces, one square block per field.
pub fn block_gram(f0: &[Space], f1: &[Space]) -> Result<DMatrix<f64>> {
    if f0.len() != f1.len() {
        return Err(Error::DimensionMismatch {
            expected: f0.len(),
            found: f1.len(),
        });
    }
    let blocks = f0
        .iter()
        .zip(f1)
        .map(|(a, b)| gram_matrix(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(block_diagonal(&blocks))
}

pub(crate) fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Closed-form Chebyshev modal operator matrix `<T_i, T_j'>`.
pub fn cheb_modal_a(n: usize) -> Result<DMatrix<f64>> {
    chebyshev::modal_derivative_matrix(n)
}

/// Closed-form Chebyshev modal Gram matrix `<T_i, T_j>`.
pub fn cheb_modal_gram(n: usize) -> DMatrix<f64> {
    chebyshev::modal_gram(n)
}

/// Precomputed quadrature samples for applying a scalar operator with test
/// functions from `test`, trial functions from `trial` and state from
/// `state_space`.
#[derive(Debug, Clone)]
pub struct OperatorSampler {
    op: OperatorSpec,
    test: Sampled,
    trial: Sampled,
    state: Option<Sampled>,
}

impl OperatorSampler {
    pub fn new(
        op: &OperatorSpec,
        state_space: Option<&Space>,
        test: &Space,
        trial: &Space,
    ) -> Result<Self> {
        op.validate()?;
        if op.is_block() {
            return Err(Error::UnsupportedTerm(
                "block operators need block assembly".to_string(),
            ));
        }
        let order = op.max_order();
        check_piecewise_order(trial, order)?;
        if !op.is_constant() && state_space.is_none() {
            return Err(Error::InvalidOperator(
                "operator depends on u but no state was given".to_string(),
            ));
        }
        let state_space = if op.is_constant() { None } else { state_space };
        let mut spaces = vec![test, trial];
        let mut degree = test.degree() + trial.degree();
        if let Some(s) = state_space {
            check_piecewise_order(s, 1)?;
            spaces.push(s);
            degree += s.degree();
        }
        let rule = common_quadrature(&spaces, degree)?;
        Ok(Self {
            op: op.clone(),
            test: Sampled::new(test, &rule.points, &rule.weights, 0),
            trial: Sampled::new(trial, &rule.points, &rule.weights, order),
            state: state_space.map(|s| Sampled::new(s, &rule.points, &rule.weights, 1)),
        })
    }

    fn state_values(
        &self,
        u: Option<&DVector<f64>>,
    ) -> Result<Option<(DVector<f64>, DVector<f64>)>> {
        match (&self.state, u) {
            (None, _) => Ok(None),
            (Some(s), Some(u)) => {
                if u.len() != s.tables[0].ncols() {
                    return Err(Error::DimensionMismatch {
                        expected: s.tables[0].ncols(),
                        found: u.len(),
                    });
                }
                Ok(Some((&s.tables[0] * u, &s.tables[1] * u)))
            }
            (Some(_), None) => Err(Error::InvalidOperator(
                "operator depends on u but no state was given".to_string(),
            )),
        }
    }

    /// Assembled `A_ij(u) = <test_i, D(u) trial_j>`.
    pub fn matrix(&self, u: Option<&DVector<f64>>) -> Result<DMatrix<f64>> {
        let state = self.state_values(u)?;
        let mut a = DMatrix::zeros(self.test.tables[0].ncols(), self.trial.tables[0].ncols());
        for term in &self.op.terms {
            match *term {
                OperatorTerm::Derivative { coef, order } => {
                    a += self.test.weighted_product(&self.trial, 0, order, None) * coef;
                }
                OperatorTerm::SymmetricPair { coef } => {
                    let (uv, ux) = state.as_ref().expect("state checked");
                    // u g' + (u g)' = 2 u g' + u' g
                    a += self
                        .test
                        .weighted_product(&self.trial, 0, 1, Some(&(uv * 2.0)))
                        * coef;
                    a += self.test.weighted_product(&self.trial, 0, 0, Some(ux)) * coef;
                }
            }
        }
        Ok(a)
    }

    /// `A(u) y` without forming `A(u)`.
    pub fn apply(&self, u: Option<&DVector<f64>>, y: &DVector<f64>) -> Result<DVector<f64>> {
        let state = self.state_values(u)?;
        let npts = self.test.weights.len();
        let mut values = DVector::zeros(npts);
        for term in &self.op.terms {
            match *term {
                OperatorTerm::Derivative { coef, order } => {
                    values += (&self.trial.tables[order] * y) * coef;
                }
                OperatorTerm::SymmetricPair { coef } => {
                    let (uv, ux) = state.as_ref().expect("state checked");
                    let y0 = &self.trial.tables[0] * y;
                    let y1 = &self.trial.tables[1] * y;
                    values += (uv.component_mul(&y1) * 2.0 + ux.component_mul(&y0)) * coef;
                }
            }
        }
        Ok(self.test.tables[0].transpose() * values.component_mul(&self.test.weights))
    }
}

/// `A_ij(u) = <g_i, D(u) g_j>` on the scalar space `f1`.
pub fn operator_matrix(
    op: &OperatorSpec,
    state: OperatorState<'_>,
    f1: &Space,
) -> Result<DMatrix<f64>> {
    match state {
        OperatorState::Constant => OperatorSampler::new(op, None, f1, f1)?.matrix(None),
        OperatorState::Field { space, coeffs } => {
            OperatorSampler::new(op, Some(space), f1, f1)?.matrix(Some(coeffs))
        }
    }
}

/// Operator matrix of a constant block operator on the product space `f1`.
pub fn block_operator_matrix(op: &OperatorSpec, f1: &[Space]) -> Result<DMatrix<f64>> {
    let blocks = op
        .blocks
        .as_ref()
        .ok_or_else(|| Error::InvalidOperator("not a block operator".to_string()))?;
    op.validate()?;
    if blocks.size != f1.len() {
        return Err(Error::DimensionMismatch {
            expected: blocks.size,
            found: f1.len(),
        });
    }
    let offsets: Vec<usize> = f1
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.dim();
            Some(o)
        })
        .collect();
    let total: usize = f1.iter().map(Space::dim).sum();
    let mut a = DMatrix::zeros(total, total);
    for i in 0..blocks.size {
        for j in 0..blocks.size {
            let block = match blocks.get(i, j) {
                Block::Zero => continue,
                Block::Identity { scale } => cross_gram(&f1[i], &f1[j])? * *scale,
                Block::Operator { op } => {
                    OperatorSampler::new(op, None, &f1[i], &f1[j])?.matrix(None)?
                }
            };
            a.view_mut((offsets[i], offsets[j]), block.shape())
                .copy_from(&block);
        }
    }
    Ok(a)
}

/// `(S, A, A + A^T)` for chosen spaces and an operator.
#[derive(Debug, Clone)]
pub struct AssembledPair {
    pub s: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub defect: DMatrix<f64>,
    pub f0: BasisId,
    pub f1: BasisId,
}

impl AssembledPair {
    pub fn new(s: DMatrix<f64>, a: DMatrix<f64>, f0: BasisId, f1: BasisId) -> Self {
        let defect = sbp_defect(&a);
        Self {
            s,
            a,
            defect,
            f0,
            f1,
        }
    }
}

pub fn assemble(
    op: &OperatorSpec,
    state: OperatorState<'_>,
    f0: &Space,
    f1: &Space,
) -> Result<AssembledPair> {
    let s = gram_matrix(f0, f1)?;
    let a = operator_matrix(op, state, f1)?;
    Ok(AssembledPair::new(s, a, f0.id(), f1.id()))
}

/// `A + A^T`.
pub fn sbp_defect(a: &DMatrix<f64>) -> DMatrix<f64> {
    a + a.transpose()
}

/// `F^-T M F^-1`: re-expresses a bilinear-form matrix in the cardinal basis
/// whose functions have modal coefficients given by the columns of `F^-1`.
pub fn to_cardinal(m_modal: &DMatrix<f64>, f: &TransformMatrix) -> Result<DMatrix<f64>> {
    let fm = &f.matrix;
    if !fm.is_square() || fm.nrows() != m_modal.nrows() || !m_modal.is_square() {
        return Err(Error::DimensionMismatch {
            expected: fm.nrows(),
            found: m_modal.nrows(),
        });
    }
    let lut = fm.transpose().lu();
    // Y = F^-T M, then X = Y F^-1 = (F^-T Y^T)^T.
    let y = lut.solve(m_modal).ok_or(Error::Singular)?;
    let x = lut.solve(&y.transpose()).ok_or(Error::Singular)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(x.transpose())
}

/// Ratio of extreme singular values.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Factorized `S` supporting `S^-1 b` and `S^-T b`.
#[derive(Debug, Clone)]
pub struct GramSolver {
    kind: SolverKind,
}

#[derive(Debug, Clone)]
enum SolverKind {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu {
        lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        lut: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    },
}

impl GramSolver {
    /// Factorize `S`, refusing it when the condition estimate exceeds
    /// [`CONDITION_LIMIT`].
    pub fn new(s: &DMatrix<f64>) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::DimensionMismatch {
                expected: s.nrows(),
                found: s.ncols(),
            });
        }
        let cond = condition_estimate(s);
        if !cond.is_finite() {
            return Err(Error::Singular);
        }
        if cond > CONDITION_LIMIT {
            return Err(Error::IllConditioned(cond));
        }
        let symmetric = (s - s.transpose()).amax() <= 1e-13 * s.amax();
        if symmetric {
            if let Some(ch) = s.clone().cholesky() {
                return Ok(Self {
                    kind: SolverKind::Cholesky(ch),
                });
            }
        }
        Ok(Self {
            kind: SolverKind::Lu {
                lu: s.clone().lu(),
                lut: s.transpose().lu(),
            },
        })
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.kind {
            SolverKind::Cholesky(ch) => Ok(ch.solve(b)),
            SolverKind::Lu { lu, .. } => lu.solve(b).ok_or(Error::Singular),
        }
    }

    pub fn solve_transpose(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.kind {
            SolverKind::Cholesky(ch) => Ok(ch.solve(b)),
            SolverKind::Lu { lut, .. } => lut.solve(b).ok_or(Error::Singular),
        }
    }

    pub fn solve_transpose_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.kind {
            SolverKind::Cholesky(ch) => Ok(ch.solve(b)),
            SolverKind::Lu { lut, .. } => lut.solve(b).ok_or(Error::Singular),
        }
    }
}

/// `D = S^-T A` by linear solves.
pub fn diff_matrix(pair: &AssembledPair) -> Result<DMatrix<f64>> {
    GramSolver::new(&pair.s)?.solve_transpose_matrix(&pair.a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{cardinal_transform, BasisSpec, Family};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn space(f: Family, n: usize) -> Space {
        Space::new(BasisSpec::new(f, n)).unwrap()
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() < tol
    }

    #[test]
    fn fourier_gram_is_scaled_identity() {
        let s = space(Family::Fourier, 6);
        let g = gram_matrix(&s, &s).unwrap();
        assert!(close(&g, &(DMatrix::identity(13, 13) * PI), 1e-13));
        let c = space(Family::FourierCardinal, 6);
        let g = gram_matrix(&c, &c).unwrap();
        assert!(close(
            &g,
            &(DMatrix::identity(13, 13) * (2.0 * PI / 13.0)),
            1e-13
        ));
    }

    #[test]
    fn chebyshev_gram_closed_form() {
        let s = space(Family::ChebyshevModal, 8);
        let g = gram_matrix(&s, &s).unwrap();
        assert!(close(&g, &cheb_modal_gram(8), 1e-13));
        let a = operator_matrix(&OperatorSpec::dx(), OperatorState::Constant, &s).unwrap();
        assert!(close(&a, &cheb_modal_a(8).unwrap(), 1e-12));
    }

    #[test]
    fn cheb_modal_a_entries() {
        let a = cheb_modal_a(5).unwrap();
        assert_eq!(a[(0, 1)], 2.0);
        assert_eq!(a[(1, 0)], 0.0);
        assert_eq!(a[(1, 1)], 0.0);
    }

    #[test]
    fn piecewise_linear_gram_row() {
        let n = 8;
        let h = 2.0 / n as f64;
        let s = space(Family::PiecewiseLinear, n);
        let g = gram_matrix(&s, &s).unwrap();
        assert_abs_diff_eq!(g[(3, 2)], h / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(3, 3)], 4.0 * h / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(3, 4)], h / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(3, 5)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fourier_dx_is_antisymmetric() {
        for fam in [Family::Fourier, Family::FourierCardinal] {
            let s = space(fam, 5);
            let a = operator_matrix(&OperatorSpec::dx(), OperatorState::Constant, &s).unwrap();
            assert!(sbp_defect(&a).amax() < 1e-12);
        }
    }

    #[test]
    fn pair_with_constant_state_is_twice_dx() {
        let s = space(Family::ChebyshevModal, 6);
        let c = 1.7;
        let mut u = DVector::zeros(7);
        u[0] = c;
        let pair = OperatorSpec::new(vec![OperatorTerm::SymmetricPair { coef: 1.0 }]).unwrap();
        let a = operator_matrix(
            &pair,
            OperatorState::Field {
                space: &s,
                coeffs: &u,
            },
            &s,
        )
        .unwrap();
        let dx = operator_matrix(&OperatorSpec::dx(), OperatorState::Constant, &s).unwrap();
        assert!(close(&a, &(dx * (2.0 * c)), 1e-12));
    }

    #[test]
    fn constant_operator_ignores_state() {
        let s = space(Family::Fourier, 4);
        let u1 = DVector::from_fn(9, |i, _| i as f64);
        let u2 = DVector::from_fn(9, |i, _| -(i as f64).sqrt());
        let op = OperatorSpec::dx();
        let a1 = operator_matrix(
            &op,
            OperatorState::Field {
                space: &s,
                coeffs: &u1,
            },
            &s,
        )
        .unwrap();
        let a2 = operator_matrix(
            &op,
            OperatorState::Field {
                space: &s,
                coeffs: &u2,
            },
            &s,
        )
        .unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn state_required_for_pair() {
        let s = space(Family::Fourier, 4);
        let pair = OperatorSpec::new(vec![OperatorTerm::SymmetricPair { coef: 1.0 }]).unwrap();
        assert!(operator_matrix(&pair, OperatorState::Constant, &s).is_err());
    }

    #[test]
    fn matrix_free_apply_matches_assembly() {
        let s = space(Family::ChebyshevCardinal, 7);
        let op = OperatorSpec::parse("-2*upair - dx3", false).unwrap();
        let u = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin());
        let y = DVector::from_fn(8, |i, _| (i as f64 * 1.3).cos());
        let sampler = OperatorSampler::new(&op, Some(&s), &s, &s).unwrap();
        let a = sampler.matrix(Some(&u)).unwrap();
        let ay = sampler.apply(Some(&u), &y).unwrap();
        assert!((a * y - ay).amax() < 1e-11);
    }

    #[test]
    fn piecewise_linear_rejects_high_order() {
        let s = space(Family::PiecewiseLinear, 4);
        let op = OperatorSpec::derivative(1.0, 3);
        assert!(matches!(
            operator_matrix(&op, OperatorState::Constant, &s),
            Err(Error::UnsupportedTerm(_))
        ));
    }

    #[test]
    fn identity_transform_leaves_matrix() {
        let m = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let f = TransformMatrix {
            matrix: DMatrix::identity(3, 3),
            from: BasisId::new("a", 2),
            to: BasisId::new("b", 2),
        };
        assert_eq!(to_cardinal(&m, &f).unwrap(), m);
        let singular = TransformMatrix {
            matrix: DMatrix::zeros(3, 3),
            ..f
        };
        assert!(to_cardinal(&m, &singular).is_err());
    }

    #[test]
    fn cardinal_a_n3_matches_printed_matrix() {
        let f = cardinal_transform(3).unwrap();
        let a = to_cardinal(&cheb_modal_a(3).unwrap(), &f).unwrap();
        let printed = DMatrix::from_row_slice(
            4,
            4,
            &[
                -135.0, 184.0, -72.0, 23.0, -184.0, 0.0, 256.0, -72.0, 72.0, -256.0, 0.0, 184.0,
                -23.0, 72.0, -184.0, 135.0,
            ],
        ) / 270.0;
        assert!(close(&a, &printed, 1e-10));
    }

    #[test]
    fn corner_defect_for_endpoint_cardinals() {
        for fam in [Family::ChebyshevCardinal, Family::PiecewiseLinear] {
            let s = space(fam, 6);
            let a = operator_matrix(&OperatorSpec::dx(), OperatorState::Constant, &s).unwrap();
            let d = sbp_defect(&a);
            let mut expected = DMatrix::zeros(7, 7);
            expected[(0, 0)] = -1.0;
            expected[(6, 6)] = 1.0;
            assert!(close(&d, &expected, 1e-11), "{fam:?}");
        }
    }

    #[test]
    fn diff_matrix_row_sums_vanish() {
        for (fam, n) in [
            (Family::ChebyshevCardinal, 10),
            (Family::FourierCardinal, 6),
            (Family::PiecewiseLinear, 12),
            (Family::LegendreCardinal, 9),
        ] {
            let s = space(fam, n);
            let pair = assemble(&OperatorSpec::dx(), OperatorState::Constant, &s, &s).unwrap();
            let d = diff_matrix(&pair).unwrap();
            let sums = d.column_sum();
            assert!(sums.amax() < 1e-11, "{fam:?}");
        }
    }

    #[test]
    fn singular_gram_rejected() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let pair = AssembledPair::new(
            s,
            DMatrix::zeros(2, 2),
            BasisId::new("x", 1),
            BasisId::new("x", 1),
        );
        assert!(matches!(
            diff_matrix(&pair),
            Err(Error::Singular) | Err(Error::IllConditioned(_))
        ));
    }
}
