//! Finite-dimensional function spaces: grids, basis families, transforms and
//! quadrature.
//!
//! A [`BasisSpec`] is a plain description; [`Space`] is the realized space,
//! able to evaluate its basis functions (and their derivatives) anywhere in
//! the domain and to pick a quadrature rule that integrates products of its
//! functions exactly.

pub mod chebyshev;
pub mod fourier;
pub mod legendre;

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use chebyshev::{cardinal_transform, chebyshev_points, inverse_cardinal_transform};
pub use legendre::{cheb_to_legendre, gauss_legendre, legendre_to_cheb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Trigonometric polynomials, spectral basis.
    Fourier,
    /// Trigonometric polynomials, cardinal basis on the equispaced grid.
    FourierCardinal,
    ChebyshevModal,
    /// Lagrange basis on the Chebyshev points `-cos(i pi / n)`.
    ChebyshevCardinal,
    LegendreModal,
    /// Lagrange basis on the `n + 1` Gauss–Legendre nodes.
    LegendreCardinal,
    /// Hat functions on a uniform grid of `n` intervals.
    PiecewiseLinear,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Fourier => "fourier",
            Family::FourierCardinal => "fourier-cardinal",
            Family::ChebyshevModal => "chebyshev-modal",
            Family::ChebyshevCardinal => "chebyshev-cardinal",
            Family::LegendreModal => "legendre-modal",
            Family::LegendreCardinal => "legendre-cardinal",
            Family::PiecewiseLinear => "piecewise-linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fourier" => Family::Fourier,
            "fourier-cardinal" => Family::FourierCardinal,
            "chebyshev-modal" => Family::ChebyshevModal,
            "chebyshev-cardinal" => Family::ChebyshevCardinal,
            "legendre-modal" => Family::LegendreModal,
            "legendre-cardinal" => Family::LegendreCardinal,
            "piecewise-linear" => Family::PiecewiseLinear,
            other => return Err(Error::InvalidBasis(format!("unknown family '{other}'"))),
        })
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, Family::Fourier | Family::FourierCardinal)
    }

    /// Global polynomial families (one element on `[-1, 1]`).
    pub fn is_polynomial(self) -> bool {
        matches!(
            self,
            Family::ChebyshevModal
                | Family::ChebyshevCardinal
                | Family::LegendreModal
                | Family::LegendreCardinal
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    Left,
    Right,
}

/// One term `coef * v^{(order)}(endpoint)` of a boundary functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTerm {
    pub endpoint: Endpoint,
    pub order: usize,
    pub coef: f64,
}

/// A homogeneous linear boundary condition `sum_k coef_k v^{(order_k)}(x_k) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConstraint {
    pub terms: Vec<BoundaryTerm>,
}

impl BoundaryConstraint {
    /// `v^{(order)}(endpoint) = 0`.
    pub fn vanishes(endpoint: Endpoint, order: usize) -> Self {
        Self {
            terms: vec![BoundaryTerm {
                endpoint,
                order,
                coef: 1.0,
            }],
        }
    }

    /// `v^{(order)}(1) = v^{(order)}(-1)`.
    pub fn matched(order: usize) -> Self {
        Self {
            terms: vec![
                BoundaryTerm {
                    endpoint: Endpoint::Right,
                    order,
                    coef: 1.0,
                },
                BoundaryTerm {
                    endpoint: Endpoint::Left,
                    order,
                    coef: -1.0,
                },
            ],
        }
    }

    /// `v' (+-1) = 0`.
    pub fn neumann() -> Vec<Self> {
        vec![
            Self::vanishes(Endpoint::Left, 1),
            Self::vanishes(Endpoint::Right, 1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: Family,
    /// Trigonometric degree, polynomial degree, or interval count.
    pub n: usize,
    pub domain: (f64, f64),
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<BoundaryConstraint>,
}

impl BasisSpec {
    /// Spec with the family's default domain and no constraints.
    pub fn new(family: Family, n: usize) -> Self {
        let domain = if family.is_periodic() {
            (0.0, 2.0 * PI)
        } else {
            (-1.0, 1.0)
        };
        Self {
            family,
            n,
            domain,
            constraints: Vec::new(),
        }
    }

    pub fn with_constraints(mut self, constraints: Vec<BoundaryConstraint>) -> Self {
        self.constraints = constraints;
        self
    }

    pub fn with_domain(mut self, a: f64, b: f64) -> Self {
        self.domain = (a, b);
        self
    }

    pub fn id(&self) -> BasisId {
        let mut name = self.family.name().to_string();
        if !self.constraints.is_empty() {
            name.push_str(&format!("+{}bc", self.constraints.len()));
        }
        BasisId { name, n: self.n }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Short identifier used in transform metadata and exchange files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisId {
    pub name: String,
    pub n: usize,
}

impl BasisId {
    pub fn new(name: &str, n: usize) -> Self {
        Self {
            name: name.to_string(),
            n,
        }
    }
}

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={})", self.name, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Chebyshev,
    Uniform,
    GaussLegendre,
    User,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    pub kind: GridKind,
}

impl Grid {
    /// A user grid; points must be strictly increasing.
    pub fn user(points: Vec<f64>) -> Result<Self> {
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidBasis(
                "grid points must be strictly increasing".to_string(),
            ));
        }
        Ok(Self {
            points,
            kind: GridKind::User,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Change of basis between two representations of the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMatrix {
    pub matrix: DMatrix<f64>,
    pub from: BasisId,
    pub to: BasisId,
}

impl TransformMatrix {
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// Inverse by dense LU.
    pub fn inverse(&self) -> Result<TransformMatrix> {
        let inv = self
            .matrix
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::Singular)?;
        Ok(TransformMatrix {
            matrix: inv,
            from: self.to.clone(),
            to: self.from.clone(),
        })
    }
}

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Clone)]
enum Repr {
    FourierSpectral,
    FourierCardinal,
    ChebyshevModal,
    ChebyshevCardinal {
        finv: DMatrix<f64>,
    },
    LegendreModal,
    LegendreCardinal {
        vinv: DMatrix<f64>,
    },
    /// Columns are basis functions in orthonormal Legendre coefficients.
    Constrained {
        basis: DMatrix<f64>,
    },
    PiecewiseLinear {
        nodes: Vec<f64>,
    },
}

/// A realized finite-dimensional space.
#[derive(Debug, Clone)]
pub struct Space {
    spec: BasisSpec,
    repr: Repr,
    dim: usize,
}

impl Space {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        let n = spec.n;
        let (a, b) = spec.domain;
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidBasis(format!("bad domain ({a}, {b})")));
        }
        if spec.family.is_periodic() {
            if (a, b) != (0.0, 2.0 * PI) {
                return Err(Error::InvalidBasis(
                    "Fourier families live on [0, 2pi)".to_string(),
                ));
            }
        } else if spec.family.is_polynomial() && (a, b) != (-1.0, 1.0) {
            return Err(Error::InvalidBasis(
                "polynomial families live on [-1, 1]".to_string(),
            ));
        }
        if !spec.constraints.is_empty()
            && !matches!(spec.family, Family::ChebyshevModal | Family::LegendreModal)
        {
            return Err(Error::InvalidBasis(format!(
                "boundary constraints are only admitted for modal polynomial families, not {}",
                spec.family.name()
            )));
        }
        let (repr, dim) = match spec.family {
            Family::Fourier => (Repr::FourierSpectral, fourier::dimension(n)),
            Family::FourierCardinal => (Repr::FourierCardinal, fourier::dimension(n)),
            Family::ChebyshevModal | Family::LegendreModal if !spec.constraints.is_empty() => {
                let basis = constrained_basis(n, &spec.constraints)?;
                let dim = basis.ncols();
                (Repr::Constrained { basis }, dim)
            }
            Family::ChebyshevModal => (Repr::ChebyshevModal, n + 1),
            Family::ChebyshevCardinal => {
                let finv = inverse_cardinal_transform(n)?.matrix;
                (Repr::ChebyshevCardinal { finv }, n + 1)
            }
            Family::LegendreModal => (Repr::LegendreModal, n + 1),
            Family::LegendreCardinal => {
                let (grid, w) = gauss_legendre(n + 1)?;
                // Discrete orthogonality on n + 1 Gauss nodes is exact up to
                // degree 2n + 1, so V^-1 = diag((2k + 1) / 2) V^T W.
                let vinv = DMatrix::from_fn(n + 1, n + 1, |k, q| {
                    let p = legendre::eval_derivative(n, grid.points[q], 0)[k];
                    (2.0 * k as f64 + 1.0) / 2.0 * p * w[q]
                });
                (Repr::LegendreCardinal { vinv }, n + 1)
            }
            Family::PiecewiseLinear => {
                if n == 0 {
                    return Err(Error::InvalidBasis(
                        "piecewise-linear space needs at least one interval".to_string(),
                    ));
                }
                let h = (b - a) / n as f64;
                let mut nodes: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
                nodes[n] = b;
                (Repr::PiecewiseLinear { nodes }, n + 1)
            }
        };
        if dim == 0 {
            return Err(Error::InvalidBasis(
                "constraints leave an empty space".to_string(),
            ));
        }
        Ok(Self { spec, repr, dim })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> BasisId {
        self.spec.id()
    }

    /// Polynomial (or trigonometric) degree of the basis functions; 1 for
    /// piecewise-linear spaces (per element).
    pub fn degree(&self) -> usize {
        match self.repr {
            Repr::PiecewiseLinear { .. } => 1,
            _ => self.spec.n,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.spec.family.is_periodic()
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self.repr, Repr::PiecewiseLinear { .. })
    }

    /// Designated grid of a cardinal interpretation, if any.
    pub fn grid(&self) -> Option<Grid> {
        let n = self.spec.n;
        match &self.repr {
            Repr::FourierSpectral | Repr::FourierCardinal => Some(Grid {
                points: fourier::grid_points(n),
                kind: GridKind::Uniform,
            }),
            Repr::ChebyshevCardinal { .. } => chebyshev_points(n).ok(),
            Repr::LegendreCardinal { .. } => gauss_legendre(n + 1).ok().map(|(g, _)| g),
            Repr::PiecewiseLinear { nodes } => Some(Grid {
                points: nodes.clone(),
                kind: GridKind::Uniform,
            }),
            _ => None,
        }
    }

    /// `E[q, j] = g_j^{(deriv)}(x_q)`.
    pub fn eval(&self, x: &[f64], deriv: usize) -> DMatrix<f64> {
        let n = self.spec.n;
        let rows = x.len();
        match &self.repr {
            Repr::FourierSpectral => {
                rows_to_matrix(x, self.dim, |xq| fourier::eval_spectral(n, xq, deriv))
            }
            Repr::FourierCardinal => {
                rows_to_matrix(x, self.dim, |xq| fourier::eval_cardinal(n, xq, deriv))
            }
            Repr::ChebyshevModal => {
                rows_to_matrix(x, self.dim, |xq| chebyshev::eval_derivative(n, xq, deriv))
            }
            Repr::ChebyshevCardinal { finv } => {
                let modal = rows_to_matrix(x, n + 1, |xq| chebyshev::eval_derivative(n, xq, deriv));
                modal * finv
            }
            Repr::LegendreModal => {
                rows_to_matrix(x, self.dim, |xq| legendre::eval_derivative(n, xq, deriv))
            }
            Repr::LegendreCardinal { vinv } => {
                let modal = rows_to_matrix(x, n + 1, |xq| legendre::eval_derivative(n, xq, deriv));
                modal * vinv
            }
            Repr::Constrained { basis } => {
                let modal = rows_to_matrix(x, n + 1, |xq| orthonormal_legendre(n, xq, deriv));
                modal * basis
            }
            Repr::PiecewiseLinear { nodes } => {
                let mut e = DMatrix::zeros(rows, self.dim);
                for (q, &xq) in x.iter().enumerate() {
                    let k = element_of(nodes, xq);
                    let (x0, x1) = (nodes[k], nodes[k + 1]);
                    let h = x1 - x0;
                    match deriv {
                        0 => {
                            e[(q, k)] = (x1 - xq) / h;
                            e[(q, k + 1)] = (xq - x0) / h;
                        }
                        1 => {
                            e[(q, k)] = -1.0 / h;
                            e[(q, k + 1)] = 1.0 / h;
                        }
                        _ => {}
                    }
                }
                e
            }
        }
    }

    /// Evaluate `sum_j c_j g_j^{(deriv)}` at the points `x`.
    pub fn eval_function(&self, coeffs: &DVector<f64>, x: &[f64], deriv: usize) -> DVector<f64> {
        self.eval(x, deriv) * coeffs
    }

    /// A rule integrating, exactly, any product of functions from this space
    /// (and its derivatives) of total degree `degree`.
    pub fn quadrature(&self, degree: usize) -> QuadRule {
        common_quadrature(&[self], degree).expect("single space is always compatible")
    }

    /// Change of basis from this space's coefficients to values on its grid,
    /// when it has one.
    pub fn to_grid_values(&self) -> Result<TransformMatrix> {
        let grid = self
            .grid()
            .ok_or_else(|| Error::InvalidBasis(format!("{} has no designated grid", self.id())))?;
        Ok(TransformMatrix {
            matrix: self.eval(&grid.points, 0),
            from: self.id(),
            to: BasisId::new("grid-values", self.spec.n),
        })
    }
}

fn rows_to_matrix(x: &[f64], cols: usize, f: impl Fn(f64) -> Vec<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(x.len(), cols);
    for (q, &xq) in x.iter().enumerate() {
        for (j, v) in f(xq).into_iter().enumerate() {
            m[(q, j)] = v;
        }
    }
    m
}

fn element_of(nodes: &[f64], x: f64) -> usize {
    let last = nodes.len() - 2;
    match nodes.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(last),
        Err(i) => i.saturating_sub(1).min(last),
    }
}

/// `sqrt((2k + 1) / 2) P_k^{(deriv)}(x)`, orthonormal on `[-1, 1]`.
fn orthonormal_legendre(n: usize, x: f64, deriv: usize) -> Vec<f64> {
    let mut v = legendre::eval_derivative(n, x, deriv);
    for (k, val) in v.iter_mut().enumerate() {
        *val *= ((2.0 * k as f64 + 1.0) / 2.0).sqrt();
    }
    v
}

/// Orthonormal basis (in orthonormal-Legendre coordinates) of the subspace
/// of `P_n` annihilated by the constraints.
fn constrained_basis(n: usize, constraints: &[BoundaryConstraint]) -> Result<DMatrix<f64>> {
    let mut c: DMatrix<f64> = DMatrix::zeros(constraints.len(), n + 1);
    for (r, constraint) in constraints.iter().enumerate() {
        for term in &constraint.terms {
            let x = match term.endpoint {
                Endpoint::Left => -1.0,
                Endpoint::Right => 1.0,
            };
            for (k, v) in orthonormal_legendre(n, x, term.order)
                .into_iter()
                .enumerate()
            {
                c[(r, k)] += term.coef * v;
            }
        }
    }
    let gram = c.transpose() * &c;
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let tol = 1e-10 * max.max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let null: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] <= tol)
        .collect();
    let mut basis = DMatrix::zeros(n + 1, null.len());
    for (col, &i) in null.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        basis.set_column(col, &v);
    }
    Ok(basis)
}

/// A quadrature rule exact for products of total degree `degree` drawn from
/// all `spaces`, which must share a domain.
pub fn common_quadrature(spaces: &[&Space], degree: usize) -> Result<QuadRule> {
    let first = spaces
        .first()
        .ok_or_else(|| Error::IncompatibleSpaces("no spaces given".to_string()))?;
    let domain = first.spec.domain;
    if spaces.iter().any(|s| s.spec.domain != domain) {
        return Err(Error::IncompatibleSpaces("domains differ".to_string()));
    }
    let periodic = spaces.iter().filter(|s| s.is_periodic()).count();
    if periodic != 0 && periodic != spaces.len() {
        return Err(Error::IncompatibleSpaces(
            "cannot mix periodic and polynomial spaces".to_string(),
        ));
    }
    if periodic > 0 {
        // The trapezoid rule on m points is exact for |k| < m.
        let m = degree + 1;
        let w = 2.0 * PI / m as f64;
        return Ok(QuadRule {
            points: (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect(),
            weights: vec![w; m],
        });
    }
    let points_needed = degree / 2 + 1;
    let (ref_grid, ref_w) = gauss_legendre(points_needed)?;
    let mut breaks: Vec<f64> = vec![domain.0, domain.1];
    for s in spaces {
        if let Repr::PiecewiseLinear { nodes } = &s.repr {
            breaks.extend_from_slice(nodes);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * (domain.1 - domain.0));
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in ref_grid.points.iter().zip(&ref_w) {
            points.push(mid + half * x);
            weights.push(half * w);
        }
    }
    Ok(QuadRule { points, weights })
}

/// `w_j = int f_j dx` for a basis with a cardinal interpretation.
pub fn quadrature_weights(spec: &BasisSpec) -> Result<Vec<f64>> {
    let space = Space::new(spec.clone())?;
    let n = spec.n;
    match &space.repr {
        Repr::FourierSpectral | Repr::FourierCardinal => {
            let m = fourier::dimension(n);
            Ok(vec![2.0 * PI / m as f64; m])
        }
        Repr::ChebyshevCardinal { .. } => chebyshev::clenshaw_curtis_weights(n),
        Repr::LegendreCardinal { .. } => Ok(gauss_legendre(n + 1)?.1),
        Repr::PiecewiseLinear { nodes } => {
            let mut w = vec![0.0; nodes.len()];
            for (k, seg) in nodes.windows(2).enumerate() {
                let h = seg[1] - seg[0];
                w[k] += 0.5 * h;
                w[k + 1] += 0.5 * h;
            }
            Ok(w)
        }
        _ => Err(Error::InvalidBasis(format!(
            "{} is modal and has no designated grid",
            spec.id()
        ))),
    }
}

/// `int g_j dx` for every basis function, by exact quadrature. Unlike
/// [`quadrature_weights`] this works for modal bases too.
pub fn basis_integrals(space: &Space) -> DVector<f64> {
    let rule = space.quadrature(space.degree());
    let e = space.eval(&rule.points, 0);
    e.transpose() * DVector::from_vec(rule.weights)
}
