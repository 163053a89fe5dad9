//! Implicit midpoint and averaged-vector-field (AVF) time stepping.
//!
//! Midpoint conserves every quadratic first integral; AVF conserves `H`
//! itself whenever the operator `L = S^-T A S^-1` is constant. Both are
//! second order and symmetric.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SkewGradientSystem;

/// Right-hand side `u' = f(u)` of a (skew-)gradient system.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>>;
    fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>>;
    /// `L` with `f(u) = L grad H(u)`, if it does not depend on `u`.
    fn constant_operator(&self) -> Result<DMatrix<f64>>;
}

impl VectorField for SkewGradientSystem {
    fn dim(&self) -> usize {
        SkewGradientSystem::dim(self)
    }

    fn rhs(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        SkewGradientSystem::rhs(self, u)
    }

    fn gradient(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        SkewGradientSystem::gradient(self, u)
    }

    fn constant_operator(&self) -> Result<DMatrix<f64>> {
        self.linear_operator()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Midpoint,
    Avf,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Self::Midpoint),
            "avf" => Ok(Self::Avf),
            _ => Err(Error::InvalidConfig(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Fixed-point iteration, falling back to Newton if it does not contract.
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub method: Method,
    pub tau: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_solver() -> SolverKind {
    SolverKind::FixedPoint
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    100
}

impl StepperConfig {
    pub fn new(method: Method, tau: f64) -> Self {
        Self {
            method,
            tau,
            solver: default_solver(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau != 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step size must be finite and nonzero, got {}",
                self.tau
            )));
        }
        if self.tol.is_nan() || self.tol <= f64::EPSILON {
            return Err(Error::InvalidConfig(format!(
                "solver tolerance {} is below machine epsilon",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig(
                "max_iter must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, three points: exact for the
/// line integral of a gradient that is at most quintic along the segment.
const AVF_NODES: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const AVF_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// One-step map for a fixed system and configuration. Caches `L` for AVF.
pub struct Stepper<'a, F: VectorField + ?Sized> {
    field: &'a F,
    config: StepperConfig,
    operator: Option<DMatrix<f64>>,
}

impl<'a, F: VectorField + ?Sized> Stepper<'a, F> {
    pub fn new(field: &'a F, config: StepperConfig) -> Result<Self> {
        config.validate()?;
        let operator = match config.method {
            Method::Midpoint => None,
            Method::Avf => Some(field.constant_operator()?),
        };
        Ok(Self {
            field,
            config,
            operator,
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    /// `(w - u) / tau - f(w; u)`, scaled by `tau`.
    fn residual(&self, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        let tau = self.config.tau;
        let incr = match &self.operator {
            None => self.field.rhs(&((u + w) * 0.5))?,
            Some(l) => {
                let mut g = DVector::zeros(u.len());
                for (xi, wt) in AVF_NODES.iter().zip(AVF_WEIGHTS) {
                    g += self.field.gradient(&(u + (w - u) * *xi))? * wt;
                }
                l * g
            }
        };
        Ok(w - u - incr * tau)
    }

    pub fn step(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.field.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.field.dim(),
                found: u.len(),
            });
        }
        let g = |w: &DVector<f64>| self.residual(u, w);
        let scale = u.amax().max(1.0);
        let tol = self.config.tol * scale;
        let mut history = Vec::new();
        let mut w = u.clone();
        if self.config.solver == SolverKind::FixedPoint {
            let mut r = g(&w)?;
            for _ in 0..self.config.max_iter {
                let norm = r.amax();
                history.push(norm);
                if norm <= tol {
                    // The pending update is free and removes the bias of
                    // stopping right at the tolerance.
                    return Ok(w - r);
                }
                // Give up on contraction after a clear increase.
                if history.len() > 2 && norm > history[history.len() - 2] {
                    break;
                }
                w -= &r;
                r = g(&w)?;
            }
            w = u.clone();
        }
        newton(&g, w, tol, self.config.max_iter, history)
    }
}

/// Central-difference Jacobian of `g` at `w`.
fn fd_jacobian<G>(g: &G, w: &DVector<f64>) -> Result<DMatrix<f64>>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = w.len();
    let mut jac = DMatrix::zeros(n, n);
    let h = 1e-5 * w.amax().max(1.0);
    let mut probe = w.clone();
    for j in 0..n {
        probe[j] = w[j] + h;
        let plus = g(&probe)?;
        probe[j] = w[j] - h;
        let minus = g(&probe)?;
        probe[j] = w[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Ok(jac)
}

/// Simplified Newton: the Jacobian is refreshed only when convergence
/// slows.
fn newton<G>(
    g: &G,
    mut w: DVector<f64>,
    tol: f64,
    max_iter: usize,
    mut history: Vec<f64>,
) -> Result<DVector<f64>>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut lu = fd_jacobian(g, &w)?.lu();
    let mut r = g(&w)?;
    let mut prev = f64::INFINITY;
    for _ in 0..max_iter {
        let norm = r.amax();
        history.push(norm);
        if norm <= tol {
            return Ok(match lu.solve(&r) {
                Some(dw) => w - dw,
                None => w,
            });
        }
        if !norm.is_finite() {
            break;
        }
        if norm > 0.25 * prev {
            lu = fd_jacobian(g, &w)?.lu();
        }
        prev = norm;
        let dw = lu.solve(&r).ok_or(Error::Singular)?;
        w -= dw;
        r = g(&w)?;
    }
    let last = history.last().copied().unwrap_or(f64::NAN);
    // Stagnation at roundoff level still counts as converged.
    if last <= 10.0 * tol {
        return Ok(w);
    }
    Err(Error::SolverFailure {
        iterations: history.len(),
        last_residual: last,
        residual_history: history,
    })
}

/// Solve `(w - u)/tau = f((u + w)/2)`.
pub fn midpoint_step<F: VectorField + ?Sized>(
    field: &F,
    u: &DVector<f64>,
    config: &StepperConfig,
) -> Result<DVector<f64>> {
    let cfg = StepperConfig {
        method: Method::Midpoint,
        ..*config
    };
    Stepper::new(field, cfg)?.step(u)
}

/// Solve `(w - u)/tau = L int_0^1 grad H(u + xi (w - u)) dxi`.
pub fn avf_step<F: VectorField + ?Sized>(
    field: &F,
    u: &DVector<f64>,
    config: &StepperConfig,
) -> Result<DVector<f64>> {
    let cfg = StepperConfig {
        method: Method::Avf,
        ..*config
    };
    Stepper::new(field, cfg)?.step(u)
}

type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> Result<f64> + Send + Sync>;

/// Named scalar function of the state, evaluated after every step.
#[derive(Clone)]
pub struct Observer {
    pub name: String,
    f: ScalarFn,
}

impl std::fmt::Debug for Observer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observer")
            .field("name", &self.name)
            .finish()
    }
}

impl Observer {
    pub fn new(
        name: &str,
        f: impl Fn(&DVector<f64>) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, u: &DVector<f64>) -> Result<f64> {
        (self.f)(u)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub observer_names: Vec<String>,
    /// `series[k][j]`: observer `j` at time `times[k]`.
    pub series: Vec<Vec<f64>>,
    /// Set when a step failed; the data up to that point is kept.
    pub failure: Option<Error>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    /// `max_k |obs_j(t_k) - obs_j(0)|` per observer.
    pub fn max_drift(&self) -> Vec<f64> {
        let Some(first) = self.series.first() else {
            return vec![0.0; self.observer_names.len()];
        };
        (0..first.len())
            .map(|j| {
                self.series
                    .iter()
                    .map(|row| (row[j] - first[j]).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn last_state(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }
}

/// Number of steps of size `tau` that fit in `t_end`, tolerant of the
/// roundoff in `t_end / tau`.
pub fn step_count(tau: f64, t_end: f64) -> usize {
    let r = t_end / tau;
    let k = r.round();
    if (r - k).abs() <= 1e-9 * r.abs().max(1.0) {
        k as usize
    } else {
        r.floor() as usize
    }
}

/// Step from `u0` to `t_end`; observations at `t = k tau`, `k = 0..=floor(T/tau)`.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    u0: &DVector<f64>,
    config: &StepperConfig,
    t_end: f64,
    observers: &[Observer],
) -> Result<Trajectory> {
    if t_end.is_nan() || t_end < 0.0 || config.tau <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "integration needs T >= 0 and tau > 0, got T = {t_end}, tau = {}",
            config.tau
        )));
    }
    let stepper = Stepper::new(field, *config)?;
    let steps = step_count(config.tau, t_end);
    let observe = |u: &DVector<f64>| {
        observers
            .iter()
            .map(|o| o.eval(u))
            .collect::<Result<Vec<_>>>()
    };
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        observer_names: observers.iter().map(|o| o.name.clone()).collect(),
        series: vec![observe(u0)?],
        failure: None,
    };
    let mut u = u0.clone();
    for k in 1..=steps {
        match stepper.step(&u) {
            Ok(next) => u = next,
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        }
        traj.times.push(k as f64 * config.tau);
        traj.series.push(observe(&u)?);
        traj.states.push(u.clone());
    }
    Ok(traj)
}
