//! Experiment configuration, simulation runs and self-convergence studies.
//!
//! A run is fully described by an [`ExperimentConfig`] (TOML). Outputs are
//! deterministic: the same config and seed give byte-identical CSV files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::OperatorSpec;
use crate::basis::{fourier, legendre, BasisSpec, Family, Space};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::io::Table;
use crate::system::{kdv_form1, kdv_form2, wave_system, SkewGradientSystem};
use crate::timeint::{integrate, Method, Observer, SolverKind, StepperConfig, Trajectory};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "DUALCOMP_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    KdvForm1,
    KdvForm2,
    Wave,
    CustomOperator,
}

impl Problem {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kdv-form1" => Ok(Self::KdvForm1),
            "kdv-form2" => Ok(Self::KdvForm2),
            "wave" => Ok(Self::Wave),
            "custom-operator" => Ok(Self::CustomOperator),
            _ => Err(Error::InvalidConfig(format!("unknown problem '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `A cos x` (periodic) or `q = A cos(pi x)`, `p = 0` (wave).
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `c/2 sech^2(sqrt(c)/2 (x - x0))`; periodic problems only.
    Soliton {
        speed: f64,
        #[serde(default = "pi")]
        center: f64,
    },
    Constant {
        value: f64,
    },
    /// `A exp(cos x)` (periodic) or `q = A exp(cos(pi x))`, `p = 0` (wave).
    /// Entire, so every Fourier coefficient is nonzero.
    ExpCos {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `cos(m x)` (periodic) or `q = cos(m pi x)`, `p = 0` (wave).
    StandingCos {
        #[serde(default = "one_usize")]
        mode: usize,
    },
    /// Random series with coefficients `U(-1, 1) / (1 + k)^decay`, seeded by
    /// the config seed.
    RandomSmooth {
        #[serde(default = "two")]
        decay: f64,
        #[serde(default = "default_modes")]
        modes: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn pi() -> f64 {
    PI
}
fn one_usize() -> usize {
    1
}
fn default_modes() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub method: Method,
    pub tau: f64,
    pub t_end: f64,
    #[serde(default = "fixed_point")]
    pub solver: SolverKind,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
}

fn fixed_point() -> SolverKind {
    SolverKind::FixedPoint
}
fn tol() -> f64 {
    1e-12
}
fn max_iter() -> usize {
    100
}

impl TimeConfig {
    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            method: self.method,
            tau: self.tau,
            solver: self.solver,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_traj")]
    pub trajectory: String,
    #[serde(default = "default_cons")]
    pub conservation: String,
}

fn default_dir() -> String {
    ".".to_string()
}
fn default_traj() -> String {
    "trajectory.csv".to_string()
}
fn default_cons() -> String {
    "conservation.csv".to_string()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            trajectory: default_traj(),
            conservation: default_cons(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub n: usize,
    /// Basis family; fixed for the KdV and wave problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Family>,
    /// Operator string for `custom-operator`, e.g. `"-2*upair - dxxx"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    /// Monomial coefficients of the wave speed `a(x)`.
    #[serde(default = "unit_speed")]
    pub wave_speed: Vec<f64>,
    pub initial: InitialCondition,
    pub time: TimeConfig,
    /// Observer names: `H`, `H1`, `H2`, `C`, `norm`. Empty selects defaults.
    #[serde(default)]
    pub observers: Vec<String>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn unit_speed() -> Vec<f64> {
    vec![1.0]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.time.stepper().validate()?;
        if self.time.tau.is_nan()
            || self.time.tau <= 0.0
            || self.time.t_end.is_nan()
            || self.time.t_end < 0.0
        {
            return Err(Error::InvalidConfig(
                "need tau > 0 and t_end >= 0".to_string(),
            ));
        }
        match self.problem {
            Problem::KdvForm1 | Problem::KdvForm2 => {
                if self.problem == Problem::KdvForm2 && self.time.method == Method::Avf {
                    return Err(Error::InvalidConfig(
                        "avf needs a constant operator; use kdv-form1 or midpoint".to_string(),
                    ));
                }
                if self.basis.is_some_and(|b| b != Family::Fourier) {
                    return Err(Error::InvalidConfig(
                        "KdV problems use the fourier basis".to_string(),
                    ));
                }
            }
            Problem::Wave => {
                if self.basis.is_some_and(|b| b != Family::LegendreModal) {
                    return Err(Error::InvalidConfig(
                        "the wave problem uses the legendre-modal basis".to_string(),
                    ));
                }
                if self.wave_speed.is_empty() {
                    return Err(Error::InvalidConfig(
                        "wave_speed needs at least one coefficient".to_string(),
                    ));
                }
            }
            Problem::CustomOperator => {
                if self.operator.is_none() {
                    return Err(Error::InvalidConfig(
                        "custom-operator needs 'operator'".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn observer_names(&self) -> Vec<String> {
        if !self.observers.is_empty() {
            return self.observers.clone();
        }
        let names: &[&str] = match self.problem {
            Problem::KdvForm1 | Problem::KdvForm2 => &["H1", "H2", "C"],
            Problem::Wave | Problem::CustomOperator => &["H"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Configured output directory, unless overridden by [`OUT_DIR_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => PathBuf::from(&self.output.dir),
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

pub fn build_system(cfg: &ExperimentConfig) -> Result<SkewGradientSystem> {
    cfg.validate()?;
    match cfg.problem {
        Problem::KdvForm1 => kdv_form1(cfg.n),
        Problem::KdvForm2 => kdv_form2(cfg.n),
        Problem::Wave => wave_system(cfg.n, &cfg.wave_speed),
        Problem::CustomOperator => {
            let op = OperatorSpec::parse(cfg.operator.as_deref().unwrap_or_default(), false)?;
            let space = Space::new(BasisSpec::new(cfg.basis.unwrap_or(Family::Fourier), cfg.n))?;
            SkewGradientSystem::new(
                "custom-operator",
                vec![space.clone()],
                vec![space],
                op,
                &HamiltonianSpec::half_l2(),
            )
        }
    }
}

/// Random smooth function: a trigonometric series on periodic domains, a
/// Legendre series otherwise.
fn random_series(
    rng: &mut ChaCha8Rng,
    periodic: bool,
    modes: usize,
    decay: f64,
) -> impl Fn(f64) -> f64 {
    let coeffs: Vec<f64> = (0..(2 * modes + 1))
        .map(|i| {
            let k = i.div_ceil(2);
            rng.random_range(-1.0..1.0) / (1.0 + k as f64).powf(decay)
        })
        .collect();
    move |x| {
        if periodic {
            let basis = fourier::eval_spectral(modes, x, 0);
            basis.iter().zip(&coeffs).map(|(b, c)| b * c).sum()
        } else {
            legendre::eval_series(&coeffs[..=modes], x)
        }
    }
}

/// Coefficients of the initial state in the system's trial space.
pub fn initial_state(cfg: &ExperimentConfig, sys: &SkewGradientSystem) -> Result<DVector<f64>> {
    let periodic = sys.f0()[0].is_periodic();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fields = sys.f0().len();
    let zero = |_: f64| 0.0;
    let f: Box<dyn Fn(f64) -> f64> = match cfg.initial {
        InitialCondition::Cos { amplitude } => {
            if periodic {
                Box::new(move |x: f64| amplitude * x.cos())
            } else {
                Box::new(move |x: f64| amplitude * (PI * x).cos())
            }
        }
        InitialCondition::StandingCos { mode } => {
            let m = mode as f64;
            if periodic {
                Box::new(move |x: f64| (m * x).cos())
            } else {
                Box::new(move |x: f64| (m * PI * x).cos())
            }
        }
        InitialCondition::Constant { value } => Box::new(move |_| value),
        InitialCondition::ExpCos { amplitude } => {
            let k = if periodic { 1.0 } else { PI };
            Box::new(move |x: f64| amplitude * (k * x).cos().exp())
        }
        InitialCondition::Soliton { speed, center } => {
            if !periodic || speed <= 0.0 {
                return Err(Error::InvalidConfig(
                    "soliton data needs a periodic problem and positive speed".to_string(),
                ));
            }
            Box::new(move |x: f64| {
                // Nearest periodic image of the centre.
                let d = (x - center + PI).rem_euclid(2.0 * PI) - PI;
                0.5 * speed / (0.5 * speed.sqrt() * d).cosh().powi(2)
            })
        }
        InitialCondition::RandomSmooth { decay, modes } => {
            Box::new(random_series(&mut rng, periodic, modes, decay))
        }
    };
    if fields == 1 {
        return sys.project(&[&*f]);
    }
    // Wave: displacement from the data, momentum zero except for random data.
    let p: Box<dyn Fn(f64) -> f64> = match cfg.initial {
        InitialCondition::RandomSmooth { decay, modes } => {
            Box::new(random_series(&mut rng, false, modes, decay))
        }
        _ => Box::new(zero),
    };
    sys.project(&[&*f, &*p])
}

pub fn observers(cfg: &ExperimentConfig, sys: &SkewGradientSystem) -> Result<Vec<Observer>> {
    let scalar = |name: &str| -> Result<()> {
        if sys.f0().len() != 1 {
            return Err(Error::InvalidConfig(format!(
                "observer '{name}' needs a scalar problem"
            )));
        }
        Ok(())
    };
    cfg.observer_names()
        .iter()
        .map(|name| -> Result<Observer> {
            Ok(match name.as_str() {
                "H" => {
                    let s = sys.clone();
                    Observer::new("H", move |u| s.energy(u))
                }
                "H1" => {
                    scalar(name)?;
                    let h = HamiltonianSpec::kdv_cubic().bind(sys.f0())?;
                    Observer::new("H1", move |u| h.value(u))
                }
                "H2" => {
                    scalar(name)?;
                    let h = HamiltonianSpec::half_l2().bind(sys.f0())?;
                    Observer::new("H2", move |u| h.value(u))
                }
                "C" => {
                    let w = sys.casimir_weights().ok_or(Error::NoCasimir)?.clone();
                    Observer::new("C", move |u| Ok(w.dot(u)))
                }
                "norm" => Observer::new("norm", |u| Ok(u.norm())),
                other => return Err(Error::InvalidConfig(format!("unknown observer '{other}'"))),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub trajectory: Trajectory,
    pub trajectory_table: Table,
    pub conservation_table: Table,
    pub warnings: Vec<String>,
}

impl SimulationOutput {
    pub fn is_complete(&self) -> bool {
        self.trajectory.is_complete()
    }

    /// Write both CSV files into `dir`, returning their paths.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let t = dir.join(&cfg.output.trajectory);
        let c = dir.join(&cfg.output.conservation);
        self.trajectory_table.write(&t)?;
        self.conservation_table.write(&c)?;
        Ok((t, c))
    }
}

fn header(cfg: &ExperimentConfig, status: &str, warnings: &[String]) -> Result<Vec<String>> {
    let mut h = vec![format!("status = {status}")];
    h.extend(warnings.iter().map(|w| format!("warning = {w:?}")));
    h.push(cfg.to_toml()?);
    Ok(h)
}

pub fn run_simulation(cfg: &ExperimentConfig) -> Result<SimulationOutput> {
    let sys = build_system(cfg)?;
    let u0 = initial_state(cfg, &sys)?;
    let obs = observers(cfg, &sys)?;
    let traj = integrate(&sys, &u0, &cfg.time.stepper(), cfg.time.t_end, &obs)?;
    let status = match &traj.failure {
        None => "complete".to_string(),
        Some(e) => format!("partial ({e})"),
    };
    let head = header(cfg, &status, sys.warnings())?;
    let mut cols = vec!["time".to_string()];
    cols.extend(traj.observer_names.iter().cloned());
    let mut tt = Table::new(head.clone(), cols);
    let mut drift_cols = vec!["time".to_string()];
    drift_cols.extend(traj.observer_names.iter().map(|n| format!("{n}_drift")));
    let mut ct = Table::new(head, drift_cols);
    let first = traj.series.first().cloned().unwrap_or_default();
    for (t, row) in traj.times.iter().zip(&traj.series) {
        let mut r = vec![*t];
        r.extend(row.iter().copied());
        tt.push(r);
        let mut d = vec![*t];
        d.extend(row.iter().zip(&first).map(|(x, x0)| x - x0));
        ct.push(d);
    }
    let mut max_row = vec![f64::NAN];
    max_row.extend(traj.max_drift());
    ct.push_labeled("max", max_row);
    Ok(SimulationOutput {
        warnings: sys.warnings().to_vec(),
        trajectory: traj,
        trajectory_table: tt,
        conservation_table: ct,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error: f64,
    /// `error(n) / error(previous n)`; absent for the first row.
    pub ratio: Option<f64>,
}

fn sample_points(periodic: bool) -> Vec<f64> {
    if periodic {
        (0..512).map(|i| 2.0 * PI * i as f64 / 512.0).collect()
    } else {
        (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect()
    }
}

fn rhs_samples(cfg: &ExperimentConfig, pts: &[f64]) -> Result<Vec<DVector<f64>>> {
    let sys = build_system(cfg)?;
    let u = initial_state(cfg, &sys)?;
    let f = sys.rhs(&u)?;
    Ok((0..sys.f0().len())
        .map(|k| sys.eval_field(&f, k, pts, 0))
        .collect())
}

/// Self-convergence of the semi-discrete right-hand side for the initial
/// data of `cfg`: the error at each `n` is the max-norm difference, on a fine
/// sample grid, from the result at `2 max(ns)`, divided by the reference
/// size or 1, whichever is larger (so roundoff-sized references do not
/// inflate the error).
pub fn convergence(cfg: &ExperimentConfig, ns: &[usize]) -> Result<Vec<ConvergenceRow>> {
    if ns.is_empty() {
        return Err(Error::InvalidConfig("empty n list".to_string()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!(
            "n list {ns:?} is not strictly increasing"
        )));
    }
    let periodic = matches!(cfg.problem, Problem::KdvForm1 | Problem::KdvForm2)
        || cfg.basis.is_some_and(Family::is_periodic)
        || (cfg.problem == Problem::CustomOperator && cfg.basis.is_none());
    let pts = sample_points(periodic);
    let reference = rhs_samples(&cfg.with_n(2 * ns[ns.len() - 1]), &pts)?;
    let scale = reference.iter().map(|r| r.amax()).fold(0.0, f64::max);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in ns {
        let got = rhs_samples(&cfg.with_n(n), &pts)?;
        let err = got
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        let error = err / scale.max(1.0);
        let ratio = rows.last().map(|prev| {
            if prev.error > 0.0 {
                error / prev.error
            } else {
                0.0
            }
        });
        rows.push(ConvergenceRow { n, error, ratio });
    }
    Ok(rows)
}

pub fn convergence_table(cfg: &ExperimentConfig, rows: &[ConvergenceRow]) -> Result<Table> {
    let mut t = Table::new(
        vec![cfg.to_toml()?],
        vec!["n".to_string(), "error".to_string(), "ratio".to_string()],
    );
    for r in rows {
        t.push(vec![r.n as f64, r.error, r.ratio.unwrap_or(f64::NAN)]);
    }
    Ok(t)
}
