use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualcomp::assembly::{assemble, diff_matrix, spectrum_report, OperatorSpec, OperatorState};
use dualcomp::basis::{BasisSpec, Family, Space};
use dualcomp::experiment::{
    convergence, convergence_table, run_simulation, ExperimentConfig, InitialCondition, Problem,
    TimeConfig, OUT_DIR_ENV,
};
use dualcomp::io::MatrixRecord;
use dualcomp::system::project_function;
use dualcomp::timeint::Method;
use dualcomp::verify::run_suite;
use dualcomp::Error;

#[derive(Parser)]
#[command(
    name = "dualcomp",
    version,
    about = "Dual composition discretizations of skew-gradient PDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble S, A, D = S^-T A, the defect A + A^T and the spectrum of A.
    Matrices {
        #[arg(long)]
        basis: String,
        #[arg(long)]
        n: usize,
        /// Operator string, e.g. "dx", "-2*upair - dxxx".
        #[arg(long, default_value = "dx")]
        op: String,
        /// Constant state for operators containing `upair`.
        #[arg(long, default_value_t = 1.0)]
        u_const: f64,
        /// Admit even-order terms (symmetric part).
        #[arg(long)]
        symmetric: bool,
        /// Output directory (default: $DUALCOMP_OUT_DIR or ".").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a problem described by a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an invariant suite and print a JSON report.
    Verify {
        /// sbp, spectrum, golden-n3 (alias paper-example-4), quadham-cases,
        /// gradients, skew-gradient, fast-galerkin or all.
        suite: String,
    },
    /// Self-convergence of the semi-discrete right-hand side.
    Convergence {
        /// Problem preset; ignored when --config is given.
        #[arg(long, default_value = "wave")]
        problem: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma separated, strictly increasing.
        #[arg(long, value_delimiter = ',', default_value = "4,8,12,16")]
        ns: Vec<usize>,
        /// Wave speed monomial coefficients for the wave preset.
        #[arg(long, value_delimiter = ',', default_value = "2,1")]
        wave_speed: Vec<f64>,
        /// CSV path (default: $DUALCOMP_OUT_DIR/convergence.csv, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(String),
    Numeric(String),
    Solver(String),
    Checks,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks => 1,
            Failure::Invalid(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Solver(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidBasis(_)
            | Error::InvalidOperator(_)
            | Error::UnsupportedTerm(_)
            | Error::InvalidHamiltonian(_)
            | Error::IncompatibleSpaces(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidConfig(_)
            | Error::NonConstantOperator
            | Error::Parse(_)
            | Error::Io(_) => Failure::Invalid(e.to_string()),
            Error::SolverFailure { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(PathBuf::from)
    })
    .unwrap_or_else(|| PathBuf::from("."))
}

fn matrices(
    basis: &str,
    n: usize,
    op: &str,
    u_const: f64,
    symmetric: bool,
    out: &Path,
) -> Result<(), Failure> {
    let family = Family::parse(basis)?;
    let spec = OperatorSpec::parse(op, symmetric)?;
    let space = Space::new(BasisSpec::new(family, n))?;
    let u = project_function(&space, &|_| u_const)?;
    let state = if spec.is_constant() {
        OperatorState::Constant
    } else {
        OperatorState::Field {
            space: &space,
            coeffs: &u,
        }
    };
    let pair = assemble(&spec, state, &space, &space)?;
    let d = diff_matrix(&pair)?;
    let spectrum = spectrum_report(&pair.a)?;
    let antisymmetric = pair.defect.amax() <= 1e-10 * pair.a.amax().max(1.0);

    std::fs::create_dir_all(out).map_err(Error::from)?;
    let tag = format!("{}", space.id());
    for (name, m) in [
        ("S", &pair.s),
        ("A", &pair.a),
        ("D", &d),
        ("defect", &pair.defect),
    ] {
        MatrixRecord::new(name, m.clone())
            .with_meta("basis", &tag)
            .with_meta("operator", op)
            .write(&out.join(format!("{name}.txt")))?;
    }
    let report = serde_json::json!({
        "basis": tag,
        "operator": op,
        "antisymmetric": antisymmetric,
        "defect_max": pair.defect.amax(),
        "spectrum": spectrum,
    });
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| Failure::Numeric(e.to_string()))?;
    std::fs::write(out.join("spectrum.json"), text + "\n").map_err(Error::from)?;
    println!(
        "wrote S, A, D, defect and spectrum for {tag} to {}",
        out.display()
    );
    Ok(())
}

fn simulate(config: &Path) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let result = run_simulation(&cfg)?;
    let dir = cfg.output_dir();
    let (t, c) = result.write(&cfg, &dir)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} and {}", t.display(), c.display());
    match &result.trajectory.failure {
        None => Ok(()),
        Some(e) => Err(Failure::Solver(format!("partial output written: {e}"))),
    }
}

fn verify(suite: &str) -> Result<(), Failure> {
    let reports = run_suite(suite)?;
    let pass = reports.iter().all(|r| r.pass);
    let json = serde_json::json!({ "suite": suite, "pass": pass, "reports": reports });
    println!(
        "{}",
        serde_json::to_string_pretty(&json).map_err(|e| Failure::Numeric(e.to_string()))?
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn preset(problem: &str, wave_speed: Vec<f64>) -> Result<ExperimentConfig, Failure> {
    let problem = Problem::parse(problem)?;
    if problem == Problem::CustomOperator {
        return Err(Failure::Invalid(
            "custom-operator needs --config".to_string(),
        ));
    }
    let cfg = ExperimentConfig {
        problem,
        n: 8,
        basis: None,
        operator: None,
        wave_speed,
        // cos x is resolved exactly by every Fourier basis.
        initial: match problem {
            Problem::Wave => InitialCondition::Cos { amplitude: 1.0 },
            _ => InitialCondition::ExpCos { amplitude: 1.0 },
        },
        time: TimeConfig {
            method: Method::Midpoint,
            tau: 0.01,
            t_end: 0.0,
            solver: dualcomp::timeint::SolverKind::FixedPoint,
            tol: 1e-12,
            max_iter: 100,
        },
        observers: Vec::new(),
        output: Default::default(),
        seed: 0,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_convergence(
    problem: &str,
    config: Option<&Path>,
    ns: &[usize],
    wave_speed: Vec<f64>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => preset(problem, wave_speed)?,
    };
    let rows = convergence(&cfg, ns)?;
    let csv = convergence_table(&cfg, &rows)?.to_csv()?;
    let env_path = std::env::var_os(OUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join("convergence.csv"));
    match out.map(Path::to_path_buf).or(env_path) {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(Error::from)?;
            }
            std::fs::write(&p, csv).map_err(Error::from)?;
            println!("wrote {}", p.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Matrices {
            basis,
            n,
            op,
            u_const,
            symmetric,
            out,
        } => matrices(&basis, n, &op, u_const, symmetric, &out_dir(out)),
        Command::Simulate { config } => simulate(&config),
        Command::Verify { suite } => verify(&suite),
        Command::Convergence {
            problem,
            config,
            ns,
            wave_speed,
            out,
        } => run_convergence(&problem, config.as_deref(), &ns, wave_speed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) | Failure::Numeric(m) | Failure::Solver(m) => {
                    eprintln!("error: {m}")
                }
                Failure::Checks => eprintln!("verification failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
