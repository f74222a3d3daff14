//! `klstress` command-line front end.
//!
//! Exit codes: 0 success, 1 internal failure (including a failed `verify`),
//! 2 bad input or flags, 3 mathematically infeasible request
//! (no λ boundary, unreachable target, flat threshold).

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::dist::DiscreteDistribution;
use crate::dominance::{check_fsd, FsdCheck};
use crate::oracle;
use crate::report::{self, InputError};
use crate::scenario::{self, ScenarioSet};
use crate::solver::{self, PhiMax, SolverError, StressReport, SweepRow};
use crate::tilt::{self, TiltError, TiltParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "klstress", version, about = "Worst-case outperformance and stress scenarios under KL ambiguity")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Io {
    /// Baseline sample: .csv (value[,weight]) or .json ({"values","probs"}).
    #[arg(long)]
    pub input: PathBuf,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Resample,
    Weights,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tilted measure Q_{λ,a}.
    Tilt {
        #[command(flatten)]
        io: Io,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
    },
    /// Robust value V_ε (optionally at a fixed threshold).
    Solve {
        #[command(flatten)]
        io: Io,
        #[arg(long, allow_hyphen_values = true)]
        epsilon: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
    },
    /// Fixed-λ optimum across a λ grid (JSON, or CSV when --output ends in .csv).
    Sweep {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
    },
    /// λ at which max_a φ_λ(a) crosses 1/2.
    LambdaBoundary {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1e-3, 1e3])]
        bracket: Vec<f64>,
    },
    /// Smallest KL radius with V_ε ≥ target.
    EpsCrit {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        target: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// First-order dominance of the tilt at (λ, a) over the baseline.
    CheckFsd {
        #[command(flatten)]
        io: Io,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
    },
    /// Stressed scenarios from the tilt at (λ, a).
    Scenarios {
        #[command(flatten)]
        io: Io,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Method::Resample)]
        method: Method,
    },
    /// Oracle-versus-closed-form checks on random instances.
    Verify {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        grid: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = match &e {
            SolverError::NoBoundary { .. }
            | SolverError::TargetUnreachable { .. }
            | SolverError::FlatThreshold { .. } => EXIT_INFEASIBLE,
            SolverError::BracketExhausted { .. } => EXIT_INTERNAL,
            SolverError::Tilt(_)
            | SolverError::NonPositiveEps(_)
            | SolverError::NegativeEps(_)
            | SolverError::InvalidBracket { .. }
            | SolverError::InvalidTarget(_)
            | SolverError::InvalidTolerance(_)
            | SolverError::InvalidLambdaGrid => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<TiltError> for Failure {
    fn from(e: TiltError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<oracle::OracleError> for Failure {
    fn from(e: oracle::OracleError) -> Self {
        Failure::input(e.to_string())
    }
}

/// Echo of the request, embedded in every JSON report.
#[derive(Debug, Default, Serialize)]
struct Inputs {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bracket: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<f64>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    body: T,
    inputs: &'a Inputs,
}

#[derive(Serialize)]
struct SweepBody<'a> {
    rows: &'a [SweepRow],
}

#[derive(Serialize)]
struct BoundaryBody {
    lambda_boundary: f64,
    a_star: f64,
    phi_star: f64,
}

#[derive(Serialize)]
struct EpsCritBody {
    eps_crit: f64,
    target: f64,
    report: StressReport,
}

#[derive(Serialize)]
struct WeightsBody<'a> {
    #[serde(flatten)]
    set: &'a ScenarioSet,
    weights: &'a [f64],
}

fn positive(name: &str, value: f64) -> Result<f64, Failure> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Failure::input(format!("--{name} must be positive and finite, got {value}")))
    }
}

fn finite(name: &str, value: f64) -> Result<f64, Failure> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Failure::input(format!("--{name} must be finite, got {value}")))
    }
}

fn load(io: &Io, inputs: &mut Inputs) -> Result<DiscreteDistribution, Failure> {
    let (dist, bytes) = report::read_distribution(&io.input)?;
    inputs.input = Some(io.input.display().to_string());
    inputs.input_sha256 = Some(hex::encode(Sha256::digest(&bytes)));
    Ok(dist)
}

fn wants_csv(output: Option<&Path>) -> bool {
    output
        .and_then(|p| p.extension())
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn json_only(output: Option<&Path>) -> Result<(), Failure> {
    if wants_csv(output) {
        Err(Failure::input("this command only writes JSON reports"))
    } else {
        Ok(())
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(body: T, inputs: &Inputs) -> String {
    report::to_json(&Envelope { body, inputs })
}

/// Runs one command and returns its report text and destination.
pub fn execute(config: &RunConfig) -> Result<(String, Option<PathBuf>), Failure> {
    let mut inputs = Inputs::default();
    match &config.command {
        Command::Tilt { io, lambda, a } => {
            inputs.command = "tilt";
            let params = TiltParams::new(positive("lambda", *lambda)?, finite("a", *a)?)?;
            inputs.lambda = Some(*lambda);
            inputs.a = Some(*a);
            json_only(io.output.as_deref())?;
            let d = load(io, &mut inputs)?;
            let t = tilt::tilt(&d, params)?;
            Ok((json(&t, &inputs), io.output.clone()))
        }
        Command::Solve { io, epsilon, a } => {
            inputs.command = "solve";
            let eps = finite("epsilon", *epsilon)?;
            if eps < 0.0 {
                return Err(Failure::input(format!("--epsilon must be nonnegative, got {eps}")));
            }
            inputs.epsilon = Some(eps);
            inputs.a = a.map(|a| finite("a", a)).transpose()?;
            json_only(io.output.as_deref())?;
            let d = load(io, &mut inputs)?;
            let r = match a {
                Some(a) => solver::value_at_threshold(&d, *a, eps)?,
                None => solver::value_eps(&d, eps)?,
            };
            Ok((json(r, &inputs), io.output.clone()))
        }
        Command::Sweep { io, lambda } => {
            inputs.command = "sweep";
            for &l in lambda {
                positive("lambda", l)?;
            }
            inputs.lambdas = Some(lambda.clone());
            let d = load(io, &mut inputs)?;
            let rows = solver::severity_sweep(&d, lambda)?;
            let text = if wants_csv(io.output.as_deref()) {
                report::sweep_csv(&rows)
            } else {
                json(SweepBody { rows: &rows }, &inputs)
            };
            Ok((text, io.output.clone()))
        }
        Command::LambdaBoundary { io, bracket } => {
            inputs.command = "lambda-boundary";
            let (lo, hi) = (positive("bracket", bracket[0])?, positive("bracket", bracket[1])?);
            inputs.bracket = Some(vec![lo, hi]);
            json_only(io.output.as_deref())?;
            let d = load(io, &mut inputs)?;
            let boundary = solver::lambda_boundary(&d, (lo, hi))?;
            let PhiMax { a_star, phi_star } = solver::maximize_phi(&d, boundary)?;
            let body = BoundaryBody {
                lambda_boundary: boundary,
                a_star,
                phi_star,
            };
            Ok((json(body, &inputs), io.output.clone()))
        }
        Command::EpsCrit { io, target, tol } => {
            inputs.command = "eps-crit";
            inputs.target = Some(finite("target", *target)?);
            inputs.tol = Some(positive("tol", *tol)?);
            json_only(io.output.as_deref())?;
            let d = load(io, &mut inputs)?;
            let eps = solver::eps_crit(&d, *target, *tol)?;
            let body = EpsCritBody {
                eps_crit: eps,
                target: *target,
                report: solver::value_eps(&d, eps)?,
            };
            Ok((json(body, &inputs), io.output.clone()))
        }
        Command::CheckFsd { io, lambda, a } => {
            inputs.command = "check-fsd";
            let params = TiltParams::new(positive("lambda", *lambda)?, finite("a", *a)?)?;
            inputs.lambda = Some(*lambda);
            inputs.a = Some(*a);
            json_only(io.output.as_deref())?;
            let d = load(io, &mut inputs)?;
            let t = tilt::tilt(&d, params)?;
            let FsdCheck { ok, max_violation } =
                check_fsd(&d, &t).expect("tilt keeps the baseline support");
            #[derive(Serialize)]
            struct Body {
                fsd_ok: bool,
                fsd_max_violation: f64,
            }
            let body = Body {
                fsd_ok: ok,
                fsd_max_violation: max_violation,
            };
            Ok((json(body, &inputs), io.output.clone()))
        }
        Command::Scenarios {
            io,
            lambda,
            a,
            n,
            seed,
            method,
        } => {
            inputs.command = "scenarios";
            let params = TiltParams::new(positive("lambda", *lambda)?, finite("a", *a)?)?;
            if *n == 0 {
                return Err(Failure::input("--n must be at least 1"));
            }
            inputs.lambda = Some(*lambda);
            inputs.a = Some(*a);
            inputs.n = Some(*n);
            inputs.seed = Some(*seed);
            inputs.method = Some(*method);
            let d = load(io, &mut inputs)?;
            let t = tilt::tilt(&d, params)?;
            let csv = wants_csv(io.output.as_deref());
            let text = match method {
                Method::Resample => {
                    let set = scenario::sample(&t, *n, *seed);
                    if csv {
                        report::scenarios_csv(&set)
                    } else {
                        json(&set, &inputs)
                    }
                }
                Method::Weights => {
                    let weights = scenario::importance_weights(&t);
                    if csv {
                        report::weights_csv(t.values(), &weights)
                    } else {
                        let set = scenario::weighted_atoms(&t, *seed);
                        json(WeightsBody { set: &set, weights: &weights }, &inputs)
                    }
                }
            };
            Ok((text, io.output.clone()))
        }
        Command::Verify {
            instances,
            seed,
            grid,
            output,
        } => {
            inputs.command = "verify";
            inputs.instances = Some(*instances);
            inputs.seed = Some(*seed);
            inputs.grid = Some(positive("grid", *grid)?);
            json_only(output.as_deref())?;
            let summary = oracle::verify(*instances, *seed, *grid)?;
            let text = json(&summary, &inputs);
            if !summary.passed {
                emit(output.as_deref(), &text)?;
                return Err(Failure {
                    code: EXIT_INTERNAL,
                    message: "oracle verification failed".into(),
                });
            }
            Ok((text, output.clone()))
        }
    }
}

/// Runs a parsed command, writes its report, and returns the exit code.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = execute(config).and_then(|(text, output)| emit(output.as_deref(), &text));
    match outcome {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}
