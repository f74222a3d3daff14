//! Dual optimization layer.
//!
//! Swapping the two maximizations turns the robust value into a scan over
//! thresholds:
//!
//! ```text
//! V_ε = max_a max_{Q: KL(Q‖P) ≤ ε} [F(a) − G(a)]
//! ```
//!
//! For a fixed threshold the inner problem is solved by the tilt
//! `Q_{λ(a),a}`, with `λ(a)` calibrated so the tilt spends exactly `ε`.
//! The fixed-λ variant skips the calibration and maximizes
//!
//! ```text
//! φ_λ(a) = F(a)(1 − F(a))(1 − e^{−1/λ}) / (1 − F(a) + e^{−1/λ}F(a)) = h(F(a))
//! ```
//!
//! Because `φ_λ` depends on `a` only through the step function `F`, every
//! search over `a` runs over the atoms of the baseline, smallest atom first,
//! with ties resolved toward the smaller atom.
//!
//! Two conventions differ from a literal reading of the source definitions:
//!
//! - `max_a φ_λ(a)` *decreases* in λ, so the non-trivial region (value above
//!   one half) is `λ < λ_boundary`. [`lambda_boundary`] returns the crossing.
//! - `V_ε` increases in ε, so the critical radius is read as the smallest ε
//!   with `V_ε ≥ p†`; an infimum over `V_ε ≤ p†` would always be zero.

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::dist::DiscreteDistribution;
use crate::dominance::{check_fsd, check_fsd_masses, FsdCheck};
use crate::tilt::{
    kl_of_tilt_from_cdf, tilt, tilted_cdf_at_a_from_cdf, TiltError, TiltParams,
};

/// Target accuracy on `|KL − ε|` when calibrating λ.
pub const KL_TOLERANCE: f64 = 1e-10;
/// Target accuracy on `|max φ − 1/2|` for the λ boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;
const MAX_BISECTIONS: usize = 200;
const INITIAL_BRACKET: (f64, f64) = (1e-3, 1e3);
const WIDEST_BRACKET: (f64, f64) = (1e-6, 1e6);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("KL budget must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("KL budget must be nonnegative, got {0}")]
    NegativeEps(f64),
    #[error("F(a) = {f_a} at threshold {a}: the tilt has no effect")]
    FlatThreshold { a: f64, f_a: f64 },
    #[error("no lambda in [{lo}, {hi}] brackets the KL budget {eps}")]
    BracketExhausted { eps: f64, lo: f64, hi: f64 },
    #[error("max phi cannot exceed 1/2 for any lambda (limit {limit})")]
    NoBoundary { limit: f64 },
    #[error("invalid lambda bracket ({lo}, {hi})")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("target {target} exceeds the largest reachable value {reachable}")]
    TargetUnreachable { target: f64, reachable: f64 },
    #[error("target must lie in [1/2, 1), got {0}")]
    InvalidTarget(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("lambda grid must be positive, finite and strictly increasing")]
    InvalidLambdaGrid,
    #[error(transparent)]
    Tilt(#[from] TiltError),
}

/// `C = 1 − e^{−1/λ}` as a function of λ.
fn contraction(lambda: f64) -> f64 {
    -(-1.0 / lambda).exp_m1()
}

/// `h(x) = C x (1 − x) / (1 − C x)` with `C = 1 − e^{−1/λ}`, for `x ∈ [0, 1]`.
pub fn h(x: f64, lambda: f64) -> f64 {
    h_with_contraction(x, contraction(lambda))
}

fn h_with_contraction(x: f64, c: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    c * x * (1.0 - x) / (1.0 - c * x)
}

/// Interior maximizer of `h`: `x* = 1 / (1 + e^{−1/(2λ)})`, in `(1/2, 1)`.
///
/// For λ below about 0.014 the result rounds to exactly 1.0 in double precision.
pub fn x_star(lambda: f64) -> f64 {
    1.0 / (1.0 + (-0.5 / lambda).exp())
}

/// Fixed-λ dual objective `φ_λ(a) = F(a) − G_{λ,a}(a)`, in closed form.
pub fn phi(d: &DiscreteDistribution, params: &TiltParams) -> f64 {
    h_with_contraction(d.cdf(params.a()), params.contraction())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiMax {
    pub a_star: f64,
    pub phi_star: f64,
}

/// Maximizes `φ_λ` over the atoms of `d`.
pub fn maximize_phi(d: &DiscreteDistribution, lambda: f64) -> Result<PhiMax, SolverError> {
    let c = TiltParams::new(lambda, 0.0)?.contraction();
    let mut best = PhiMax {
        a_star: d.min_value(),
        phi_star: h_with_contraction(d.cdf_at_index(0), c),
    };
    for (i, &a) in d.values().iter().enumerate().skip(1) {
        let value = h_with_contraction(d.cdf_at_index(i), c);
        if value > best.phi_star {
            best = PhiMax { a_star: a, phi_star: value };
        }
    }
    Ok(best)
}

/// Outcome of calibrating λ to a KL budget at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSolution {
    /// Unique λ with `KL(Q_{λ,a} ‖ P) = ε`.
    Lambda(f64),
    /// The budget covers removing all mass at or below `a`: the optimizer is
    /// `P(· | X > a)` with `G(a) = 0` and `KL = −log(1 − F(a))`.
    Depletion,
}

/// Largest KL a tilt at this threshold can spend: `−log(1 − F(a))`.
pub fn depletion_cap(f_a: f64) -> f64 {
    -(-f_a).ln_1p()
}

/// Finds the λ whose tilt at `a` spends exactly `eps`, by bisection on
/// `log λ`. KL decreases strictly from the depletion cap (λ → 0) to zero
/// (λ → ∞).
pub fn solve_lambda(d: &DiscreteDistribution, a: f64, eps: f64) -> Result<LambdaSolution, SolverError> {
    if !(eps > 0.0) {
        return Err(SolverError::NonPositiveEps(eps));
    }
    let f_a = d.cdf(a);
    if f_a <= 0.0 || f_a >= 1.0 {
        return Err(SolverError::FlatThreshold { a, f_a });
    }
    solve_lambda_from_cdf(f_a, eps)
}

fn solve_lambda_from_cdf(f_a: f64, eps: f64) -> Result<LambdaSolution, SolverError> {
    if eps >= depletion_cap(f_a) {
        return Ok(LambdaSolution::Depletion);
    }
    let kl = |lambda: f64| {
        let params = TiltParams::new(lambda, 0.0).expect("bracket stays positive");
        kl_of_tilt_from_cdf(f_a, &params)
    };

    let (mut lo, mut hi) = INITIAL_BRACKET;
    while kl(lo) < eps && lo > WIDEST_BRACKET.0 {
        lo /= 10.0;
    }
    while kl(hi) > eps && hi < WIDEST_BRACKET.1 {
        hi *= 10.0;
    }
    if kl(lo) < eps || kl(hi) > eps {
        return Err(SolverError::BracketExhausted { eps, lo, hi });
    }

    let mut mid = (lo * hi).sqrt();
    for _ in 0..MAX_BISECTIONS {
        mid = (lo * hi).sqrt();
        let value = kl(mid);
        if (value - eps).abs() <= KL_TOLERANCE {
            break;
        }
        if value > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LambdaSolution::Lambda(mid))
}

/// The multiplier reported alongside a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Multiplier {
    Finite(f64),
    /// λ → 0 limit (conditional law above the threshold).
    Depletion,
    /// No tilt at all (zero budget or a single-atom baseline).
    Untilted,
}

impl Multiplier {
    pub fn value(&self) -> Option<f64> {
        match self {
            Multiplier::Finite(l) => Some(*l),
            _ => None,
        }
    }
}

/// Serialized as a number, the string `"DEPLETION"`, or `null` when untilted.
impl Serialize for Multiplier {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Multiplier::Finite(l) => serializer.serialize_f64(*l),
            Multiplier::Depletion => serializer.serialize_str("DEPLETION"),
            Multiplier::Untilted => serializer.serialize_none(),
        }
    }
}

/// Solution of the radius-constrained problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StressReport {
    pub a_star: f64,
    pub lambda: Multiplier,
    /// Attained `F(a*) − G(a*)`.
    pub value: f64,
    pub g_at_a: f64,
    /// KL actually spent by the optimizer.
    pub kl: f64,
    /// Strict `value > 1/2`: `Y` outperforms `X` robustly.
    pub exceeds_half: bool,
    pub fsd_ok: bool,
    pub fsd_max_violation: f64,
}

struct Candidate {
    a: f64,
    lambda: Multiplier,
    f_a: f64,
    g: f64,
    kl: f64,
}

fn candidate_at(f_a: f64, a: f64, eps: f64) -> Result<Candidate, SolverError> {
    let depleted = Candidate {
        a,
        lambda: Multiplier::Depletion,
        f_a,
        g: 0.0,
        kl: depletion_cap(f_a),
    };
    match solve_lambda_from_cdf(f_a, eps)? {
        LambdaSolution::Depletion => Ok(depleted),
        LambdaSolution::Lambda(lambda) => {
            let params = TiltParams::new(lambda, a)?;
            if params.decay() == 0.0 {
                // calibrated into the underflow region: indistinguishable from depletion
                return Ok(depleted);
            }
            Ok(Candidate {
                a,
                lambda: Multiplier::Finite(lambda),
                f_a,
                g: tilted_cdf_at_a_from_cdf(f_a, &params),
                kl: kl_of_tilt_from_cdf(f_a, &params),
            })
        }
    }
}

/// Robust value `V_ε` with its optimizer.
///
/// Scans every atom `a` with `0 < F(a) < 1`, calibrates `λ(a)` (or takes the
/// depletion limit when the budget allows it), and keeps the best
/// `F(a) − G(a)`. A zero budget forces `Q = P` and value zero.
pub fn value_eps(d: &DiscreteDistribution, eps: f64) -> Result<StressReport, SolverError> {
    if !(eps >= 0.0) {
        return Err(SolverError::NegativeEps(eps));
    }
    let mut best: Option<Candidate> = None;
    if eps > 0.0 {
        for (i, &a) in d.values().iter().enumerate().take(d.len() - 1) {
            let cand = candidate_at(d.cdf_at_index(i), a, eps)?;
            if best
                .as_ref()
                .is_none_or(|b| cand.f_a - cand.g > b.f_a - b.g)
            {
                best = Some(cand);
            }
        }
    }

    let Some(best) = best else {
        let a = d.min_value();
        let f_a = d.cdf_at_index(0);
        return Ok(StressReport {
            a_star: a,
            lambda: Multiplier::Untilted,
            value: 0.0,
            g_at_a: f_a,
            kl: 0.0,
            exceeds_half: false,
            fsd_ok: true,
            fsd_max_violation: 0.0,
        });
    };

    let fsd = optimizer_fsd(d, &best)?;
    let value = best.f_a - best.g;
    Ok(StressReport {
        a_star: best.a,
        lambda: best.lambda,
        value,
        g_at_a: best.g,
        kl: best.kl,
        exceeds_half: value > 0.5,
        fsd_ok: fsd.ok,
        fsd_max_violation: fsd.max_violation,
    })
}

/// Radius-constrained optimum at a single fixed threshold `a`.
pub fn value_at_threshold(d: &DiscreteDistribution, a: f64, eps: f64) -> Result<StressReport, SolverError> {
    if !(eps > 0.0) {
        return Err(SolverError::NonPositiveEps(eps));
    }
    let f_a = d.cdf(a);
    if f_a <= 0.0 || f_a >= 1.0 {
        return Err(SolverError::FlatThreshold { a, f_a });
    }
    let cand = candidate_at(f_a, a, eps)?;
    let fsd = optimizer_fsd(d, &cand)?;
    let value = cand.f_a - cand.g;
    Ok(StressReport {
        a_star: cand.a,
        lambda: cand.lambda,
        value,
        g_at_a: cand.g,
        kl: cand.kl,
        exceeds_half: value > 0.5,
        fsd_ok: fsd.ok,
        fsd_max_violation: fsd.max_violation,
    })
}

fn optimizer_fsd(d: &DiscreteDistribution, best: &Candidate) -> Result<FsdCheck, SolverError> {
    match best.lambda {
        Multiplier::Finite(lambda) => {
            let t = tilt(d, TiltParams::new(lambda, best.a)?)?;
            Ok(check_fsd(d, &t).expect("tilt keeps the baseline support"))
        }
        _ => {
            let scale = 1.0 / (1.0 - best.f_a);
            let masses: Vec<f64> = d
                .values()
                .iter()
                .zip(d.probs())
                .map(|(&v, &p)| if v <= best.a { 0.0 } else { p * scale })
                .collect();
            Ok(check_fsd_masses(d, &masses).expect("same atom count"))
        }
    }
}

/// `max_a φ_λ(a)` in the λ → 0 limit: the largest `F(a)` below one.
fn depletion_limit(d: &DiscreteDistribution) -> f64 {
    (0..d.len().saturating_sub(1))
        .map(|i| d.cdf_at_index(i))
        .fold(0.0, f64::max)
}

/// The λ at which `max_a φ_λ(a)` crosses one half.
///
/// `max_a φ_λ(a)` is strictly decreasing in λ, so values of λ below the
/// returned crossing give a maximizer with `φ > 1/2`. The bracket is widened
/// geometrically (down to 1e-6, up to 1e6) if it does not straddle the
/// crossing.
pub fn lambda_boundary(d: &DiscreteDistribution, bracket: (f64, f64)) -> Result<f64, SolverError> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(SolverError::InvalidBracket { lo, hi });
    }
    let limit = depletion_limit(d);
    if limit <= 0.5 {
        return Err(SolverError::NoBoundary { limit });
    }
    let max_phi = |lambda: f64| maximize_phi(d, lambda).map(|m| m.phi_star);

    while max_phi(lo)? <= 0.5 && lo > WIDEST_BRACKET.0 {
        lo /= 10.0;
    }
    while max_phi(hi)? > 0.5 && hi < WIDEST_BRACKET.1 {
        hi *= 10.0;
    }
    if max_phi(lo)? <= 0.5 || max_phi(hi)? > 0.5 {
        return Err(SolverError::InvalidBracket { lo, hi });
    }

    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let value = max_phi(mid)?;
        if (value - 0.5).abs() <= BOUNDARY_TOLERANCE {
            break;
        }
        if value > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Smallest KL radius (within `tol`) at which `V_ε ≥ p_dagger`.
///
/// Bisects on ε using that the KL balls are nested. The target must not
/// exceed `V_∞`, the largest `F(a)` among atoms with mass above them.
pub fn eps_crit(d: &DiscreteDistribution, p_dagger: f64, tol: f64) -> Result<f64, SolverError> {
    if !(0.5..1.0).contains(&p_dagger) {
        return Err(SolverError::InvalidTarget(p_dagger));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(SolverError::InvalidTolerance(tol));
    }
    let reachable = depletion_limit(d);
    if p_dagger > reachable {
        return Err(SolverError::TargetUnreachable {
            target: p_dagger,
            reachable,
        });
    }
    let reaches = |eps: f64| value_eps(d, eps).map(|r| r.value >= p_dagger);

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while !reaches(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 64 {
            return Err(SolverError::TargetUnreachable {
                target: p_dagger,
                reachable,
            });
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One row of a λ severity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub a_star: f64,
    pub phi_star: f64,
    pub kl: f64,
}

/// Fixed-λ optimum and the KL it implies, for each λ in an increasing grid.
/// Smaller λ means a harsher stress.
pub fn severity_sweep(d: &DiscreteDistribution, lambdas: &[f64]) -> Result<Vec<SweepRow>, SolverError> {
    let valid = lambdas.iter().all(|l| l.is_finite() && *l > 0.0)
        && lambdas.windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(SolverError::InvalidLambdaGrid);
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let best = maximize_phi(d, lambda)?;
            let f_a = d.cdf(best.a_star);
            let kl = kl_of_tilt_from_cdf(f_a, &TiltParams::new(lambda, best.a_star)?);
            Ok(SweepRow {
                lambda,
                a_star: best.a_star,
                phi_star: best.phi_star,
                kl,
            })
        })
        .collect()
}
