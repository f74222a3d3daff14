//! Worst-case stochastic outperformance under Kullback–Leibler ambiguity.
//!
//! Given a benchmark law `P` for `X`, the competitor `Y` may follow any law `Q`
//! with `KL(Q‖P) ≤ ε`. The robust value
//!
//! ```text
//! V_ε = max_{Q: KL(Q‖P) ≤ ε} min_{γ ∈ Π(P,Q)} γ(Y > X) = max_a max_Q [F(a) − G(a)]
//! ```
//!
//! is attained by an exponential tilt of `P` that moves mass from
//! `(-∞, a]` to `(a, ∞)`. The crate provides:
//!
//! - [`dist`]: discrete laws, CDFs, quantiles and the sup-difference statistic.
//! - [`tilt`]: the tilted measure `Q_{λ,a}`, its normalizer and KL divergence.
//! - [`solver`]: the fixed-λ objective, λ(a) calibration, `V_ε`, the λ
//!   boundary and the critical radius.
//! - [`dominance`]: first-order stochastic dominance of the tilted law.
//! - [`oracle`]: brute-force checks (max-flow couplings, direct KL, simplex grids).
//! - [`scenario`]: importance weights and seeded stressed resamples.
//! - [`cli`]: the `klstress` command-line front end.

// NaN-rejecting `!(x > 0.0)` checks and index loops over paired arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dist;
pub mod dominance;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod tilt;

pub use dist::{DiscreteDistribution, DistError};
pub use dominance::{check_fsd, tilted_cdf, DominanceError, FsdCheck};
pub use solver::{LambdaSolution, SolverError, StressReport, SweepRow};
pub use tilt::{TiltError, TiltParams, TiltedMeasure};
