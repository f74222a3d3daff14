//! First-order stochastic dominance of a tilted law over its baseline.
//!
//! The tilt only moves mass upward across the threshold, so its CDF
//! `G*` stays below the baseline `F` everywhere. Both are step functions
//! changing only at atoms, so checking atoms is exact.

use serde::Serialize;
use thiserror::Error;

use crate::dist::DiscreteDistribution;
use crate::tilt::TiltedMeasure;

/// Slack allowed for roundoff in `Z` before a gap counts as a violation.
pub const FSD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DominanceError {
    #[error("tilted measure is not supported on the baseline atoms")]
    MismatchedSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FsdCheck {
    pub ok: bool,
    /// Largest `G*(x) − F(x)` over atoms, floored at zero.
    pub max_violation: f64,
}

/// CDF of the tilted law, in the two-branch form
///
/// ```text
/// G*(x) = b·F(x)                        for x ≤ a
/// G*(x) = b·F(a) + u·(F(x) − F(a))      for x > a
/// ```
///
/// with `b = e^{−1/λ}/Z` and `u = 1/Z`.
pub fn tilted_cdf(t: &TiltedMeasure, x: f64) -> f64 {
    let base = t.base();
    let f_x = base.cdf(x);
    if f_x >= 1.0 {
        return 1.0;
    }
    let a = t.params().a();
    if x <= a {
        t.below_factor() * f_x
    } else {
        let f_a = base.cdf(a);
        t.below_factor() * f_a + t.above_factor() * (f_x - f_a)
    }
}

/// Checks `F(x) ≥ G*(x)` at every atom of `base`.
pub fn check_fsd(base: &DiscreteDistribution, t: &TiltedMeasure) -> Result<FsdCheck, DominanceError> {
    if !base.same_support(t.base()) {
        return Err(DominanceError::MismatchedSupport);
    }
    Ok(dominance_gap(base, |x| tilted_cdf(t, x)))
}

/// Dominance check against an arbitrary reweighting of the baseline atoms.
pub(crate) fn check_fsd_masses(
    base: &DiscreteDistribution,
    masses: &[f64],
) -> Result<FsdCheck, DominanceError> {
    if masses.len() != base.len() {
        return Err(DominanceError::MismatchedSupport);
    }
    let mut cumulative = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in masses {
        acc += m;
        cumulative.push(acc);
    }
    let values = base.values();
    Ok(dominance_gap(base, |x| {
        let k = values.partition_point(|&v| v <= x);
        if k == 0 { 0.0 } else { cumulative[k - 1] }
    }))
}

fn dominance_gap(base: &DiscreteDistribution, g: impl Fn(f64) -> f64) -> FsdCheck {
    let worst = base
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| g(x) - base.cdf_at_index(i))
        .fold(f64::NEG_INFINITY, f64::max);
    FsdCheck {
        ok: worst <= FSD_TOLERANCE,
        max_violation: worst.max(0.0),
    }
}
