//! Exponential tilt of a baseline law against the indicator `I{x ≤ a}`.
//!
//! ```text
//! dQ_{λ,a}/dP (x) = exp(−I{x ≤ a}/λ) / Z(λ,a),    Z(λ,a) = 1 − (1 − e^{−1/λ}) F(a)
//! ```
//!
//! Mass at or below `a` is scaled down by `e^{−1/λ}/Z ≤ 1`, mass above `a`
//! scaled up by `1/Z ≥ 1`. Logarithms are natural throughout (KL in nats).

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::dist::DiscreteDistribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TiltError {
    #[error("tilt multiplier must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("threshold must be finite, got {0}")]
    InvalidThreshold(f64),
    #[error("e^(-1/lambda) underflows to 0 at lambda = {lambda} while 0 < F(a) < 1; use the depletion limit")]
    DepletionUnderflow { lambda: f64 },
}

/// The pair `(λ, a)`: tilt multiplier and threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltParams {
    lambda: f64,
    a: f64,
}

impl TiltParams {
    pub fn new(lambda: f64, a: f64) -> Result<Self, TiltError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(TiltError::InvalidLambda(lambda));
        }
        if !a.is_finite() {
            return Err(TiltError::InvalidThreshold(a));
        }
        Ok(Self { lambda, a })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `e^{−1/λ}`, the raw density ratio between the two regions.
    pub fn decay(&self) -> f64 {
        (-1.0 / self.lambda).exp()
    }

    /// `C = 1 − e^{−1/λ}`, computed without cancellation for large λ.
    pub fn contraction(&self) -> f64 {
        -(-1.0 / self.lambda).exp_m1()
    }
}

/// `Z(λ,a) = 1 − (1 − e^{−1/λ}) F(a)`.
pub fn normalizer(d: &DiscreteDistribution, params: &TiltParams) -> f64 {
    normalizer_from_cdf(d.cdf(params.a), params)
}

pub(crate) fn normalizer_from_cdf(f_a: f64, params: &TiltParams) -> f64 {
    if f_a >= 1.0 {
        // exact: Z = e^{−1/λ}
        return params.decay();
    }
    1.0 - params.contraction() * f_a
}

/// `G_{λ,a}(a) = e^{−1/λ} F(a) / Z(λ,a)`, the tilted CDF at the threshold.
pub fn tilted_cdf_at_a(d: &DiscreteDistribution, params: &TiltParams) -> f64 {
    tilted_cdf_at_a_from_cdf(d.cdf(params.a), params)
}

pub(crate) fn tilted_cdf_at_a_from_cdf(f_a: f64, params: &TiltParams) -> f64 {
    if f_a <= 0.0 {
        return 0.0;
    }
    if f_a >= 1.0 {
        return 1.0;
    }
    let g = params.decay() * f_a / normalizer_from_cdf(f_a, params);
    g.min(f_a)
}

/// Closed-form `KL(Q_{λ,a} ‖ P) = −log Z(λ,a) − G_{λ,a}(a)/λ`.
///
/// At `λ → 0` (where `e^{−1/λ}` underflows) this is the depletion value
/// `−log(1 − F(a))`.
pub fn kl_of_tilt(d: &DiscreteDistribution, params: &TiltParams) -> f64 {
    kl_of_tilt_from_cdf(d.cdf(params.a), params)
}

pub(crate) fn kl_of_tilt_from_cdf(f_a: f64, params: &TiltParams) -> f64 {
    if f_a <= 0.0 || f_a >= 1.0 {
        return 0.0;
    }
    let neg_log_z = -(-params.contraction() * f_a).ln_1p();
    let g = tilted_cdf_at_a_from_cdf(f_a, params);
    (neg_log_z - g / params.lambda).max(0.0)
}

/// Distance from the depletion cap, `−log(1 − F(a)) − KL(Q_{λ,a} ‖ P)`,
/// evaluated without cancellation.
///
/// With `r = e^{−1/λ} F(a) / (1 − F(a))` the gap is `log(1 + r) + r / ((1 + r) λ)`.
/// For small λ the KL itself equals the cap to every representable digit,
/// while the gap (of order `e^{−1/λ}`) still resolves the strict ordering in λ.
pub fn kl_gap_to_depletion(d: &DiscreteDistribution, params: &TiltParams) -> f64 {
    let f_a = d.cdf(params.a);
    if f_a <= 0.0 || f_a >= 1.0 {
        return 0.0;
    }
    let r = params.decay() * f_a / (1.0 - f_a);
    r.ln_1p() + r / ((1.0 + r) * params.lambda)
}

/// The tilted law `Q_{λ,a}` on the baseline's atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedMeasure {
    base: DiscreteDistribution,
    params: TiltParams,
    z: f64,
    below_factor: f64,
    above_factor: f64,
    tilted_probs: Vec<f64>,
}

/// Tilts `d` at `(λ, a)`.
///
/// Fails with [`TiltError::DepletionUnderflow`] when `e^{−1/λ}` is exactly
/// zero in double precision (λ below about 1/745) and the threshold splits
/// the support.
pub fn tilt(d: &DiscreteDistribution, params: TiltParams) -> Result<TiltedMeasure, TiltError> {
    let f_a = d.cdf(params.a);
    let decay = params.decay();
    if decay == 0.0 && f_a > 0.0 {
        // F(a) = 1 with decay 0 would need Z = 0 as well
        return Err(TiltError::DepletionUnderflow {
            lambda: params.lambda,
        });
    }
    let z = normalizer_from_cdf(f_a, &params);
    let (below_factor, above_factor) = if f_a >= 1.0 {
        (1.0, 1.0 / z)
    } else {
        (decay / z, 1.0 / z)
    };
    let tilted_probs = d
        .values()
        .iter()
        .zip(d.probs())
        .map(|(&v, &p)| p * if v <= params.a { below_factor } else { above_factor })
        .collect();
    Ok(TiltedMeasure {
        base: d.clone(),
        params,
        z,
        below_factor,
        above_factor,
        tilted_probs,
    })
}

impl TiltedMeasure {
    pub fn base(&self) -> &DiscreteDistribution {
        &self.base
    }

    pub fn params(&self) -> TiltParams {
        self.params
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Density `dQ/dP` on `x ≤ a`.
    pub fn below_factor(&self) -> f64 {
        self.below_factor
    }

    /// Density `dQ/dP` on `x > a`.
    pub fn above_factor(&self) -> f64 {
        self.above_factor
    }

    pub fn values(&self) -> &[f64] {
        self.base.values()
    }

    pub fn tilted_probs(&self) -> &[f64] {
        &self.tilted_probs
    }

    /// `dQ/dP` at the `i`-th atom.
    pub fn density_at(&self, i: usize) -> f64 {
        if self.base.values()[i] <= self.params.a {
            self.below_factor
        } else {
            self.above_factor
        }
    }

    /// The tilted law as a standalone distribution (atoms with zero tilted
    /// mass are dropped).
    pub fn to_distribution(&self) -> DiscreteDistribution {
        DiscreteDistribution::from_atoms(self.base.values(), &self.tilted_probs)
            .expect("tilted masses are nonnegative with positive total")
    }
}

impl Serialize for TiltedMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            lambda: f64,
            a: f64,
            z: f64,
            below_factor: f64,
            above_factor: f64,
            values: &'a [f64],
            probs: &'a [f64],
        }
        Wire {
            lambda: self.params.lambda,
            a: self.params.a,
            z: self.z,
            below_factor: self.below_factor,
            above_factor: self.above_factor,
            values: self.base.values(),
            probs: &self.tilted_probs,
        }
        .serialize(serializer)
    }
}
