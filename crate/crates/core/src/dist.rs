//! One-dimensional discrete probability laws.
//!
//! A [`DiscreteDistribution`] is a list of strictly increasing atoms with
//! positive masses summing to one. The CDF is right-continuous, so
//! `cdf(x)` counts every atom `≤ x`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass after normalization.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("no values given")]
    Empty,
    #[error("non-finite value at index {index}: {value}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("weights length {weights} does not match values length {values}")]
    LengthMismatch { values: usize, weights: usize },
    #[error("invalid weight at index {index}: {weight}")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("weights sum to zero")]
    ZeroMass,
    #[error("probability {0} outside (0, 1]")]
    ProbabilityOutOfRange(f64),
}

/// A discrete law on the real line: sorted atoms with positive masses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Wire form `{"values": [...], "probs": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomList {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a law from observations with optional nonnegative weights.
    ///
    /// Tied values are merged with their weights summed, zero-weight atoms are
    /// dropped, and the result is normalized to total mass one. Without
    /// weights every observation counts equally.
    pub fn from_samples(values: &[f64], weights: Option<&[f64]>) -> Result<Self, DistError> {
        if values.is_empty() {
            return Err(DistError::Empty);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DistError::NonFiniteValue { index, value });
        }
        let mut pairs: Vec<(f64, f64)> = match weights {
            None => values.iter().map(|&v| (v, 1.0)).collect(),
            Some(w) => {
                if w.len() != values.len() {
                    return Err(DistError::LengthMismatch {
                        values: values.len(),
                        weights: w.len(),
                    });
                }
                if let Some((index, &weight)) = w
                    .iter()
                    .enumerate()
                    .find(|(_, w)| !w.is_finite() || **w < 0.0)
                {
                    return Err(DistError::InvalidWeight { index, weight });
                }
                values.iter().copied().zip(w.iter().copied()).collect()
            }
        };
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut merged_values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged_mass: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            // -0.0 and 0.0 are the same atom
            match merged_values.last() {
                Some(&last) if last == v => *merged_mass.last_mut().unwrap() += w,
                _ => {
                    merged_values.push(v);
                    merged_mass.push(w);
                }
            }
        }
        let total: f64 = merged_mass.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(DistError::ZeroMass);
        }
        let (values, probs): (Vec<f64>, Vec<f64>) = merged_values
            .into_iter()
            .zip(merged_mass)
            .filter(|&(_, w)| w > 0.0)
            .map(|(v, w)| (v, w / total))
            .unzip();
        Ok(Self::from_sorted_parts(values, probs))
    }

    /// Builds a law from explicit atoms and masses. Masses are renormalized,
    /// so they need only be proportional to the intended probabilities.
    pub fn from_atoms(values: &[f64], probs: &[f64]) -> Result<Self, DistError> {
        Self::from_samples(values, Some(probs))
    }

    /// Uniform law on the given values (ties merged).
    pub fn uniform(values: &[f64]) -> Result<Self, DistError> {
        Self::from_samples(values, None)
    }

    /// Assumes sorted, strictly increasing `values` and positive `probs`.
    pub(crate) fn from_sorted_parts(values: Vec<f64>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), probs.len());
        debug_assert!(values.windows(2).all(|w| w[0] < w[1]));
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Self {
            values,
            probs,
            cumulative,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; a distribution has at least one atom.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `F` evaluated at the `i`-th atom. Exactly one at the last atom.
    pub fn cdf_at_index(&self, i: usize) -> f64 {
        if i + 1 >= self.values.len() {
            1.0
        } else {
            self.cumulative[i].min(1.0)
        }
    }

    /// Right-continuous CDF: total mass of atoms `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        if k == 0 { 0.0 } else { self.cdf_at_index(k - 1) }
    }

    /// Generalized inverse: the smallest atom `v` with `F(v) ≥ p`.
    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(DistError::ProbabilityOutOfRange(p));
        }
        let n = self.values.len();
        let i = (0..n).find(|&i| self.cdf_at_index(i) >= p).unwrap_or(n - 1);
        Ok(self.values[i])
    }

    pub fn to_atom_list(&self) -> AtomList {
        AtomList {
            values: self.values.clone(),
            probs: self.probs.clone(),
        }
    }

    /// Whether both laws sit on exactly the same atoms.
    pub fn same_support(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl TryFrom<AtomList> for DiscreteDistribution {
    type Error = DistError;

    fn try_from(list: AtomList) -> Result<Self, Self::Error> {
        Self::from_atoms(&list.values, &list.probs)
    }
}

/// Result of [`sup_diff`]: the maximizing threshold and `max_a [F(a) − G(a)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupDiff {
    pub threshold: f64,
    pub value: f64,
}

/// `max_a [F(a) − G(a)]` for `F = cdf(p)`, `G = cdf(q)`.
///
/// This is the minimal probability of `{Y > X}` over all couplings of
/// `X ~ p` and `Y ~ q`. Both CDFs are step functions, so the maximum is
/// searched over the union of atoms only; the value at `±∞` is zero, which
/// bounds the result below. Ties go to the smallest atom.
pub fn sup_diff(p: &DiscreteDistribution, q: &DiscreteDistribution) -> SupDiff {
    let (pv, qv) = (p.values(), q.values());
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: Option<SupDiff> = None;
    while i < pv.len() || j < qv.len() {
        let a = match (pv.get(i), qv.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < pv.len() && pv[i] <= a {
            i += 1;
        }
        while j < qv.len() && qv[j] <= a {
            j += 1;
        }
        let f = if i == 0 { 0.0 } else { p.cdf_at_index(i - 1) };
        let g = if j == 0 { 0.0 } else { q.cdf_at_index(j - 1) };
        let diff = f - g;
        if best.is_none_or(|b| diff > b.value) {
            best = Some(SupDiff {
                threshold: a,
                value: diff,
            });
        }
    }
    let best = best.expect("distributions are nonempty");
    SupDiff {
        threshold: best.threshold,
        value: best.value.clamp(0.0, 1.0),
    }
}
