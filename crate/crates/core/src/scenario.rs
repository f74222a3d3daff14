//! Stressed scenarios from a tilted law.
//!
//! Draws come from a seeded SplitMix64 stream (state = seed, increment
//! `0x9E3779B97F4A7C15`, output mix constants `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`). Each 64-bit output `x` becomes a uniform
//! `u = (x >> 11) · 2⁻⁵³ ∈ [0, 1)`, and the draw is the first atom whose
//! cumulative tilted mass exceeds `u`.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use crate::tilt::{TiltParams, TiltedMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScenarioMethod {
    Resample,
    Weights,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSet {
    pub draws: Vec<f64>,
    pub seed: u64,
    pub source: TiltParams,
    pub method: ScenarioMethod,
}

/// Uniform double in `[0, 1)` from the top 53 bits of one output.
pub fn unit_interval(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `dQ/dP` at each baseline atom.
pub fn importance_weights(t: &TiltedMeasure) -> Vec<f64> {
    (0..t.values().len()).map(|i| t.density_at(i)).collect()
}

/// `n` draws from the tilted law by inverse CDF.
pub fn sample(t: &TiltedMeasure, n: usize, seed: u64) -> ScenarioSet {
    let mut cumulative = Vec::with_capacity(t.tilted_probs().len());
    let mut acc = 0.0;
    for p in t.tilted_probs() {
        acc += p;
        cumulative.push(acc);
    }
    let values = t.values();
    let last = values.len() - 1;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let draws = (0..n)
        .map(|_| {
            let u = unit_interval(&mut rng);
            let i = cumulative.partition_point(|&c| c <= u).min(last);
            values[i]
        })
        .collect();
    ScenarioSet {
        draws,
        seed,
        source: t.params(),
        method: ScenarioMethod::Resample,
    }
}

/// The baseline atoms themselves, to be paired with [`importance_weights`].
pub fn weighted_atoms(t: &TiltedMeasure, seed: u64) -> ScenarioSet {
    ScenarioSet {
        draws: t.values().to_vec(),
        seed,
        source: t.params(),
        method: ScenarioMethod::Weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDistribution;
    use crate::tilt::tilt;
    use std::f64::consts::LN_2;

    fn four_atom_tilt() -> TiltedMeasure {
        let d = DiscreteDistribution::uniform(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        tilt(&d, TiltParams::new(1.0 / LN_2, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn splitmix_reference_stream() {
        // First outputs of splitmix64.c seeded with 0.
        let mut rng = SplitMix64::seed_from_u64(0);
        assert_eq!(rng.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(rng.next_u64(), 0x6E789E6AA1B965F4);
    }

    #[test]
    fn weights_examples() {
        let t = four_atom_tilt();
        let w = importance_weights(&t);
        let expected = [2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0];
        for (x, e) in w.iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
        let mean: f64 = w.iter().zip(t.base().probs()).map(|(w, p)| w * p).sum();
        assert!((mean - 1.0).abs() < 1e-12);

        let d = DiscreteDistribution::uniform(&[1.0, 2.0]).unwrap();
        let t = tilt(&d, TiltParams::new(0.5, 0.0).unwrap()).unwrap();
        assert_eq!(importance_weights(&t), vec![1.0, 1.0]);
    }

    #[test]
    fn sample_single_atom() {
        let d = DiscreteDistribution::uniform(&[7.0]).unwrap();
        let t = tilt(&d, TiltParams::new(1.0, 7.0).unwrap()).unwrap();
        assert_eq!(sample(&t, 1, 99).draws, vec![7.0]);
    }

    #[test]
    fn sample_is_deterministic() {
        let t = four_atom_tilt();
        assert_eq!(sample(&t, 1000, 42), sample(&t, 1000, 42));
        assert_ne!(sample(&t, 1000, 42).draws, sample(&t, 1000, 43).draws);
    }

    #[test]
    fn sample_frequencies() {
        let t = four_atom_tilt();
        let s = sample(&t, 100_000, 1);
        for (v, q) in t.values().iter().zip(t.tilted_probs()) {
            let freq = s.draws.iter().filter(|d| *d == v).count() as f64 / 1e5;
            assert!((freq - q).abs() < 0.01, "{v}: {freq} vs {q}");
        }
    }
}
