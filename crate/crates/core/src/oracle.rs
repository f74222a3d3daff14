//! Brute-force reference computations.
//!
//! Nothing here reuses the closed forms of [`crate::tilt`] or the CDF scan of
//! [`crate::dist::sup_diff`]:
//!
//! - [`min_coupling_cost`] solves the transport problem with cost
//!   `I{y > x}` as a max-flow: mass on pairs with `y ≤ x` is free, so the
//!   minimal cost is `1 − (max non-crossing flow)`.
//! - [`kl_direct`] sums `q log(q/p)` atom by atom.
//! - [`brute_force_v`] enumerates the probability simplex on a grid.

use rand_core::Rng;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;
use thiserror::Error;

use crate::dist::{sup_diff, DiscreteDistribution};
use crate::scenario::unit_interval;

/// Largest support accepted by [`min_coupling_cost`].
pub const MAX_COUPLING_ATOMS: usize = 64;
/// Largest support accepted by [`brute_force_v`].
pub const MAX_GRID_ATOMS: usize = 4;
const SATURATION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("support of {atoms} atoms exceeds the oracle limit of {limit}")]
    SupportTooLarge { atoms: usize, limit: usize },
    #[error("q has mass at {0}, which is not an atom of p")]
    NotAbsolutelyContinuous(f64),
    #[error("grid step must lie in [1e-4, 1e-1], got {0}")]
    InvalidGrid(f64),
    #[error("KL budget must be positive, got {0}")]
    InvalidEps(f64),
}

/// A joint law on `row_values × col_values`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    pub row_values: Vec<f64>,
    pub col_values: Vec<f64>,
    /// `mass[i][j]` is the probability of `(X, Y) = (row_values[i], col_values[j])`.
    pub mass: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.col_values.len())
            .map(|j| self.mass.iter().map(|row| row[j]).sum())
            .collect()
    }

    /// `γ(Y > X)`.
    pub fn crossing_mass(&self) -> f64 {
        let mut total = 0.0;
        for (i, &x) in self.row_values.iter().enumerate() {
            for (j, &y) in self.col_values.iter().enumerate() {
                if y > x {
                    total += self.mass[i][j];
                }
            }
        }
        total
    }
}

/// Edmonds–Karp on a dense residual matrix.
struct FlowNetwork {
    residual: Vec<Vec<f64>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            residual: vec![vec![0.0; nodes]; nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, capacity: f64) {
        self.residual[from][to] += capacity;
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let n = self.residual.len();
        let mut total = 0.0;
        loop {
            let mut parent = vec![usize::MAX; n];
            parent[source] = source;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for v in 0..n {
                    if parent[v] == usize::MAX && self.residual[u][v] > SATURATION {
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if parent[sink] == usize::MAX {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let u = parent[v];
                bottleneck = bottleneck.min(self.residual[u][v]);
                v = u;
            }
            let mut v = sink;
            while v != source {
                let u = parent[v];
                self.residual[u][v] -= bottleneck;
                self.residual[v][u] += bottleneck;
                v = u;
            }
            total += bottleneck;
        }
    }
}

/// Minimal `γ(Y > X)` over couplings of `p` (for X) and `q` (for Y), with an
/// optimal coupling.
pub fn min_coupling_cost(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> Result<(f64, Coupling), OracleError> {
    for d in [p, q] {
        if d.len() > MAX_COUPLING_ATOMS {
            return Err(OracleError::SupportTooLarge {
                atoms: d.len(),
                limit: MAX_COUPLING_ATOMS,
            });
        }
    }
    Ok(coupling_from_masses(p.values(), p.probs(), q.values(), q.probs()))
}

/// Same as [`min_coupling_cost`] on raw atom/mass slices; masses may be zero.
fn coupling_from_masses(xs: &[f64], px: &[f64], ys: &[f64], qy: &[f64]) -> (f64, Coupling) {
    let (n, m) = (xs.len(), ys.len());
    let source = n + m;
    let sink = n + m + 1;
    let mut net = FlowNetwork::new(n + m + 2);
    for i in 0..n {
        net.add_edge(source, i, px[i]);
        for j in 0..m {
            if ys[j] <= xs[i] {
                net.add_edge(i, n + j, f64::INFINITY);
            }
        }
    }
    for j in 0..m {
        net.add_edge(n + j, sink, qy[j]);
    }
    let flow = net.max_flow(source, sink);

    let mut mass = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            if ys[j] <= xs[i] {
                mass[i][j] = net.residual[n + j][i];
            }
        }
    }
    // Leftover mass can only sit on crossing pairs; any pairing works.
    let mut row_left: Vec<f64> = (0..n)
        .map(|i| (px[i] - mass[i].iter().sum::<f64>()).max(0.0))
        .collect();
    let mut col_left: Vec<f64> = (0..m)
        .map(|j| (qy[j] - (0..n).map(|i| mass[i][j]).sum::<f64>()).max(0.0))
        .collect();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        let moved = row_left[i].min(col_left[j]);
        mass[i][j] += moved;
        row_left[i] -= moved;
        col_left[j] -= moved;
        if row_left[i] <= col_left[j] {
            i += 1;
        } else {
            j += 1;
        }
    }

    let cost = (1.0 - flow).clamp(0.0, 1.0);
    let coupling = Coupling {
        row_values: xs.to_vec(),
        col_values: ys.to_vec(),
        mass,
    };
    (cost, coupling)
}

/// `Σ qᵢ log(qᵢ/pᵢ)` with `0·log 0 = 0`.
pub fn kl_direct(q: &DiscreteDistribution, p: &DiscreteDistribution) -> Result<f64, OracleError> {
    let mut total = 0.0;
    for (&v, &qi) in q.values().iter().zip(q.probs()) {
        let idx = p
            .values()
            .binary_search_by(|probe| probe.total_cmp(&v))
            .map_err(|_| OracleError::NotAbsolutelyContinuous(v))?;
        total += qi * (qi / p.probs()[idx]).ln();
    }
    Ok(total.max(0.0))
}

fn kl_masses(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| qi * (qi / pi).ln())
        .sum()
}

/// Grid lower bound on `V_ε`: the best `min_coupling_cost(p, Q)` over
/// grid laws `Q` on `p`'s atoms with `KL(Q‖p) ≤ ε`.
pub fn brute_force_v(p: &DiscreteDistribution, eps: f64, grid_step: f64) -> Result<f64, OracleError> {
    if p.len() > MAX_GRID_ATOMS {
        return Err(OracleError::SupportTooLarge {
            atoms: p.len(),
            limit: MAX_GRID_ATOMS,
        });
    }
    if !(1e-4..=1e-1).contains(&grid_step) {
        return Err(OracleError::InvalidGrid(grid_step));
    }
    if !(eps > 0.0) {
        return Err(OracleError::InvalidEps(eps));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let n = p.len();
    let best = (0..=steps)
        .into_par_iter()
        .map(|first| {
            let mut counts = vec![0usize; n];
            counts[0] = first;
            let mut best = 0.0f64;
            let mut q = vec![0.0; n];
            for_each_composition(&mut counts, 1, steps - first, &mut |counts| {
                for (qi, &k) in q.iter_mut().zip(counts.iter()) {
                    *qi = k as f64 / steps as f64;
                }
                if kl_masses(&q, p.probs()) <= eps {
                    let (cost, _) = coupling_from_masses(p.values(), p.probs(), p.values(), &q);
                    best = best.max(cost);
                }
            });
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Visits every way to fill `counts[pos..]` with nonnegative integers summing to `left`.
fn for_each_composition(counts: &mut [usize], pos: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
    if pos + 1 >= counts.len() {
        if pos < counts.len() {
            counts[pos] = left;
        } else if left != 0 {
            return;
        }
        visit(counts);
        return;
    }
    for k in 0..=left {
        counts[pos] = k;
        for_each_composition(counts, pos + 1, left - k, visit);
    }
}

/// A random law with `1..=max_atoms` atoms on the integer grid `0..=9`
/// (so independent draws share atoms and produce CDF ties).
pub fn random_distribution(rng: &mut SplitMix64, max_atoms: usize) -> DiscreteDistribution {
    let n = 1 + (rng.next_u64() % max_atoms as u64) as usize;
    let values: Vec<f64> = (0..n).map(|_| (rng.next_u64() % 10) as f64).collect();
    let weights: Vec<f64> = (0..n).map(|_| 0.05 + unit_interval(rng)).collect();
    DiscreteDistribution::from_atoms(&values, &weights).expect("positive weights")
}

/// Summary of a randomized oracle-versus-closed-form run.
#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub instances: usize,
    pub seed: u64,
    pub grid: f64,
    pub duality_max_error: f64,
    pub kl_max_error: f64,
    pub fsd_min_gap: f64,
    pub value_eps_max_error: f64,
    pub value_eps_instances: usize,
    pub passed: bool,
}

/// Runs the duality, KL and dominance identities on `instances` random
/// cases, plus a grid comparison of `V_ε` on a handful of 3-atom laws.
pub fn verify(instances: usize, seed: u64, grid: f64) -> Result<VerifySummary, OracleError> {
    use crate::dominance::tilted_cdf;
    use crate::tilt::{kl_of_tilt, tilt, TiltParams};
    use rand_core::SeedableRng;

    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut duality_max_error = 0.0f64;
    let mut kl_max_error = 0.0f64;
    let mut fsd_min_gap = f64::INFINITY;
    for _ in 0..instances {
        let p = random_distribution(&mut rng, 8);
        let q = random_distribution(&mut rng, 8);
        let (cost, _) = min_coupling_cost(&p, &q)?;
        duality_max_error = duality_max_error.max((cost - sup_diff(&p, &q).value).abs());

        let lambda = 10f64.powf(-1.0 + 3.0 * unit_interval(&mut rng));
        let a = (rng.next_u64() % 10) as f64;
        let params = TiltParams::new(lambda, a).expect("positive lambda");
        let t = tilt(&p, params).expect("lambda above the underflow range");
        let direct = kl_direct(&t.to_distribution(), &p)?;
        kl_max_error = kl_max_error.max((kl_of_tilt(&p, &params) - direct).abs());
        for (i, &x) in p.values().iter().enumerate() {
            fsd_min_gap = fsd_min_gap.min(p.cdf_at_index(i) - tilted_cdf(&t, x));
        }
    }

    let value_eps_instances = instances.min(5);
    let mut value_eps_max_error = 0.0f64;
    for k in 0..value_eps_instances {
        let weights: Vec<f64> = (0..3).map(|_| 0.05 + unit_interval(&mut rng)).collect();
        let p = DiscreteDistribution::from_atoms(&[0.0, 1.0, 2.0], &weights).expect("positive weights");
        let eps = [0.05, 0.2, 0.5][k % 3];
        let brute = brute_force_v(&p, eps, grid)?;
        let exact = crate::solver::value_eps(&p, eps)
            .expect("valid budget")
            .value;
        value_eps_max_error = value_eps_max_error.max((brute - exact).abs());
    }

    let passed = duality_max_error <= 1e-10
        && kl_max_error <= 1e-10
        && fsd_min_gap >= -1e-12
        && value_eps_max_error <= 2.0 * grid;
    Ok(VerifySummary {
        instances,
        seed,
        grid,
        duality_max_error,
        kl_max_error,
        fsd_min_gap: if fsd_min_gap.is_finite() { fsd_min_gap } else { 0.0 },
        value_eps_max_error,
        value_eps_instances,
        passed,
    })
}
