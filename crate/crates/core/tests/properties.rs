use proptest::prelude::*;

use klstress::dist::{sup_diff, DiscreteDistribution};
use klstress::dominance::{check_fsd, tilted_cdf};
use klstress::oracle::{brute_force_v, kl_direct, min_coupling_cost};
use klstress::scenario::importance_weights;
use klstress::solver::{
    maximize_phi, phi, severity_sweep, solve_lambda, value_eps, LambdaSolution,
};
use klstress::tilt::{kl_of_tilt, tilt, tilted_cdf_at_a, TiltParams};

fn distribution(max_atoms: usize) -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec((0u8..10, 0.01f64..1.0), 1..=max_atoms).prop_map(|atoms| {
        let (values, weights): (Vec<f64>, Vec<f64>) =
            atoms.into_iter().map(|(v, w)| (f64::from(v), w)).unzip();
        DiscreteDistribution::from_atoms(&values, &weights).unwrap()
    })
}

/// A distribution with at least two atoms plus an index that splits it.
fn split() -> impl Strategy<Value = (DiscreteDistribution, usize)> {
    distribution(8)
        .prop_filter("needs two atoms", |d| d.len() >= 2)
        .prop_flat_map(|d| {
            let n = d.len();
            (Just(d), 0..n - 1)
        })
}

fn lambda() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn cdf_monotone_and_quantile_round_trip(d in distribution(8), xs in prop::collection::vec(-1.0f64..11.0, 1..20)) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let fs: Vec<f64> = xs.iter().map(|&x| d.cdf(x)).collect();
        prop_assert!(fs.windows(2).all(|w| w[0] <= w[1]));
        for &v in d.values() {
            prop_assert_eq!(d.quantile(d.cdf(v)).unwrap(), v);
        }
        let total: f64 = d.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sup_diff_matches_coupling_oracle(p in distribution(8), q in distribution(8)) {
        let (cost, coupling) = min_coupling_cost(&p, &q).unwrap();
        prop_assert!((cost - sup_diff(&p, &q).value).abs() <= 1e-10);
        prop_assert!((coupling.crossing_mass() - cost).abs() <= 1e-10);
        for (s, e) in coupling.row_sums().iter().zip(p.probs()) {
            prop_assert!((s - e).abs() <= 1e-10);
        }
        for (s, e) in coupling.col_sums().iter().zip(q.probs()) {
            prop_assert!((s - e).abs() <= 1e-10);
        }
        prop_assert_eq!(sup_diff(&p, &p).value, 0.0);
    }

    #[test]
    fn tilt_identities(d in distribution(8), lambda in lambda(), a in -1.0f64..10.0) {
        let params = TiltParams::new(lambda, a).unwrap();
        let t = tilt(&d, params).unwrap();
        let total: f64 = t.tilted_probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(t.below_factor() <= 1.0 && t.above_factor() >= 1.0);
        for (i, (&v, &p)) in d.values().iter().zip(d.probs()).enumerate() {
            let factor = if v <= a { t.below_factor() } else { t.above_factor() };
            prop_assert_eq!(t.tilted_probs()[i], p * factor);
        }
        let direct = kl_direct(&t.to_distribution(), &d).unwrap();
        prop_assert!((kl_of_tilt(&d, &params) - direct).abs() <= 1e-10);
        let dual = d.cdf(a) - tilted_cdf_at_a(&d, &params);
        prop_assert!((phi(&d, &params) - dual).abs() <= 1e-12);
    }

    #[test]
    fn tilted_cdf_dominated_and_consistent(d in distribution(8), lambda in lambda(), a in -1.0f64..10.0) {
        let t = tilt(&d, TiltParams::new(lambda, a).unwrap()).unwrap();
        prop_assert!(check_fsd(&d, &t).unwrap().ok);
        let mut cum = 0.0;
        for (i, &x) in d.values().iter().enumerate() {
            cum += t.tilted_probs()[i];
            prop_assert!((tilted_cdf(&t, x) - cum).abs() <= 1e-12);
            prop_assert!(d.cdf(x) >= tilted_cdf(&t, x) - 1e-12);
        }
    }

    #[test]
    fn importance_weights_reweight_expectations(d in distribution(8), lambda in lambda(), a in -1.0f64..10.0) {
        let t = tilt(&d, TiltParams::new(lambda, a).unwrap()).unwrap();
        let w = importance_weights(&t);
        let f = |x: f64| x * x - 3.0 * x;
        let under_p: f64 = d.values().iter().zip(d.probs()).zip(&w).map(|((&x, &p), &w)| p * w * f(x)).sum();
        let under_q: f64 = d.values().iter().zip(t.tilted_probs()).map(|(&x, &q)| q * f(x)).sum();
        prop_assert!((under_p - under_q).abs() <= 1e-12 * (1.0 + under_q.abs()));
    }

    #[test]
    fn solve_lambda_round_trip((d, i) in split(), lambda0 in (-1.0f64..1.5).prop_map(|e| 10f64.powf(e))) {
        let a = d.values()[i];
        let eps = kl_of_tilt(&d, &TiltParams::new(lambda0, a).unwrap());
        prop_assume!(eps > 0.0);
        match solve_lambda(&d, a, eps).unwrap() {
            LambdaSolution::Lambda(l) => {
                let kl = kl_of_tilt(&d, &TiltParams::new(l, a).unwrap());
                prop_assert!((kl - eps).abs() <= 1e-10);
            }
            LambdaSolution::Depletion => prop_assert!(false, "budget below the cap"),
        }
    }

    #[test]
    fn maximize_phi_is_exhaustive(d in distribution(8), lambda in lambda()) {
        let best = maximize_phi(&d, lambda).unwrap();
        for &a in d.values() {
            prop_assert!(best.phi_star >= phi(&d, &TiltParams::new(lambda, a).unwrap()));
        }
    }

    #[test]
    fn value_eps_monotone_and_feasible(d in distribution(6), e1 in 0.0f64..1.5, e2 in 0.0f64..1.5) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let r_lo = value_eps(&d, lo).unwrap();
        let r_hi = value_eps(&d, hi).unwrap();
        prop_assert!(r_lo.value <= r_hi.value + 1e-12);
        for (r, eps) in [(r_lo, lo), (r_hi, hi)] {
            prop_assert!(r.kl <= eps + 1e-9);
            prop_assert!((d.cdf(r.a_star) - r.g_at_a - r.value).abs() <= 1e-12);
            prop_assert_eq!(r.exceeds_half, r.value > 0.5);
            prop_assert!(r.fsd_ok);
        }
    }

    #[test]
    fn sweep_severity_nonincreasing(d in distribution(8), mut lambdas in prop::collection::vec(lambda(), 1..8)) {
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        let rows = severity_sweep(&d, &lambdas).unwrap();
        prop_assert_eq!(rows.len(), lambdas.len());
        prop_assert!(rows.windows(2).all(|w| w[1].phi_star <= w[0].phi_star));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn value_eps_matches_grid_oracle(
        weights in prop::collection::vec(0.05f64..1.0, 3),
        eps in prop::sample::select(vec![0.05, 0.2, 0.5]),
    ) {
        let d = DiscreteDistribution::from_atoms(&[0.0, 1.5, 4.0], &weights).unwrap();
        let grid = 0.01;
        let brute = brute_force_v(&d, eps, grid).unwrap();
        let exact = value_eps(&d, eps).unwrap().value;
        prop_assert!(brute <= exact + 2.0 * grid);
        prop_assert!(brute >= exact - 2.0 * grid);
    }
}
