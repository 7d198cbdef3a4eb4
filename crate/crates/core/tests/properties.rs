use proptest::prelude::*;

use dirpoly::certificates::{directed_path_search, holder_log_cost, PercoGrid};
use dirpoly::disorder::{build_block_covariance, gamma, log_mgf, DisorderSpec, HashedEnvironment};
use dirpoly::estimators::{estimate_free_energy, RunConfig};
use dirpoly::geometry::{
    cell_of, confined_endpoint_prob, escape_probability, srw_point_probability, CoarsePlan, Constants, Dim,
};
use dirpoly::oracle::brute_force_log_partition;
use dirpoly::renewal::meet_probabilities;
use dirpoly::rng::{purpose, stream_rng};
use dirpoly::transfer::{pair_pinning_partition, quenched_partition, Direction};

fn dim() -> impl Strategy<Value = Dim> {
    prop_oneof![Just(Dim::One), Just(Dim::Two)]
}

fn spec() -> impl Strategy<Value = DisorderSpec> {
    prop_oneof![
        Just(DisorderSpec::Gaussian),
        Just(DisorderSpec::Rademacher),
        Just(DisorderSpec::finite_discrete(vec![(-2.0, 0.2), (0.5, 0.8)]).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_equals_enumeration(d in dim(), s in spec(), seed in any::<u64>(), beta in 0.0f64..1.5, n in 1usize..8) {
        let n = if d == Dim::Two { n.min(5) } else { n + 4 };
        let env = HashedEnvironment::new(&s, d, seed).unwrap();
        let fast = quenched_partition(&env, beta, &s, n).unwrap().log_w;
        let slow = brute_force_log_partition(&env, beta, &s, n).unwrap();
        prop_assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0));
    }

    #[test]
    fn escape_is_monotone(d in dim(), n in 1u64..40, h in 1i64..8) {
        let p = escape_probability(n, h, d);
        prop_assert!(escape_probability(n, h + 1, d) <= p + 1e-15);
        prop_assert!(escape_probability(n + 1, h, d) >= p - 1e-15);
    }

    #[test]
    fn confined_below_point_probability(r in 1u64..16) {
        let r = 2 * r;
        let n = r * r;
        prop_assert!(confined_endpoint_prob(n).unwrap() <= srw_point_probability(n, r as i64));
    }

    #[test]
    fn cells_partition_space(x in -500i64..500, y in -500i64..500, r in 1u64..12, d in dim()) {
        let n = r * r;
        let c = cell_of([x, y], n, d).unwrap();
        let r = r as i64;
        prop_assert!(c[0] * r <= x && x < (c[0] + 1) * r);
        if d == Dim::Two {
            prop_assert!(c[1] * r <= y && y < (c[1] + 1) * r);
        } else {
            prop_assert_eq!(c[1], 0);
        }
    }

    #[test]
    fn holder_general_form_on_gaussian(theta in 0.01f64..0.99, delta in 0.0f64..2.0, j in 1u64..10_000) {
        let g = DisorderSpec::Gaussian;
        let closed = holder_log_cost(theta, delta, j, &g).unwrap();
        let general = j as f64 * ((1.0 - theta) * log_mgf(&g, theta * delta / (1.0 - theta)).unwrap()
            + theta * log_mgf(&g, -delta).unwrap());
        prop_assert!((closed - general).abs() <= 1e-12 * closed.abs().max(1.0));
    }

    #[test]
    fn opening_edges_never_shortens_paths(seed in any::<u64>(), p in 0.3f64..0.8, flips in 1usize..40) {
        let mut rng = stream_rng(seed, 0, purpose::AUX);
        let mut g = PercoGrid::bernoulli(25, 25, p, &mut rng);
        let mut before = directed_path_search(&g).longest;
        let cells: Vec<(u64, i64)> = g.cells().collect();
        for k in 0..flips {
            let (i, y) = cells[(seed as usize).wrapping_add(k * 7919) % cells.len()];
            let dir = if k % 2 == 0 { Direction::Up } else { Direction::Down };
            g.set_open(i, y, dir, true);
            let after = directed_path_search(&g).longest;
            prop_assert!(after >= before);
            before = after;
        }
    }

    #[test]
    fn block_covariance_invariants(d in dim(), r in 2u64..5, c6 in 0.5f64..3.0, c7 in 0.5f64..3.0) {
        let n = r * r;
        let plan = CoarsePlan::new(d, n, 1, 0.5).unwrap().with_constants(Constants { c6, c7, ..Constants::default() });
        let cov = build_block_covariance(&plan).unwrap();
        prop_assert_eq!(cov.trace(), 0.0);
        prop_assert!(cov.hs_norm_sq() <= 1.0);
        prop_assert!(cov.max_eigenvalue() <= cov.row_sum_bound() * (1.0 + 1e-12));
    }

    #[test]
    fn pinning_partition_monotone_and_log_convex(d in dim(), n in 1u64..60, h in -1.0f64..1.0) {
        let e = 0.05;
        let f = |x: f64| pair_pinning_partition(n, x, d).unwrap().log_value;
        let (a, b, c) = (f(h - e), f(h), f(h + e));
        prop_assert!(a <= b + 1e-12 && b <= c + 1e-12);
        prop_assert!(a + c - 2.0 * b >= -1e-10);
    }

    #[test]
    fn variance_exponent_is_nonnegative(s in spec(), beta in 0.0f64..2.0) {
        prop_assert!(gamma(&s, beta).unwrap() >= -1e-15);
    }
}

#[test]
fn meeting_probabilities_decrease() {
    for d in [Dim::One, Dim::Two] {
        let u = meet_probabilities(d, 3000);
        assert_eq!(u[0], 1.0);
        assert!(u.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn worker_count_does_not_change_estimates() {
    let s = DisorderSpec::Gaussian;
    let base = RunConfig::new(11, 64);
    let a = estimate_free_energy(0.7, 50, Dim::One, &s, &base).unwrap();
    for w in [2, 3, 8] {
        let b = estimate_free_energy(0.7, 50, Dim::One, &s, &base.with_workers(w)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
