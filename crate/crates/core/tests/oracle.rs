//! Fast algorithms against brute-force enumeration.

use dirpoly::disorder::{log_mgf, DisorderSpec, Environment, HashedEnvironment};
use dirpoly::geometry::{confined_endpoint_prob, escape_probability, Dim};
use dirpoly::oracle::{
    brute_force_confined, brute_force_escape, brute_force_log_partition, brute_force_overlap_law,
    brute_force_pair_partition, for_each_path,
};
use dirpoly::renewal::exact_visit_distribution;
use dirpoly::transfer::{
    expected_overlap, pair_environment_log_partition, pair_pinning_partition, quenched_partition, restricted_partition,
    ConfinedSpec, Direction,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn quenched_partition_matches_enumeration() {
    let specs = [DisorderSpec::Gaussian, DisorderSpec::Rademacher];
    for (d, nmax) in [(Dim::One, 12), (Dim::Two, 6)] {
        for spec in &specs {
            for seed in 0..5u64 {
                let env = HashedEnvironment::new(spec, d, seed).unwrap();
                for n in 1..=nmax {
                    let beta = 0.3 + 0.2 * seed as f64;
                    let fast = quenched_partition(&env, beta, spec, n).unwrap();
                    let slow = brute_force_log_partition(&env, beta, spec, n).unwrap();
                    assert!(rel(fast.w(), slow.exp()) < 1e-12, "d={d:?} n={n}: {} vs {}", fast.log_w, slow);
                }
            }
        }
    }
}

#[test]
fn pair_pinning_matches_pair_enumeration() {
    for (d, nmax) in [(Dim::One, 8), (Dim::Two, 4)] {
        for n in 1..=nmax {
            for h in [-0.7, 0.0, 0.3, 1.1] {
                let fast = pair_pinning_partition(n as u64, h, d).unwrap().value();
                let slow = brute_force_pair_partition(n, h, d).unwrap();
                assert!(rel(fast, slow) < 1e-12, "d={d:?} n={n} h={h}: {fast} vs {slow}");
            }
        }
    }
}

#[test]
fn visit_law_matches_pair_enumeration() {
    for (d, nmax) in [(Dim::One, 8), (Dim::Two, 4)] {
        for n in 1..=nmax {
            let fast = exact_visit_distribution(d, n as u64).unwrap();
            let slow = brute_force_overlap_law(d, n).unwrap();
            for (k, (a, b)) in fast.iter().zip(&slow).enumerate() {
                assert!((a - b).abs() < 1e-14, "d={d:?} n={n} k={k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn escape_matches_enumeration() {
    for (d, nmax) in [(Dim::One, 14), (Dim::Two, 7)] {
        for n in 1..=nmax {
            for h in 0..=4 {
                let fast = escape_probability(n as u64, h, d);
                let slow = brute_force_escape(n, h, d).unwrap();
                assert!((fast - slow).abs() < 1e-14, "d={d:?} n={n} h={h}");
            }
        }
    }
}

#[test]
fn confined_partition_matches_enumeration() {
    let spec = DisorderSpec::Gaussian;
    let qw = confined_endpoint_prob(16).unwrap();
    for seed in 0..4u64 {
        let env = HashedEnvironment::new(&spec, Dim::One, seed).unwrap();
        for beta in [0.0, 0.4, 1.0] {
            let conf = ConfinedSpec::new(16, 0, 0, Direction::Up).unwrap();
            let fast = restricted_partition(&env, beta, &spec, &conf).unwrap();
            let slow = brute_force_confined(&env, beta, &spec, 4).unwrap();
            assert!(rel(fast, slow) < 1e-12, "{fast} vs {slow}");
            if beta == 0.0 {
                assert!(rel(fast, qw) < 1e-14);
            }
        }
    }
}

/// Pair partition in a fixed environment and polymer overlap, by
/// enumerating all pairs of paths.
fn brute_pair_quantities(env: &HashedEnvironment, spec: &DisorderSpec, b: f64, h: f64, n: usize) -> (f64, f64) {
    let lam = log_mgf(spec, b).unwrap();
    let mut paths = Vec::new();
    for_each_path(env.dim(), n, |p| paths.push(p.to_vec())).unwrap();
    let energy: Vec<f64> =
        paths.iter().map(|p| p.iter().enumerate().map(|(i, &x)| b * env.value(i as i64 + 1, x) - lam).sum()).collect();
    let (mut z2, mut z1, mut ov) = (0.0, 0.0, 0.0);
    for (a, pa) in paths.iter().zip(&energy) {
        z1 += pa.exp();
        for (c, pc) in paths.iter().zip(&energy) {
            let k = a.iter().zip(c).filter(|(x, y)| x == y).count() as f64;
            z2 += (pa + pc + h * k).exp();
            ov += (pa + pc).exp() * k;
        }
    }
    let total = paths.len() as f64;
    ((z2 / (total * total)).ln(), ov / (z1 * z1))
}

#[test]
fn pair_environment_and_overlap_match_enumeration() {
    let spec = DisorderSpec::Gaussian;
    for (d, n) in [(Dim::One, 7), (Dim::Two, 3)] {
        for seed in 0..3u64 {
            let env = HashedEnvironment::new(&spec, d, seed).unwrap();
            for (b, h) in [(0.5, 0.0), (0.8, 0.4), (1.2, -0.3)] {
                let fast = pair_environment_log_partition(&env, &spec, b, h, n).unwrap();
                let (slow, _) = brute_pair_quantities(&env, &spec, b, h, n);
                assert!((fast - slow).abs() < 1e-12 * slow.abs().max(1.0), "{fast} vs {slow}");
            }
            let fast = expected_overlap(&env, 0.9, &spec, n).unwrap();
            let (_, slow) = brute_pair_quantities(&env, &spec, 0.9, 0.0, n);
            assert!(rel(fast, slow) < 1e-12, "{fast} vs {slow}");
        }
    }
}
