//! Exact quenched computations by transfer matrices.
//!
//! In d = 1 the slice at time `i` holds the `i + 1` reachable sites
//! `z = -i + 2j`. In d = 2 the walk is written in the rotated coordinates
//! `u = x + y`, `v = x - y`, which perform independent one-dimensional
//! walks, so the reachable l1 diamond at time `i` is an `(i+1) x (i+1)`
//! grid and each site receives mass from four parents.

mod confined;
mod pair;

pub use confined::{conditioned_pair_moment, restricted_partition, ConfinedSpec, Direction, PairConditioning};
pub use pair::{
    first_meeting_law, pair_environment_log_partition, pair_pinning_dp, pair_pinning_partition, pair_pinning_renewal,
    PairDPResult, PairRoute,
};

use serde::{Deserialize, Serialize};

use crate::disorder::{log_mgf, DisorderSpec, Environment, Window};
use crate::error::{Error, Result};
use crate::geometry::{Dim, Pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferOptions {
    /// Number of slices between two renormalizations.
    pub renorm_every: usize,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self { renorm_every: 1 }
    }
}

/// Number of sites in the slice at time `i`.
#[inline]
pub(crate) fn slice_len(d: Dim, i: usize) -> usize {
    match d {
        Dim::One => i + 1,
        Dim::Two => (i + 1) * (i + 1),
    }
}

/// Position of slice index `k` at time `i`.
#[inline]
pub(crate) fn slice_pos(d: Dim, i: usize, k: usize) -> Pos {
    let i = i as i64;
    match d {
        Dim::One => [-i + 2 * k as i64, 0],
        Dim::Two => {
            let w = i + 1;
            let (a, b) = (k as i64 / w, k as i64 % w);
            let (u, v) = (-i + 2 * a, -i + 2 * b);
            [(u + v) / 2, (u - v) / 2]
        }
    }
}

/// Slice index of `p` at time `i`, if reachable.
pub(crate) fn slice_index(d: Dim, i: usize, p: Pos) -> Option<usize> {
    let ii = i as i64;
    match d {
        Dim::One => {
            let j = p[0] + ii;
            (p[1] == 0 && j >= 0 && j <= 2 * ii && j % 2 == 0).then_some((j / 2) as usize)
        }
        Dim::Two => {
            let (a, b) = (p[0] + p[1] + ii, p[0] - p[1] + ii);
            (a >= 0 && b >= 0 && a <= 2 * ii && b <= 2 * ii && a % 2 == 0)
                .then(|| (a / 2) as usize * (i + 1) + (b / 2) as usize)
        }
    }
}

/// Forward step: `next[k] = mean over parents of prev`, without site weights.
pub(crate) fn spread(d: Dim, i: usize, prev: &[f64], next: &mut Vec<f64>) {
    next.clear();
    match d {
        Dim::One => {
            next.reserve(i + 1);
            for j in 0..=i {
                let l = if j > 0 { prev[j - 1] } else { 0.0 };
                let r = if j < i { prev[j] } else { 0.0 };
                next.push(0.5 * (l + r));
            }
        }
        Dim::Two => {
            let w = i; // width of prev
            next.reserve((i + 1) * (i + 1));
            for a in 0..=i {
                for b in 0..=i {
                    let mut s = 0.0;
                    if a > 0 {
                        if b > 0 {
                            s += prev[(a - 1) * w + b - 1];
                        }
                        if b < i {
                            s += prev[(a - 1) * w + b];
                        }
                    }
                    if a < i {
                        if b > 0 {
                            s += prev[a * w + b - 1];
                        }
                        if b < i {
                            s += prev[a * w + b];
                        }
                    }
                    next.push(0.25 * s);
                }
            }
        }
    }
}

/// Backward step: for the slice at time `i - 1`, the mean over children at
/// time `i` of `cur`.
pub(crate) fn gather(d: Dim, i: usize, cur: &[f64], out: &mut Vec<f64>) {
    out.clear();
    match d {
        Dim::One => {
            for j in 0..i {
                out.push(0.5 * (cur[j] + cur[j + 1]));
            }
        }
        Dim::Two => {
            let w = i + 1;
            for a in 0..i {
                for b in 0..i {
                    out.push(
                        0.25 * (cur[a * w + b] + cur[a * w + b + 1] + cur[(a + 1) * w + b] + cur[(a + 1) * w + b + 1]),
                    );
                }
            }
        }
    }
}

pub(crate) fn check_cover<E: Environment + ?Sized>(omega: &E, n: usize) -> Result<()> {
    let d = omega.dim();
    for i in 1..=n as i64 {
        let w = Window {
            d,
            t_lo: i,
            t_hi: i,
            lo: [-i, if d == Dim::Two { -i } else { 0 }],
            hi: [i, if d == Dim::Two { i } else { 0 }],
        };
        if !omega.covers(&w) {
            return Err(Error::WindowTooSmall(format!(
                "the environment does not cover the reachable sites at time {i}"
            )));
        }
    }
    Ok(())
}

/// Site weights `exp(beta omega - lambda)` of the slice at time `i`.
pub(crate) fn slice_weights<E: Environment + ?Sized>(omega: &E, beta: f64, lam: f64, i: usize, out: &mut Vec<f64>) {
    let d = omega.dim();
    out.clear();
    if beta == 0.0 {
        out.resize(slice_len(d, i), 1.0);
        return;
    }
    out.extend((0..slice_len(d, i)).map(|k| {
        let p = slice_pos(d, i, k);
        (beta * omega.value(i as i64, p) - lam).exp()
    }));
}

/// Output of one transfer-matrix pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchedResult {
    pub log_w: f64,
    /// `W_N(x) = exp(log_scale) * endpoint[k]` for slice index `k`.
    pub log_scale: f64,
    pub endpoint: Vec<f64>,
    pub n: usize,
    pub beta: f64,
    pub d: Dim,
}

impl QuenchedResult {
    pub fn w(&self) -> f64 {
        self.log_w.exp()
    }

    /// `(x, log W_N(x))` over reachable endpoints.
    pub fn endpoint_log(&self) -> impl Iterator<Item = (Pos, f64)> + '_ {
        self.endpoint.iter().enumerate().map(move |(k, &v)| (slice_pos(self.d, self.n, k), self.log_scale + v.ln()))
    }

    pub fn endpoint_weight(&self, x: Pos) -> f64 {
        slice_index(self.d, self.n, x).map(|k| (self.log_scale + self.endpoint[k].ln()).exp()).unwrap_or(0.0)
    }

    /// `log sum_x W_N(x)^theta`.
    pub fn log_endpoint_power_sum(&self, theta: f64) -> f64 {
        let m = self.endpoint.iter().fold(0.0f64, |a, &b| a.max(b));
        if m == 0.0 {
            return f64::NEG_INFINITY;
        }
        let s: f64 = self.endpoint.iter().map(|&v| (v / m).powf(theta)).sum();
        theta * (self.log_scale + m.ln()) + s.ln()
    }
}

/// `W_N = P exp(sum_{i=1}^N [beta omega_{i,S_i} - lambda(beta)])` with its
/// endpoint decomposition.
pub fn quenched_partition<E: Environment + ?Sized>(
    omega: &E,
    beta: f64,
    spec: &DisorderSpec,
    n: usize,
) -> Result<QuenchedResult> {
    quenched_partition_with(omega, beta, spec, n, TransferOptions::default())
}

pub fn quenched_partition_with<E: Environment + ?Sized>(
    omega: &E,
    beta: f64,
    spec: &DisorderSpec,
    n: usize,
    opts: TransferOptions,
) -> Result<QuenchedResult> {
    let d = omega.dim();
    let lam = log_mgf(spec, beta)?;
    if beta != 0.0 {
        check_cover(omega, n)?;
    }
    let every = opts.renorm_every.max(1);
    let mut cur = vec![1.0];
    let mut next = Vec::new();
    let mut wts = Vec::new();
    let mut log_scale = 0.0;
    for i in 1..=n {
        spread(d, i, &cur, &mut next);
        if beta != 0.0 {
            slice_weights(omega, beta, lam, i, &mut wts);
            for (v, w) in next.iter_mut().zip(&wts) {
                *v *= w;
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if beta != 0.0 && (i % every == 0 || i == n) {
            let m = cur.iter().fold(0.0f64, |a, &b| a.max(b));
            if m > 0.0 && m.is_finite() {
                for v in cur.iter_mut() {
                    *v /= m;
                }
                log_scale += m.ln();
            }
        }
    }
    let log_w = if beta == 0.0 { 0.0 } else { log_scale + cur.iter().sum::<f64>().ln() };
    Ok(QuenchedResult { log_w, log_scale, endpoint: cur, n, beta, d })
}

/// Only `log W_N`, the hot path of the Monte Carlo estimators.
pub fn log_partition<E: Environment + ?Sized>(omega: &E, beta: f64, spec: &DisorderSpec, n: usize) -> Result<f64> {
    quenched_partition(omega, beta, spec, n).map(|r| r.log_w)
}

/// Time-slice marginals of the polymer measure `mu_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub d: Dim,
    pub n: usize,
    /// `slices[i - 1][k]` is `mu_N(S_i = slice_pos(i, k))`.
    pub slices: Vec<Vec<f64>>,
    pub log_w: f64,
}

impl Marginals {
    pub fn get(&self, i: usize, p: Pos) -> f64 {
        slice_index(self.d, i, p).map(|k| self.slices[i - 1][k]).unwrap_or(0.0)
    }

    pub fn iter(&self, i: usize) -> impl Iterator<Item = (Pos, f64)> + '_ {
        self.slices[i - 1].iter().enumerate().map(move |(k, &v)| (slice_pos(self.d, i, k), v))
    }

    /// `sum_i sum_z mu(S_i = z)^2`, the mean overlap of two replicas.
    pub fn overlap(&self) -> f64 {
        self.slices.iter().map(|s| s.iter().map(|v| v * v).sum::<f64>()).sum()
    }
}

/// Forward-backward computation of every slice marginal. Each site weight
/// enters the forward factor only.
pub fn polymer_marginals<E: Environment + ?Sized>(
    omega: &E,
    beta: f64,
    spec: &DisorderSpec,
    n: usize,
) -> Result<Marginals> {
    let d = omega.dim();
    let lam = log_mgf(spec, beta)?;
    if beta != 0.0 {
        check_cover(omega, n)?;
    }
    let mut fwd: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut fscale = Vec::with_capacity(n);
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut cur = vec![1.0];
    let mut ls = 0.0;
    for i in 1..=n {
        let mut next = Vec::new();
        spread(d, i, &cur, &mut next);
        let mut w = Vec::new();
        slice_weights(omega, beta, lam, i, &mut w);
        for (v, x) in next.iter_mut().zip(&w) {
            *v *= x;
        }
        let m = next.iter().fold(0.0f64, |a, &b| a.max(b));
        for v in next.iter_mut() {
            *v /= m;
        }
        ls += m.ln();
        fscale.push(ls);
        fwd.push(next.clone());
        weights.push(w);
        cur = next;
    }
    let log_w = ls + cur.iter().sum::<f64>().ln();
    // backward factors B_i(z) = E[prod_{k > i} weights | S_i = z]
    let mut slices = vec![Vec::new(); n];
    let mut b = vec![1.0; slice_len(d, n)];
    let mut bscale = 0.0;
    let mut tmp = Vec::new();
    for i in (1..=n).rev() {
        let f = &fwd[i - 1];
        let c = fscale[i - 1] + bscale - log_w;
        slices[i - 1] = f.iter().zip(&b).map(|(x, y)| (c + (x * y).ln()).exp()).collect();
        if i > 1 {
            let wb: Vec<f64> = b.iter().zip(&weights[i - 1]).map(|(x, y)| x * y).collect();
            gather(d, i, &wb, &mut tmp);
            let m = tmp.iter().fold(0.0f64, |a, &v| a.max(v));
            for v in tmp.iter_mut() {
                *v /= m;
            }
            bscale += m.ln();
            std::mem::swap(&mut b, &mut tmp);
        }
    }
    Ok(Marginals { d, n, slices, log_w: if beta == 0.0 { 0.0 } else { log_w } })
}

/// `mu_N^{(2)}[sum_{i=1}^N 1{S_i^(1) = S_i^(2)}]`.
pub fn expected_overlap<E: Environment + ?Sized>(omega: &E, beta: f64, spec: &DisorderSpec, n: usize) -> Result<f64> {
    polymer_marginals(omega, beta, spec, n).map(|m| m.overlap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_environment, HashedEnvironment};

    #[test]
    fn slice_indexing_round_trips() {
        for d in [Dim::One, Dim::Two] {
            for i in 0..6 {
                for k in 0..slice_len(d, i) {
                    let p = slice_pos(d, i, k);
                    assert_eq!(slice_index(d, i, p), Some(k));
                    let l1 = p[0].abs() + p[1].abs();
                    assert!(l1 <= i as i64 && (l1 - i as i64) % 2 == 0);
                }
            }
        }
    }

    #[test]
    fn beta_zero_gives_walk_law() {
        let env = HashedEnvironment::new(&DisorderSpec::Gaussian, Dim::One, 1).unwrap();
        let r = quenched_partition(&env, 0.0, &DisorderSpec::Gaussian, 10).unwrap();
        assert_eq!(r.log_w, 0.0);
        for x in -10..=10 {
            let p = crate::geometry::srw_point_probability(10, x);
            assert!((r.endpoint_weight([x, 0]) - p).abs() < 1e-13 * p.max(1e-300));
        }
    }

    #[test]
    fn endpoint_sum_matches_total() {
        for d in [Dim::One, Dim::Two] {
            let env = HashedEnvironment::new(&DisorderSpec::Gaussian, d, 3).unwrap();
            let r = quenched_partition(&env, 1.2, &DisorderSpec::Gaussian, 40).unwrap();
            let s: f64 = r.endpoint_log().map(|(_, l)| (l - r.log_w).exp()).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn renormalization_interval_is_immaterial() {
        let env = HashedEnvironment::new(&DisorderSpec::Gaussian, Dim::One, 11).unwrap();
        let a = quenched_partition_with(&env, 1.0, &DisorderSpec::Gaussian, 500, TransferOptions { renorm_every: 1 })
            .unwrap();
        let b = quenched_partition_with(&env, 1.0, &DisorderSpec::Gaussian, 500, TransferOptions { renorm_every: 2 })
            .unwrap();
        assert!((a.log_w - b.log_w).abs() < 1e-10);
    }

    #[test]
    fn small_window_is_an_error() {
        let w = Window::new(Dim::One, 1, 5, [-3, 0], [3, 0]).unwrap();
        let f = sample_environment(&DisorderSpec::Gaussian, &w, 1).unwrap();
        assert!(matches!(quenched_partition(&f, 0.5, &DisorderSpec::Gaussian, 5), Err(Error::WindowTooSmall(_))));
        assert!(quenched_partition(&f, 0.5, &DisorderSpec::Gaussian, 3).is_ok());
    }

    #[test]
    fn one_step_marginals() {
        let w = Window::new(Dim::One, 1, 1, [-1, 0], [1, 0]).unwrap();
        let f = sample_environment(&DisorderSpec::Gaussian, &w, 8).unwrap();
        let beta = 0.7;
        let m = polymer_marginals(&f, beta, &DisorderSpec::Gaussian, 1).unwrap();
        let a = (beta * f.get(1, [1, 0]).unwrap()).exp();
        let b = (beta * f.get(1, [-1, 0]).unwrap()).exp();
        assert!((m.get(1, [1, 0]) - a / (a + b)).abs() < 1e-14);
        assert!((m.get(1, [-1, 0]) - b / (a + b)).abs() < 1e-14);
    }

    #[test]
    fn marginals_are_normalized() {
        for d in [Dim::One, Dim::Two] {
            let env = HashedEnvironment::new(&DisorderSpec::Rademacher, d, 5).unwrap();
            let m = polymer_marginals(&env, 1.5, &DisorderSpec::Rademacher, 30).unwrap();
            for i in 1..=30 {
                let s: f64 = m.iter(i).map(|(_, v)| v).sum();
                assert!((s - 1.0).abs() < 1e-10, "{d:?} {i} {s}");
            }
            let ov = m.overlap();
            assert!((0.0..=30.0).contains(&ov));
        }
    }

    #[test]
    fn overlap_at_zero_beta_is_annealed() {
        let env = HashedEnvironment::new(&DisorderSpec::Gaussian, Dim::One, 5).unwrap();
        let ov = expected_overlap(&env, 0.0, &DisorderSpec::Gaussian, 1).unwrap();
        assert!((ov - 0.5).abs() < 1e-15);
        let ov = expected_overlap(&env, 0.0, &DisorderSpec::Gaussian, 12).unwrap();
        let exact: f64 = (1..=12).map(|k| crate::renewal::meet_probability(Dim::One, k)).sum();
        assert!((ov - exact).abs() < 1e-12);
    }
}
