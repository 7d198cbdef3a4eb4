//! Meeting times of two independent walks.
//!
//! The meeting set `tau = {i : S_i = S'_i}` is a renewal sequence. In d = 1
//! the difference `S - S'` is a lazy walk with steps `-2, 0, 2` of weights
//! `1/4, 1/2, 1/4`, so `P(S_k = S'_k) = C(2k, k) / 4^k`. In d = 2 the two
//! rotated coordinates `x + y`, `x - y` move independently and the meeting
//! probability is the square of the one-dimensional one.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CoarsePlan, Dim, Pos};
use crate::rng::{purpose, stream_rng};
use crate::stats::{summarize, Summary};
use crate::transfer::first_meeting_law;

/// Below this index the central binomial ratio is computed by the exact
/// product, above it by its asymptotic series (relative error < 1e-17).
const PRODUCT_LIMIT: u64 = 1024;

/// `C(2k, k) / 4^k`.
fn central(k: u64) -> f64 {
    if k <= PRODUCT_LIMIT {
        let mut c = 1.0;
        for j in 1..=k {
            c *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        c
    } else {
        central_series(k)
    }
}

/// `Gamma(k + 1/2) / (sqrt(pi) Gamma(k + 1))` by its large-k expansion.
fn central_series(k: u64) -> f64 {
    let t = 1.0 / k as f64;
    let poly = 1.0
        + t * (-1.0 / 8.0
            + t * (1.0 / 128.0
                + t * (5.0 / 1024.0 + t * (-21.0 / 32768.0 + t * (-399.0 / 262144.0 + t * (869.0 / 4194304.0))))));
    poly / (PI * k as f64).sqrt()
}

/// `P(S_k = S'_k)` for two independent simple random walks started together.
pub fn meet_probability(d: Dim, k: u64) -> f64 {
    let c = central(k);
    match d {
        Dim::One => c,
        Dim::Two => c * c,
    }
}

/// `u_0 ..= u_n` with `u_k = meet_probability(d, k)`.
pub fn meet_probabilities(d: Dim, n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut c = 1.0f64;
    out.push(1.0);
    for k in 1..=n {
        c = if k <= PRODUCT_LIMIT { c * (2 * k - 1) as f64 / (2 * k) as f64 } else { central_series(k) };
        out.push(match d {
            Dim::One => c,
            Dim::Two => c * c,
        });
    }
    out
}

/// Truncation control for series in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub max_terms: u64,
    /// Bound on the relative error of `sum_k e^{-xk} u_k`.
    pub rel_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { max_terms: 1 << 24, rel_tol: 1e-8 }
    }
}

/// `E exp(-x tau_1)` with the bookkeeping of its evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceValue {
    pub x: f64,
    pub value: f64,
    pub log_value: f64,
    /// `sum_{k >= 1} e^{-xk} u_k`.
    pub series: f64,
    pub terms: u64,
    /// Absolute error bound on `series`.
    pub series_error: f64,
}

fn finish(x: f64, series: f64, terms: u64, series_error: f64) -> LaplaceValue {
    // value = s / (1 + s)
    let log_value = -(1.0 / series).ln_1p();
    LaplaceValue { x, value: log_value.exp(), log_value, series, terms, series_error }
}

/// Laplace transform of the first meeting time, from
/// `1 - E exp(-x tau_1) = 1 / sum_{k >= 0} e^{-xk} u_k`.
///
/// In d = 1 the generating function `sum_k u_k z^k = (1 - z)^{-1/2}` gives
/// the series in closed form. In d = 2 the series is summed directly; the
/// remainder uses `1 / (pi (k + 1/2)) <= u_k <= 1 / (pi (k + 1/4))`, whose
/// leading part `sum z^k / k` is a logarithm, so tiny `x` stays cheap.
pub fn laplace_return(d: Dim, x: f64, trunc: Truncation) -> Result<LaplaceValue> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Laplace argument x = {x} must be positive and finite")));
    }
    match d {
        Dim::One => {
            let r = (-(-x).exp_m1()).sqrt();
            // (1 - z)^{-1/2} - 1 = z / (r (1 + r))
            let z = (-x).exp();
            let series = z / (r * (1.0 + r));
            Ok(finish(x, series, 0, 0.0))
        }
        Dim::Two => laplace_series(d, x, trunc),
    }
}

/// Direct summation of the series with an explicit remainder bound.
pub fn laplace_series(d: Dim, x: f64, trunc: Truncation) -> Result<LaplaceValue> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Laplace argument x = {x} must be positive and finite")));
    }
    let z = (-x).exp();
    let one_minus_z = -(-x).exp_m1();
    let log_tail = -one_minus_z.ln();
    let mut sum = 0.0f64;
    let mut harmonic = 0.0f64; // sum_{k <= K} z^k / k
    let mut zk = 1.0f64;
    let mut c = 1.0f64;
    let mut best = f64::INFINITY;
    let mut k = 0u64;
    while k < trunc.max_terms {
        k += 1;
        c = if k <= PRODUCT_LIMIT { c * (2 * k - 1) as f64 / (2 * k) as f64 } else { central_series(k) };
        let u = match d {
            Dim::One => c,
            Dim::Two => c * c,
        };
        zk *= z;
        sum += zk * u;
        harmonic += zk / k as f64;
        if !k.is_multiple_of(256) && k != trunc.max_terms {
            continue;
        }
        // u is decreasing, so the remainder is at most u_K z^{K+1} / (1 - z)
        let geometric = u * zk * z / one_minus_z;
        if geometric <= trunc.rel_tol * sum {
            return Ok(finish(x, sum + 0.5 * geometric, k, 0.5 * geometric));
        }
        if d == Dim::Two {
            let upper = ((log_tail - harmonic) / PI).max(0.0);
            let kf = k as f64;
            let width = (1.0 / (2.0 * kf)).min(zk * z / (2.0 * kf * kf * one_minus_z)) / PI;
            if 0.5 * width <= trunc.rel_tol * (sum + upper) {
                return Ok(finish(x, sum + upper - 0.5 * width, k, 0.5 * width));
            }
            best = best.min(0.5 * width / (sum + upper));
        } else {
            best = best.min(geometric / sum);
        }
    }
    Err(Error::Truncation { bound: best, tolerance: trunc.rel_tol })
}

/// The numerically determined constant `x_0` below which the Laplace
/// transform satisfies the inequality used in the visit-count bounds:
/// `log E e^{-x tau_1} <= -sqrt(x) / 2` in d = 1 and
/// `log E e^{-x tau_1} <= -3 / |log x|` in d = 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRegime {
    pub d: Dim,
    pub x0: f64,
    /// Largest grid point tried; `x0 == x_max` means no failure was seen.
    pub x_max: f64,
    pub grid_points: usize,
}

fn regime_threshold(d: Dim, x: f64) -> f64 {
    match d {
        Dim::One => -0.5 * x.sqrt(),
        Dim::Two => -3.0 / x.ln().abs(),
    }
}

/// Largest `x` on a log grid (16 points per decade) such that the
/// inequality holds at every grid point up to `x`. Cached per dimension.
pub fn laplace_regime(d: Dim) -> Result<LaplaceRegime> {
    static CACHE: [OnceLock<std::result::Result<LaplaceRegime, Error>>; 2] = [OnceLock::new(), OnceLock::new()];
    CACHE[d.as_usize() - 1].get_or_init(|| compute_regime(d)).clone()
}

fn compute_regime(d: Dim) -> Result<LaplaceRegime> {
    let (lo, hi) = match d {
        Dim::One => (-12.0f64, 0.0f64),
        Dim::Two => (-16.0, -0.5),
    };
    let steps = ((hi - lo) * 16.0).round() as usize;
    let mut x0 = None;
    let mut x_max = 0.0;
    for j in 0..=steps {
        let x = 10f64.powf(lo + (hi - lo) * j as f64 / steps as f64);
        x_max = x;
        let l = laplace_return(d, x, Truncation::default())?;
        if l.log_value <= regime_threshold(d, x) {
            x0 = Some(x);
        } else {
            break;
        }
    }
    match x0 {
        Some(x0) => Ok(LaplaceRegime { d, x0, x_max, grid_points: steps + 1 }),
        None => Err(Error::Regime(format!("Laplace inequality fails already at x = {:e}", 10f64.powf(lo)))),
    }
}

/// How [`visit_tail`] evaluates `P(|tau ∩ [1, n]| >= k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TailMode {
    /// The analytic Laplace bound; errors outside its validity regime.
    Bound,
    /// Monte Carlo over pairs of walks.
    Empirical { replicas: u64, seed: u64 },
    /// Exact, by convolution of the first meeting law (`n <= 2048`).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub value: f64,
    /// Zero for bounds and exact values.
    pub stderr: f64,
    pub mode: TailMode,
    /// For bounds: the validity condition that was checked.
    pub regime: Option<String>,
}

const EXACT_TAIL_MAX_N: u64 = 2048;

pub fn visit_tail(d: Dim, n: u64, k: u64, mode: TailMode) -> Result<TailEstimate> {
    if n == 0 {
        return Err(Error::Domain("horizon n must be at least 1".into()));
    }
    let trivial = if k == 0 {
        Some(1.0)
    } else if k > n {
        Some(0.0)
    } else {
        None
    };
    if let Some(value) = trivial {
        return Ok(TailEstimate { value, stderr: 0.0, mode, regime: None });
    }
    match mode {
        TailMode::Bound => tail_bound(d, n, k),
        TailMode::Exact => {
            let dist = exact_visit_distribution(d, n)?;
            Ok(TailEstimate { value: dist[k as usize..].iter().sum(), stderr: 0.0, mode, regime: None })
        }
        TailMode::Empirical { replicas, seed } => {
            let counts = sample_visit_counts(d, n, replicas, seed);
            let hits: Vec<f64> = counts.iter().map(|&c| if c >= k { 1.0 } else { 0.0 }).collect();
            let s = summarize(&hits);
            Ok(TailEstimate { value: s.mean, stderr: s.stderr, mode, regime: None })
        }
    }
}

fn tail_bound(d: Dim, n: u64, k: u64) -> Result<TailEstimate> {
    let reg = laplace_regime(d)?;
    let (nf, kf) = (n as f64, k as f64);
    match d {
        Dim::One => {
            let k0 = (4.0 * nf * reg.x0.sqrt()).floor() as u64;
            if k > k0 {
                return Err(Error::Regime(format!(
                    "d = 1 tail bound needs k <= k0 = floor(4 n sqrt(x0)) = {k0} (x0 = {:e}), got k = {k}",
                    reg.x0
                )));
            }
            Ok(TailEstimate {
                value: (-kf * kf / (32.0 * nf)).exp(),
                stderr: 0.0,
                mode: TailMode::Bound,
                regime: Some(format!("k <= k0 = {k0}, x0 = {:e}", reg.x0)),
            })
        }
        Dim::Two => {
            if k >= n {
                return Err(Error::Regime(format!("d = 2 tail bound needs k < n, got k = {k}, n = {n}")));
            }
            let l = (nf / kf).ln();
            let x = kf / (nf * l);
            if x > reg.x0 {
                return Err(Error::Regime(format!(
                    "d = 2 tail bound needs k / (n log(n/k)) = {x:e} <= x0 = {:e}",
                    reg.x0
                )));
            }
            Ok(TailEstimate {
                value: (-kf / l).exp(),
                stderr: 0.0,
                mode: TailMode::Bound,
                regime: Some(format!("k / (n log(n/k)) = {x:e} <= x0 = {:e}", reg.x0)),
            })
        }
    }
}

/// Exact law of `|tau ∩ [1, n]|`: entry `j` is the probability of exactly
/// `j` meetings, computed from `P(count >= j) = P(tau_j <= n)`.
pub fn exact_visit_distribution(d: Dim, n: u64) -> Result<Vec<f64>> {
    if n > EXACT_TAIL_MAX_N {
        return Err(Error::Unsupported(format!("exact visit law limited to n <= {EXACT_TAIL_MAX_N}")));
    }
    let nn = n as usize;
    let f = first_meeting_law(d, n);
    // g[m] = P(tau_j = m), starting from tau_0 = 0
    let mut g = vec![0.0f64; nn + 1];
    g[0] = 1.0;
    let mut at_least = vec![0.0f64; nn + 2];
    at_least[0] = 1.0;
    for (j, tail) in at_least.iter_mut().enumerate().take(nn + 1).skip(1) {
        let mut next = vec![0.0f64; nn + 1];
        for (m, slot) in next.iter_mut().enumerate().skip(j) {
            *slot = g.iter().enumerate().take(m).skip(j - 1).map(|(i, &gi)| gi * f[m - i]).sum();
        }
        g = next;
        *tail = g.iter().sum();
        if *tail == 0.0 {
            break;
        }
    }
    Ok((0..=nn).map(|j| (at_least[j] - at_least[j + 1]).max(0.0)).collect())
}

/// One step of the difference walk from two random bits per coordinate.
#[inline]
fn lazy(bits: u64) -> i64 {
    (bits & 1) as i64 - ((bits >> 1) & 1) as i64
}

/// Number of meetings in `[1, n]` of one pair of walks.
fn meeting_count<R: RngCore>(d: Dim, n: u64, rng: &mut R) -> u64 {
    let mut count = 0;
    let (mut a, mut b) = (0i64, 0i64);
    let mut word = 0u64;
    let mut left = 0u32;
    for _ in 0..n {
        if left == 0 {
            word = rng.next_u64();
            left = 16;
        }
        a += lazy(word);
        b += lazy(word >> 2);
        word >>= 4;
        left -= 1;
        if a == 0 && (d == Dim::One || b == 0) {
            count += 1;
        }
    }
    count
}

/// Meeting counts of `replicas` independent pairs; replica `r` uses its
/// own stream, so the output does not depend on the thread count.
pub fn sample_visit_counts(d: Dim, n: u64, replicas: u64, seed: u64) -> Vec<u64> {
    (0..replicas).into_par_iter().map(|r| meeting_count(d, n, &mut stream_rng(seed, r, purpose::WALK))).collect()
}

/// Monte Carlo estimate of `u_1 ..= u_n`, one summary per time.
pub fn empirical_meet_probabilities(d: Dim, n: u64, replicas: u64, seed: u64) -> Vec<Summary> {
    let hits: Vec<Vec<bool>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r, purpose::WALK);
            let (mut a, mut b) = (0i64, 0i64);
            (0..n)
                .map(|_| {
                    let w = rng.next_u32() as u64;
                    a += lazy(w);
                    b += lazy(w >> 2);
                    a == 0 && (d == Dim::One || b == 0)
                })
                .collect()
        })
        .collect();
    (0..n as usize)
        .map(|k| {
            let col: Vec<f64> = hits.iter().map(|h| if h[k] { 1.0 } else { 0.0 }).collect();
            summarize(&col)
        })
        .collect()
}

/// First meeting times sampled up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstMeetingSample {
    pub d: Dim,
    pub horizon: u64,
    /// `None` when the walks had not met by the horizon.
    pub times: Vec<Option<u64>>,
}

impl FirstMeetingSample {
    pub fn draw(d: Dim, horizon: u64, replicas: u64, seed: u64) -> Self {
        let times = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(seed, r, purpose::WALK);
                let (mut a, mut b) = (0i64, 0i64);
                for t in 1..=horizon {
                    let w = rng.next_u32() as u64;
                    a += lazy(w);
                    b += lazy(w >> 2);
                    if a == 0 && (d == Dim::One || b == 0) {
                        return Some(t);
                    }
                }
                None
            })
            .collect();
        Self { d, horizon, times }
    }

    /// Fraction of replicas that had not met by the horizon.
    pub fn defect(&self) -> f64 {
        self.times.iter().filter(|t| t.is_none()).count() as f64 / self.times.len() as f64
    }

    /// Estimate of `E exp(-x tau_1)` over the met replicas. The unmet ones
    /// contribute at most `defect * exp(-x horizon)`, returned separately.
    pub fn laplace(&self, x: f64) -> (Summary, f64) {
        let vals: Vec<f64> = self.times.iter().map(|t| t.map_or(0.0, |t| (-x * t as f64).exp())).collect();
        (summarize(&vals), self.defect() * (-x * self.horizon as f64).exp())
    }
}

/// Return probabilities together with the law of the number of meetings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeetingStats {
    pub d: Dim,
    pub n: u64,
    /// `p_k` for `k = 0 ..= n`.
    pub meet: Vec<f64>,
    /// Probability of exactly `j` meetings in `[1, n]`, `j = 0 ..= n`.
    pub visits: Vec<f64>,
    pub exact: bool,
    /// Zero for the exact law.
    pub replicas: u64,
}

impl MeetingStats {
    pub fn exact(d: Dim, n: u64) -> Result<Self> {
        Ok(Self {
            d,
            n,
            meet: meet_probabilities(d, n),
            visits: exact_visit_distribution(d, n)?,
            exact: true,
            replicas: 0,
        })
    }

    pub fn empirical(d: Dim, n: u64, replicas: u64, seed: u64) -> Result<Self> {
        if replicas == 0 {
            return Err(Error::Domain("at least one replica is needed".into()));
        }
        let mut visits = vec![0.0; n as usize + 1];
        for c in sample_visit_counts(d, n, replicas, seed) {
            visits[c as usize] += 1.0 / replicas as f64;
        }
        Ok(Self { d, n, meet: meet_probabilities(d, n), visits, exact: false, replicas })
    }

    /// `P(|tau ∩ [1, n]| >= k)`.
    pub fn tail(&self, k: u64) -> f64 {
        self.visits.iter().skip(k as usize).sum()
    }
}

/// A simple random walk `S_1 ..= S_n` started at the origin.
pub fn sample_walk<R: Rng + ?Sized>(d: Dim, n: usize, rng: &mut R) -> Vec<Pos> {
    let mut p = [0i64, 0];
    (0..n)
        .map(|_| {
            match d {
                Dim::One => p[0] += if rng.random::<bool>() { 1 } else { -1 },
                Dim::Two => match rng.random_range(0..4u8) {
                    0 => p[0] += 1,
                    1 => p[0] -= 1,
                    2 => p[1] += 1,
                    _ => p[1] -= 1,
                },
            }
            p
        })
        .collect()
}

/// The pair statistic `X` of a path and its maximum `D(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub x: f64,
    pub d_n: f64,
}

/// `D(n) = sum_{i != j} 1 / (n sqrt(log n) |j - i|)`.
pub fn d_of_n(n: u64) -> f64 {
    let nf = n as f64;
    let s: f64 = (1..n).map(|m| (n - m) as f64 / m as f64).sum();
    2.0 * s / (nf * nf.ln().sqrt())
}

/// `X = sum_{i != j} 1{|S_i - S_j| <= C7 sqrt|i - j|} / (n sqrt(log n) |j - i|)`
/// over the path `S_1 ..= S_n`, with the sup norm in d = 2.
pub fn overlap_statistics(walk: &[Pos], n: u64, plan: &CoarsePlan) -> Result<OverlapStats> {
    if n < 2 {
        return Err(Error::Domain("overlap statistics need n >= 2".into()));
    }
    if walk.len() as u64 != n {
        return Err(Error::Domain(format!("path has {} sites, expected {n}", walk.len())));
    }
    let c7 = plan.constants.c7;
    let nn = n as usize;
    let radii: Vec<i64> = (0..nn).map(|k| (c7 * (k as f64).sqrt() + 1e-12).floor() as i64).collect();
    let mut s = 0.0;
    for i in 0..nn {
        for j in i + 1..nn {
            let dist = match plan.d {
                Dim::One => (walk[i][0] - walk[j][0]).abs(),
                Dim::Two => (walk[i][0] - walk[j][0]).abs().max((walk[i][1] - walk[j][1]).abs()),
            };
            if dist <= radii[j - i] {
                s += 1.0 / (j - i) as f64;
            }
        }
    }
    let nf = n as f64;
    Ok(OverlapStats { x: 2.0 * s / (nf * nf.ln().sqrt()), d_n: d_of_n(n) })
}
