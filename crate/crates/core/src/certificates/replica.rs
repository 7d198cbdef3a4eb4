use serde::{Deserialize, Serialize};

use super::{AuditReport, Check};
use crate::disorder::{DisorderSpec, HashedEnvironment};
use crate::error::{Error, Result};
use crate::estimators::{replica_map, RunConfig};
use crate::geometry::Dim;
use crate::renewal::{laplace_return, meet_probabilities, Truncation};
use crate::stats::{batch_means, linear_fit, Summary};
use crate::transfer::{expected_overlap, log_partition, pair_environment_log_partition, pair_pinning_partition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOptions {
    /// Finite-difference step in `t`.
    pub eps: f64,
    /// Pinning strengths `lambda` for the interpolation inequality.
    pub lambdas: Vec<f64>,
    /// Number of standard errors allowed on Monte Carlo checks.
    pub level: f64,
}

impl Default for ReplicaOptions {
    fn default() -> Self {
        Self { eps: 0.02, lambdas: vec![0.0, 1.0], level: 3.0 }
    }
}

fn se(s: &Summary) -> f64 {
    if s.stderr.is_nan() {
        0.0
    } else {
        s.stderr
    }
}

struct ReplicaSample {
    log_w_zero: f64,
    log_w_t: f64,
    pair_t: f64,
    fd: f64,
    overlap: f64,
    psi: Vec<f64>,
    p_n: f64,
}

/// Checks of the two-replica interpolation at `t` with
/// `Phi_N(t) = (1/N) E log W_N(sqrt(t) beta)` and
/// `Psi_N(t, lambda) = (1/2N) E log P⊗2 exp(sum sqrt(t) beta (omega + omega') - 2 lambda + lambda beta^2 overlap)`:
/// (i) exact identities at `t = 0` and `lambda = 0`, (ii) the derivative
/// of `Phi_N` against minus `beta^2 / 2N` times the mean overlap, (iii)
/// `Psi_N(t, lambda) <= Psi_N(0, lambda + t)`, and (iv) the lower bound on
/// `p_N(beta)` from the pinning partition function at `2 beta^2`.
/// Gaussian disorder only.
pub fn replica_coupling_check(
    beta: f64,
    n: usize,
    t: f64,
    d: Dim,
    spec: &DisorderSpec,
    cfg: &RunConfig,
    opts: &ReplicaOptions,
) -> Result<AuditReport> {
    if *spec != DisorderSpec::Gaussian {
        return Err(Error::Unsupported("the replica coupling relies on Gaussian integration by parts".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} must lie in [0, 1]")));
    }
    if !(opts.eps > 0.0) || n == 0 {
        return Err(Error::Domain("need eps > 0 and N >= 1".into()));
    }
    let nf = n as f64;
    let b = t.sqrt() * beta;
    let centered = t >= opts.eps && t + opts.eps <= 1.0;
    let (t_lo, t_hi) = if centered { (t - opts.eps, t + opts.eps) } else { (t, t + opts.eps) };
    let samples = replica_map(cfg, |r| {
        let env = HashedEnvironment::new(spec, d, cfg.environment_seed(r))?;
        let lw = |tt: f64| log_partition(&env, tt.sqrt() * beta, spec, n);
        let log_w_t = lw(t)?;
        let fd = (lw(t_hi)? - lw(t_lo)?) / (nf * (t_hi - t_lo));
        let psi = opts
            .lambdas
            .iter()
            .map(|&l| pair_environment_log_partition(&env, spec, b, l * beta * beta, n).map(|v| v / (2.0 * nf)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ReplicaSample {
            log_w_zero: lw(0.0)?,
            log_w_t,
            pair_t: pair_environment_log_partition(&env, spec, b, 0.0, n)?,
            fd,
            overlap: expected_overlap(&env, b, spec, n)?,
            psi,
            p_n: lw(1.0)? / nf,
        })
    })?;
    let level = opts.level;
    let mut rep = AuditReport::new("replica_coupling");
    rep.note(format!("beta = {beta}, N = {n}, t = {t}, eps = {}, centered = {centered}", opts.eps));

    // (i)
    let zero = samples.iter().map(|s| s.log_w_zero.abs()).fold(0.0, f64::max);
    rep.push(Check::equal("phi_at_zero", zero, 0.0, 0.0));
    let gap = samples.iter().map(|s| (s.pair_t / 2.0 - s.log_w_t).abs() / s.log_w_t.abs().max(1.0)).fold(0.0, f64::max);
    rep.push(Check::equal("psi_lambda_zero_is_phi", gap, 0.0, 1e-10));

    // (ii)
    let c = beta * beta / (2.0 * nf);
    let fd: Vec<f64> = samples.iter().map(|s| s.fd).collect();
    let fd_s = batch_means(&fd);
    let (rhs, joint_se) = if centered {
        let ov: Vec<f64> = samples.iter().map(|s| -c * s.overlap).collect();
        let diff: Vec<f64> = fd.iter().zip(&ov).map(|(a, b)| a - b).collect();
        (batch_means(&ov).mean, se(&batch_means(&diff)))
    } else if t == 0.0 {
        // the overlap at t = 0 is the annealed sum of meeting probabilities
        let annealed: f64 = meet_probabilities(d, n as u64)[1..].iter().sum();
        (-c * annealed, se(&fd_s))
    } else {
        let ov: Vec<f64> = samples.iter().map(|s| -c * s.overlap).collect();
        let diff: Vec<f64> = fd.iter().zip(&ov).map(|(a, b)| a - b).collect();
        (batch_means(&ov).mean, se(&batch_means(&diff)))
    };
    rep.push(Check::equal("phi_derivative", fd_s.mean, rhs, level * joint_se));

    // (iii)
    for (j, &l) in opts.lambdas.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|s| s.psi[j]).collect();
        let s = batch_means(&xs);
        let bound = pair_pinning_partition(n as u64, (l + t) * beta * beta, d)?.log_value / (2.0 * nf);
        rep.push(Check::at_most(format!("psi_interpolation_lambda_{l}"), s.mean, bound, level * se(&s)));
    }

    // (iv) exactly as displayed: the factor 1 - e is negative
    let p: Vec<f64> = samples.iter().map(|s| s.p_n).collect();
    let ps = batch_means(&p);
    let y = pair_pinning_partition(n as u64, 2.0 * beta * beta, d)?.log_value;
    let lower = (1.0 - std::f64::consts::E) * y / (2.0 * nf);
    rep.push(Check::at_most("free_energy_lower_bound", lower, ps.mean, level * se(&ps)));
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinningEstimate {
    pub h: f64,
    /// Extrapolated free energy: intercept of `F_N` against `1/N`.
    pub f: f64,
    /// `(N, F_N)` with `F_N = (1/N) log P⊗2 exp(h overlap)`.
    pub per_n: Vec<(u64, f64)>,
    /// Slope of the fit in `1/N`.
    pub slope: f64,
}

/// Free energy of the homogeneous pinning model for two walks, extrapolated
/// linearly in `1/N` over `schedule`.
pub fn pinning_free_energy(h: f64, schedule: &[u64], d: Dim) -> Result<PinningEstimate> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("h = {h} must be >= 0")));
    }
    if schedule.is_empty() || schedule.contains(&0) {
        return Err(Error::Domain("schedule needs positive sizes".into()));
    }
    let per_n = schedule
        .iter()
        .map(|&n| Ok((n, pair_pinning_partition(n, h, d)?.log_value / n as f64)))
        .collect::<Result<Vec<_>>>()?;
    if h == 0.0 {
        return Ok(PinningEstimate { h, f: 0.0, per_n, slope: 0.0 });
    }
    if per_n.len() == 1 {
        return Ok(PinningEstimate { h, f: per_n[0].1, per_n, slope: 0.0 });
    }
    let x: Vec<f64> = per_n.iter().map(|&(n, _)| 1.0 / n as f64).collect();
    let y: Vec<f64> = per_n.iter().map(|&(_, f)| f).collect();
    let (slope, f) = linear_fit(&x, &y);
    Ok(PinningEstimate { h, f, per_n, slope })
}

/// The infinite-volume pinning free energy: the root `F` of
/// `E exp(-F tau_1) = exp(-h)`, by bisection in `log F`.
pub fn pinning_free_energy_limit(h: f64, d: Dim) -> Result<f64> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("h = {h} must be >= 0")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let log_l = |x: f64| laplace_return(d, x, Truncation::default()).map(|v| v.log_value);
    let (mut lo, mut hi) = (-60.0f64, 1.0f64);
    while log_l(hi.exp())? > -h {
        hi += 1.0;
    }
    if log_l(lo.exp())? < -h {
        return Err(Error::Regime(format!("pinning free energy at h = {h} is below e^-60")));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if log_l(mid.exp())? > -h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_zero_is_trivial() {
        let rep = replica_coupling_check(
            0.0,
            6,
            0.5,
            Dim::One,
            &DisorderSpec::Gaussian,
            &RunConfig::new(1, 20),
            &ReplicaOptions::default(),
        )
        .unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn non_gaussian_is_rejected() {
        let r = replica_coupling_check(
            0.5,
            6,
            0.5,
            Dim::One,
            &DisorderSpec::Rademacher,
            &RunConfig::new(1, 2),
            &ReplicaOptions::default(),
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn derivative_matches_overlap() {
        let rep = replica_coupling_check(
            0.8,
            6,
            0.5,
            Dim::One,
            &DisorderSpec::Gaussian,
            &RunConfig::new(2, 3000),
            &ReplicaOptions::default(),
        )
        .unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn pinning_closed_form_in_d1() {
        assert_eq!(pinning_free_energy(0.0, &[10, 20], Dim::One).unwrap().f, 0.0);
        for h in [0.05, 0.2, 1.0] {
            let f = pinning_free_energy_limit(h, Dim::One).unwrap();
            // 1 - E e^{-F tau} = sqrt(1 - e^{-F}) in d = 1
            let exact = -(1.0 - (1.0 - (-h).exp()).powi(2)).ln();
            assert!((f - exact).abs() < 1e-10 * exact, "{f} vs {exact}");
        }
        let est = pinning_free_energy(0.5, &[500, 1000, 2000], Dim::One).unwrap();
        let lim = pinning_free_energy_limit(0.5, Dim::One).unwrap();
        assert!((est.f - lim).abs() < 0.02 * lim, "{} vs {lim}", est.f);
    }

    #[test]
    fn pinning_is_monotone_and_convex() {
        let hs: Vec<f64> = (0..8).map(|k| 0.1 * k as f64).collect();
        let fs: Vec<f64> = hs.iter().map(|&h| pinning_free_energy(h, &[200, 400], Dim::One).unwrap().f).collect();
        for w in fs.windows(3) {
            assert!(w[1] >= w[0] - 1e-12);
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
        }
    }
}
