//! Monte Carlo estimates over independent environments.
//!
//! Replica `r` always sees the environment seeded by
//! `derive_seed(master, r, ENVIRONMENT)`, and results are gathered in
//! replica order before any reduction. Aggregates are therefore identical
//! bit for bit whatever the number of workers, and two estimates run with
//! the same master seed share their environments (common random numbers).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{gamma, DisorderSpec, HashedEnvironment};
use crate::error::{Error, Result};
use crate::geometry::Dim;
use crate::rng::{derive_seed, purpose};
use crate::stats::{batch_means, batch_means_with, jackknife_variance, Summary};
use crate::transfer::{pair_pinning_partition, quenched_partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub replicas: u64,
    pub workers: usize,
    /// Replicas per batch for the batch-means error; `None` uses
    /// `floor(sqrt(replicas))` batches.
    pub batch_size: Option<u64>,
}

impl RunConfig {
    pub fn new(seed: u64, replicas: u64) -> Self {
        Self { seed, replicas, workers: 1, batch_size: None }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Domain("replicas must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Domain("workers must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Domain("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Environment seed of replica `r`.
    pub fn environment_seed(&self, r: u64) -> u64 {
        derive_seed(self.seed, r, purpose::ENVIRONMENT)
    }

    pub(crate) fn summarize(&self, xs: &[f64]) -> Summary {
        match self.batch_size {
            None => batch_means(xs),
            Some(b) => batch_means_with(xs, (xs.len() as u64 / b).max(1) as usize),
        }
    }
}

/// Runs `f(r)` for `r = 0..replicas` on `workers` threads and returns the
/// results in replica order.
pub fn replica_map<T, F>(cfg: &RunConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    cfg.validate()?;
    if cfg.workers == 1 {
        return (0..cfg.replicas).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    pool.install(|| (0..cfg.replicas).into_par_iter().map(&f).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    FreeEnergy,
    FractionalMoment,
    EndpointFractionalMoment,
    VarianceW,
    LogVariance,
    /// `Q{W̄ >= QW̄/2}` for one percolation cell.
    OpenProbability,
    /// `Q{W_n < 1/2}`.
    SmallMassProbability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionalVariant {
    /// `E[W_n^theta]`.
    Whole,
    /// `E[sum_x W_n(x)^theta]`.
    EndpointSum,
}

/// A Monte Carlo estimate with everything needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: u64,
    pub seed: u64,
    pub estimator: EstimatorTag,
    pub beta: f64,
    pub n: usize,
    pub d: Dim,
    pub spec: DisorderSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
}

impl EstimateCI {
    /// `mean ± z stderr`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }
}

fn environment(spec: &DisorderSpec, d: Dim, cfg: &RunConfig, r: u64) -> Result<HashedEnvironment> {
    HashedEnvironment::new(spec, d, cfg.environment_seed(r))
}

fn check(beta: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Domain(format!("beta = {beta} must be finite and non-negative")));
    }
    Ok(())
}

/// `log W_n` for every replica, in replica order.
pub fn log_w_samples(beta: f64, n: usize, d: Dim, spec: &DisorderSpec, cfg: &RunConfig) -> Result<Vec<f64>> {
    check(beta, n)?;
    replica_map(cfg, |r| {
        let env = environment(spec, d, cfg, r)?;
        Ok(quenched_partition(&env, beta, spec, n)?.log_w)
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn record(
    s: Summary,
    cfg: &RunConfig,
    estimator: EstimatorTag,
    beta: f64,
    n: usize,
    d: Dim,
    spec: &DisorderSpec,
    theta: Option<f64>,
) -> EstimateCI {
    // a constant sample has no spread; NaN only arises from a single replica
    let stderr = if s.stderr.is_nan() && s.count > 1 { 0.0 } else { s.stderr };
    EstimateCI {
        mean: s.mean,
        stderr,
        replicas: cfg.replicas,
        seed: cfg.seed,
        estimator,
        beta,
        n,
        d,
        spec: spec.clone(),
        theta,
    }
}

/// `p_N(beta) = (1/N) E log W_N`.
pub fn estimate_free_energy(beta: f64, n: usize, d: Dim, spec: &DisorderSpec, cfg: &RunConfig) -> Result<EstimateCI> {
    let xs: Vec<f64> = log_w_samples(beta, n, d, spec, cfg)?.iter().map(|l| l / n as f64).collect();
    Ok(record(cfg.summarize(&xs), cfg, EstimatorTag::FreeEnergy, beta, n, d, spec, None))
}

/// `E[W_n^theta]` or `E[sum_x W_n(x)^theta]`.
pub fn estimate_fractional_moment(
    beta: f64,
    n: usize,
    theta: f64,
    d: Dim,
    spec: &DisorderSpec,
    variant: FractionalVariant,
    cfg: &RunConfig,
) -> Result<EstimateCI> {
    check(beta, n)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta = {theta} must lie in (0, 1]")));
    }
    let xs = replica_map(cfg, |r| {
        let env = environment(spec, d, cfg, r)?;
        let q = quenched_partition(&env, beta, spec, n)?;
        Ok(match variant {
            FractionalVariant::Whole => (theta * q.log_w).exp(),
            FractionalVariant::EndpointSum => q.log_endpoint_power_sum(theta).exp(),
        })
    })?;
    let tag = match variant {
        FractionalVariant::Whole => EstimatorTag::FractionalMoment,
        FractionalVariant::EndpointSum => EstimatorTag::EndpointFractionalMoment,
    };
    Ok(record(cfg.summarize(&xs), cfg, tag, beta, n, d, spec, Some(theta)))
}

/// Sample variance of `W_n` with a jackknife standard error.
pub fn estimate_variance_w(beta: f64, n: usize, d: Dim, spec: &DisorderSpec, cfg: &RunConfig) -> Result<EstimateCI> {
    let xs: Vec<f64> = log_w_samples(beta, n, d, spec, cfg)?.iter().map(|l| l.exp()).collect();
    Ok(record(jackknife_variance(&xs), cfg, EstimatorTag::VarianceW, beta, n, d, spec, None))
}

/// `Var(W_n) = E_{P⊗2}[exp(gamma(beta) |tau ∩ [1, n]|)] - 1`.
pub fn exact_variance_w(beta: f64, n: usize, d: Dim, spec: &DisorderSpec) -> Result<f64> {
    let g = gamma(spec, beta)?;
    Ok(pair_pinning_partition(n as u64, g, d)?.log_value.exp_m1())
}

/// Sample variance of `log W_n`, with its ratio to `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogVariance {
    pub estimate: EstimateCI,
    pub per_step: f64,
    pub per_step_stderr: f64,
}

pub fn estimate_log_variance(beta: f64, n: usize, d: Dim, spec: &DisorderSpec, cfg: &RunConfig) -> Result<LogVariance> {
    let xs = log_w_samples(beta, n, d, spec, cfg)?;
    let estimate = record(jackknife_variance(&xs), cfg, EstimatorTag::LogVariance, beta, n, d, spec, None);
    Ok(LogVariance { per_step: estimate.mean / n as f64, per_step_stderr: estimate.stderr / n as f64, estimate })
}

/// Mean and standard error of `a_r - b_r`, for comparisons under common
/// random numbers.
pub fn paired_difference(a: &[f64], b: &[f64]) -> Result<Summary> {
    if a.len() != b.len() {
        return Err(Error::Domain("paired samples differ in length".into()));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(batch_means(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_zero_is_exact() {
        let cfg = RunConfig::new(1, 16);
        let p = estimate_free_energy(0.0, 20, Dim::One, &DisorderSpec::Gaussian, &cfg).unwrap();
        assert_eq!((p.mean, p.stderr), (0.0, 0.0));
        let m =
            estimate_fractional_moment(0.0, 20, 0.5, Dim::Two, &DisorderSpec::Gaussian, FractionalVariant::Whole, &cfg)
                .unwrap();
        assert_eq!((m.mean, m.stderr), (1.0, 0.0));
        let v = estimate_variance_w(0.0, 10, Dim::One, &DisorderSpec::Rademacher, &cfg).unwrap();
        assert_eq!(v.mean, 0.0);
        let l = estimate_log_variance(0.0, 10, Dim::One, &DisorderSpec::Rademacher, &cfg).unwrap();
        assert_eq!(l.estimate.mean, 0.0);
    }

    #[test]
    fn workers_do_not_change_results() {
        let spec = DisorderSpec::Gaussian;
        let a = estimate_free_energy(0.7, 30, Dim::One, &spec, &RunConfig::new(5, 40)).unwrap();
        let b = estimate_free_energy(0.7, 30, Dim::One, &spec, &RunConfig::new(5, 40).with_workers(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn martingale_and_jensen() {
        let spec = DisorderSpec::Gaussian;
        let cfg = RunConfig::new(2, 2000);
        let m = estimate_fractional_moment(0.5, 30, 1.0, Dim::One, &spec, FractionalVariant::Whole, &cfg).unwrap();
        assert!((m.mean - 1.0).abs() < 3.0 * m.stderr);
        let f = estimate_fractional_moment(0.8, 30, 0.5, Dim::One, &spec, FractionalVariant::Whole, &cfg).unwrap();
        assert!(f.mean <= 1.0 + 3.0 * f.stderr);
    }

    #[test]
    fn variance_matches_pair_formula() {
        let spec = DisorderSpec::Gaussian;
        let cfg = RunConfig::new(3, 4000);
        let v = estimate_variance_w(0.5, 20, Dim::One, &spec, &cfg).unwrap();
        let exact = exact_variance_w(0.5, 20, Dim::One, &spec).unwrap();
        assert!((v.mean - exact).abs() < 3.0 * v.stderr, "{} vs {exact} ± {}", v.mean, v.stderr);
    }

    #[test]
    fn free_energy_monotone_under_crn() {
        let spec = DisorderSpec::Gaussian;
        let cfg = RunConfig::new(8, 200);
        let a: Vec<f64> = log_w_samples(0.5, 50, Dim::One, &spec, &cfg).unwrap();
        let b: Vec<f64> = log_w_samples(0.9, 50, Dim::One, &spec, &cfg).unwrap();
        let d = paired_difference(&b, &a).unwrap();
        assert!(d.mean <= 3.0 * d.stderr);
    }

    #[test]
    fn bad_config_rejected() {
        let mut cfg = RunConfig::new(1, 0);
        assert!(cfg.validate().is_err());
        cfg.replicas = 3;
        cfg.workers = 0;
        assert!(cfg.validate().is_err());
        assert!(estimate_fractional_moment(
            0.5,
            4,
            1.5,
            Dim::One,
            &DisorderSpec::Gaussian,
            FractionalVariant::Whole,
            &RunConfig::new(1, 2)
        )
        .is_err());
    }
}
