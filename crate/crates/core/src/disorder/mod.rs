//! Disorder laws, their cumulant functions, environment sampling and the
//! three change-of-measure devices (shift/tilt, block-correlated Gaussian,
//! penalty).

mod covariance;
mod field;
mod penalty;
mod shift;

pub use covariance::{
    block_values, build_block_covariance, correlated_density, correlated_log_density, sample_correlated,
    sample_correlated_with, BlockCovariance, BlockPlacement, CorrelatedFactor, PD_TOLERANCE,
};
pub use field::{sample_environment, Environment, EnvironmentField, HashedEnvironment, MeasureTag, Provenance, Window};
pub use penalty::{f_k, penalty_density, quadratic_form, PenaltySpec};
pub use shift::{sample_shifted, shift_density, shift_log_density, ShiftPlan, ShiftedEnvironment};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MOMENT_TOL: f64 = 1e-12;

/// Law of a single environment variable. Every admissible law is centered
/// with unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisorderSpec {
    Gaussian,
    Rademacher,
    FiniteDiscrete { atoms: Vec<Atom> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

impl DisorderSpec {
    pub fn finite_discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let spec = DisorderSpec::FiniteDiscrete {
            atoms: atoms.into_iter().map(|(value, prob)| Atom { value, prob }).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks normalization, zero mean and unit variance.
    pub fn validate(&self) -> Result<()> {
        let DisorderSpec::FiniteDiscrete { atoms } = self else {
            return Ok(());
        };
        if atoms.is_empty() {
            return Err(Error::InvalidSpec("no atoms".into()));
        }
        if atoms.iter().any(|a| !(a.prob > 0.0) || !a.value.is_finite()) {
            return Err(Error::InvalidSpec("atom probabilities must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        let mean: f64 = atoms.iter().map(|a| a.prob * a.value).sum();
        let var: f64 = atoms.iter().map(|a| a.prob * a.value * a.value).sum::<f64>() - mean * mean;
        if (total - 1.0).abs() > MOMENT_TOL {
            return Err(Error::InvalidSpec(format!("probabilities sum to {total}")));
        }
        if mean.abs() > MOMENT_TOL {
            return Err(Error::InvalidSpec(format!("mean is {mean}, expected 0")));
        }
        if (var - 1.0).abs() > MOMENT_TOL {
            return Err(Error::InvalidSpec(format!("variance is {var}, expected 1")));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            DisorderSpec::Gaussian => "gaussian",
            DisorderSpec::Rademacher => "rademacher",
            DisorderSpec::FiniteDiscrete { .. } => "finite_discrete",
        }
    }

    /// Upper end of the range where the log-moment generating function is
    /// finite. Every supported law has all exponential moments.
    pub fn mgf_bound(&self) -> f64 {
        f64::INFINITY
    }

    fn check_arg(&self, beta: f64) -> Result<()> {
        if !beta.is_finite() || beta.abs() >= self.mgf_bound() {
            return Err(Error::Domain(format!(
                "argument {beta} outside the finite-MGF range of the {} law",
                self.name()
            )));
        }
        Ok(())
    }

    /// Tilted atom probabilities `p_i exp(t v_i - lambda(t))`.
    pub(crate) fn tilted_atoms(&self, t: f64) -> Result<Vec<Atom>> {
        match self {
            DisorderSpec::Gaussian => Err(Error::Unsupported("Gaussian law has no atoms".into())),
            DisorderSpec::Rademacher => {
                let l = log_mgf(self, t)?;
                Ok(vec![
                    Atom { value: -1.0, prob: (-t - l - std::f64::consts::LN_2).exp() },
                    Atom { value: 1.0, prob: (t - l - std::f64::consts::LN_2).exp() },
                ])
            }
            DisorderSpec::FiniteDiscrete { atoms } => {
                if t == 0.0 {
                    return Ok(atoms.clone());
                }
                let l = log_mgf(self, t)?;
                Ok(atoms.iter().map(|a| Atom { value: a.value, prob: (a.prob.ln() + t * a.value - l).exp() }).collect())
            }
        }
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log cosh(x)` without overflow.
pub(crate) fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `lambda(beta) = log E exp(beta omega)`.
pub fn log_mgf(spec: &DisorderSpec, beta: f64) -> Result<f64> {
    spec.check_arg(beta)?;
    Ok(match spec {
        DisorderSpec::Gaussian => 0.5 * beta * beta,
        DisorderSpec::Rademacher => log_cosh(beta),
        DisorderSpec::FiniteDiscrete { atoms } => {
            if beta == 0.0 {
                0.0
            } else {
                log_sum_exp(atoms.iter().map(|a| a.prob.ln() + beta * a.value))
            }
        }
    })
}

/// `gamma(beta) = lambda(2 beta) - 2 lambda(beta)`, the exponent of the
/// two-replica interaction.
pub fn gamma(spec: &DisorderSpec, beta: f64) -> Result<f64> {
    spec.check_arg(2.0 * beta)?;
    Ok(match spec {
        DisorderSpec::Gaussian => beta * beta,
        _ => (log_mgf(spec, 2.0 * beta)? - 2.0 * log_mgf(spec, beta)?).max(0.0),
    })
}

/// Mean of omega under the tilted law `exp(beta omega - lambda(beta)) dQ`,
/// i.e. `lambda'(beta)`.
pub fn tilted_mean(spec: &DisorderSpec, beta: f64) -> Result<f64> {
    spec.check_arg(beta)?;
    Ok(match spec {
        DisorderSpec::Gaussian => beta,
        DisorderSpec::Rademacher => beta.tanh(),
        DisorderSpec::FiniteDiscrete { .. } => spec.tilted_atoms(beta)?.iter().map(|a| a.prob * a.value).sum(),
    })
}

/// Variance of omega under the tilted law, i.e. `lambda''(beta)`.
pub fn tilted_variance(spec: &DisorderSpec, beta: f64) -> Result<f64> {
    spec.check_arg(beta)?;
    Ok(match spec {
        DisorderSpec::Gaussian => 1.0,
        DisorderSpec::Rademacher => 1.0 - beta.tanh().powi(2),
        DisorderSpec::FiniteDiscrete { .. } => {
            let atoms = spec.tilted_atoms(beta)?;
            let m: f64 = atoms.iter().map(|a| a.prob * a.value).sum();
            atoms.iter().map(|a| a.prob * (a.value - m).powi(2)).sum()
        }
    })
}

/// Inverse-CDF sampler for one site law, optionally exponentially tilted.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SiteSampler {
    Gaussian { mean: f64 },
    Atoms { cdf: Vec<f64>, values: Vec<f64> },
}

impl SiteSampler {
    pub(crate) fn new(spec: &DisorderSpec, tilt: f64) -> Result<Self> {
        match spec {
            DisorderSpec::Gaussian => Ok(SiteSampler::Gaussian { mean: tilt }),
            _ => {
                let atoms = if tilt == 0.0 {
                    match spec {
                        DisorderSpec::Rademacher => {
                            vec![Atom { value: -1.0, prob: 0.5 }, Atom { value: 1.0, prob: 0.5 }]
                        }
                        DisorderSpec::FiniteDiscrete { atoms } => atoms.clone(),
                        DisorderSpec::Gaussian => unreachable!(),
                    }
                } else {
                    spec.tilted_atoms(tilt)?
                };
                let mut acc = 0.0;
                let mut cdf = Vec::with_capacity(atoms.len());
                for a in &atoms {
                    acc += a.prob;
                    cdf.push(acc);
                }
                Ok(SiteSampler::Atoms { cdf, values: atoms.iter().map(|a| a.value).collect() })
            }
        }
    }

    #[inline]
    pub(crate) fn sample(&self, h: &crate::rng::SiteHasher, t: i64, x: i64, y: i64) -> f64 {
        match self {
            SiteSampler::Gaussian { mean } => h.gaussian(t, x, y) + mean,
            SiteSampler::Atoms { cdf, values } => {
                let u = h.uniform(t, x, y, 0);
                let idx = cdf.iter().position(|&c| u < c).unwrap_or(values.len() - 1);
                values[idx]
            }
        }
    }
}
