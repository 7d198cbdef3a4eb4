//! Statistical certificates on the free energy and audits of the
//! change-of-measure inequalities.
//!
//! A certificate is a Monte Carlo statement: the bound holds when the
//! estimate it rests on lies inside its `level`-sigma confidence interval.
//! Each one stores the full input record, so [`replay`] recomputes it
//! bit for bit.

mod audits;
mod cascade;
mod concentration;
mod percolation;
mod replica;

pub use audits::{correlated_measure_audit, correlated_measure_audit_for, penalty_measure_audit, PenaltyAuditOptions};
pub use cascade::{cascade_upper_certificate, finite_volume_delta, holder_cost, holder_log_cost, shift_measure_audit};
pub use concentration::{concentration_lower_certificate, ConcentrationStep};
pub use percolation::{
    build_perco_grid, directed_path_search, estimate_pc, open_probability, percolation_lower_certificate, PathSearch,
    PercoGrid, PercoOutcome, DEFAULT_PC,
};
pub use replica::{
    pinning_free_energy, pinning_free_energy_limit, replica_coupling_check, PinningEstimate, ReplicaOptions,
};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::disorder::DisorderSpec;
use crate::error::Result;
use crate::estimators::{EstimateCI, RunConfig};
use crate::geometry::Dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDirection {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    /// `p <= log A+ / (theta n)` with `A = E sum_x W_n(x)^theta`.
    FractionalCascade,
    /// Oriented percolation of restricted cell partition functions.
    Percolation,
    /// Chebyshev on `log W_n` combined with `Q{W_n < 1/2} <= 1/2`.
    Concentration,
}

/// Everything needed to recompute a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub beta: f64,
    pub n: u64,
    pub d: Dim,
    pub spec: DisorderSpec,
    pub seed: u64,
    pub replicas: u64,
    pub batch_size: Option<u64>,
    /// Number of standard errors in the confidence limit.
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub schedule: Option<Vec<u64>>,
}

impl CertificateInputs {
    pub(crate) fn new(beta: f64, n: u64, d: Dim, spec: &DisorderSpec, cfg: &RunConfig, level: f64) -> Self {
        Self {
            beta,
            n,
            d,
            spec: spec.clone(),
            seed: cfg.seed,
            replicas: cfg.replicas,
            batch_size: cfg.batch_size,
            level,
            theta: None,
            p_c: None,
            schedule: None,
        }
    }

    fn run_config(&self, workers: usize) -> RunConfig {
        RunConfig { seed: self.seed, replicas: self.replicas, workers, batch_size: self.batch_size }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub direction: BoundDirection,
    /// The certified bound on `p(beta)`.
    pub value: f64,
    /// One-sided normal coverage of the `level`-sigma limit.
    pub confidence: f64,
    pub method: CertificateMethod,
    pub inputs: CertificateInputs,
    /// The estimate the bound rests on.
    pub estimate: EstimateCI,
    /// Confidence limit of the estimate that entered the bound.
    pub limit: f64,
}

/// One-sided coverage `Phi(level)`.
pub fn confidence_of(level: f64) -> f64 {
    Normal::new(0.0, 1.0).map(|n| n.cdf(level)).unwrap_or(f64::NAN)
}

/// Recomputes a certificate from its record.
pub fn replay(cert: &Certificate, workers: usize) -> Result<Option<Certificate>> {
    let i = &cert.inputs;
    let cfg = i.run_config(workers);
    match cert.method {
        CertificateMethod::FractionalCascade => {
            cascade_upper_certificate(i.beta, i.n, i.theta.unwrap_or(0.5), &i.spec, &cfg, i.level)
        }
        CertificateMethod::Percolation => {
            percolation_lower_certificate(i.beta, i.n, &i.spec, &cfg, i.p_c.unwrap_or(DEFAULT_PC), i.level)
                .map(|o| o.certificate)
        }
        CertificateMethod::Concentration => {
            concentration_lower_certificate(i.beta, i.d, &i.spec, &cfg, i.schedule.as_deref().unwrap_or(&[]), i.level)
                .map(|o| o.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|lhs - rhs| <= tolerance`.
    Equal,
    /// `lhs <= rhs + tolerance`.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub kind: CheckKind,
    pub pass: bool,
}

impl Check {
    pub fn equal(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = (lhs - rhs).abs() <= tolerance || lhs == rhs;
        Self { name: name.into(), lhs, rhs, tolerance, kind: CheckKind::Equal, pass }
    }

    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = lhs <= rhs + tolerance;
        Self { name: name.into(), lhs, rhs, tolerance, kind: CheckKind::AtMost, pass }
    }

    /// A check that could not be evaluated.
    pub fn failed(name: impl Into<String>) -> Self {
        Self { name: name.into(), lhs: f64::NAN, rhs: f64::NAN, tolerance: 0.0, kind: CheckKind::Equal, pass: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub audit: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub(crate) fn new(audit: &str) -> Self {
        Self { audit: audit.into(), checks: Vec::new(), notes: Vec::new() }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub(crate) fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub(crate) fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_semantics() {
        assert!(Check::equal("a", 1.0, 1.05, 0.1).pass);
        assert!(!Check::equal("a", 1.0, 1.2, 0.1).pass);
        assert!(Check::at_most("b", 2.0, 1.0, 1.0).pass);
        assert!(!Check::at_most("b", 2.1, 1.0, 1.0).pass);
        assert!(!Check::failed("c").pass);
        assert!((confidence_of(3.0) - 0.99865).abs() < 1e-5);
    }
}
