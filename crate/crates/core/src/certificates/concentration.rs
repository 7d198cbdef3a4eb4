use serde::{Deserialize, Serialize};

use super::{confidence_of, BoundDirection, Certificate, CertificateInputs, CertificateMethod};
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::estimators::{log_w_samples, record, EstimateCI, EstimatorTag, RunConfig};
use crate::geometry::Dim;
use crate::stats::variance_summary;

/// Per-size record of the concentration scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationStep {
    pub n: u64,
    /// Estimate of `Q{W_n < 1/2}`.
    pub small_mass: EstimateCI,
    /// `Var(log W_n)` and its standard error.
    pub var_log: f64,
    pub var_log_stderr: f64,
    /// Upper limit of `Var(log W_n) / n^{3/2}`, the Chebyshev bound on
    /// `Q{log W_n <= E log W_n - n^{3/4}}`.
    pub chebyshev_upper: f64,
    pub pass: bool,
    /// `-n^{-1/4} - log 2 / n`.
    pub value: f64,
}

/// Lower bound `p(beta) >= -n^{-1/4} - log 2 / n` at the best `n` of the
/// schedule for which, at the given confidence, `Q{W_n < 1/2} <= 1/2` and
/// `Var(log W_n) / n^{3/2} < 1/2`: the two events then intersect, which
/// forces `E log W_n >= -n^{3/4} - log 2`.
pub fn concentration_lower_certificate(
    beta: f64,
    d: Dim,
    spec: &DisorderSpec,
    cfg: &RunConfig,
    schedule: &[u64],
    level: f64,
) -> Result<(Option<Certificate>, Vec<ConcentrationStep>)> {
    if schedule.is_empty() || schedule.iter().any(|&n| n < 2) {
        return Err(Error::Domain("schedule needs sizes n >= 2".into()));
    }
    let mut steps = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let logs = log_w_samples(beta, n as usize, d, spec, cfg)?;
        let small: Vec<f64> = logs.iter().map(|&l| if l < -std::f64::consts::LN_2 { 1.0 } else { 0.0 }).collect();
        let q = record(cfg.summarize(&small), cfg, EstimatorTag::SmallMassProbability, beta, n as usize, d, spec, None);
        let v = variance_summary(&logs);
        let v_se = if v.stderr.is_nan() { 0.0 } else { v.stderr };
        let nf = n as f64;
        let chebyshev_upper = (v.mean + level * v_se) / nf.powf(1.5);
        let q_upper = q.mean + level * q.stderr;
        steps.push(ConcentrationStep {
            n,
            pass: q_upper <= 0.5 && chebyshev_upper < 0.5,
            small_mass: q,
            var_log: v.mean,
            var_log_stderr: v_se,
            chebyshev_upper,
            value: -nf.powf(-0.25) - std::f64::consts::LN_2 / nf,
        });
    }
    let best = steps.iter().filter(|s| s.pass).max_by(|a, b| a.value.total_cmp(&b.value));
    let cert = best.map(|s| {
        let mut inputs = CertificateInputs::new(beta, s.n, d, spec, cfg, level);
        inputs.schedule = Some(schedule.to_vec());
        Certificate {
            direction: BoundDirection::Lower,
            value: s.value,
            confidence: confidence_of(level),
            method: CertificateMethod::Concentration,
            inputs,
            limit: s.small_mass.mean + level * s.small_mass.stderr,
            estimate: s.small_mass.clone(),
        }
    });
    Ok((cert, steps))
}
