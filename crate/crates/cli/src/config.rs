//! Experiment configuration: TOML with one table per concern. Every key
//! has a default and unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use dirpoly::estimators::RunConfig;
use dirpoly::geometry::Constants;
use dirpoly::{CoarsePlan, Dim, DisorderSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub grid: GridSection,
    pub constants: ConstantsSection,
    pub certificate: CertificateSection,
    pub audit: AuditSection,
    pub replica: ReplicaSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub replicas: u64,
    pub workers: usize,
    /// Replicas per batch for batch-means errors; 0 uses sqrt(replicas) batches.
    pub batch_size: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1, replicas: 1000, workers: 1, batch_size: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderKind {
    Gaussian,
    Rademacher,
    FiniteDiscrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub dimension: usize,
    pub disorder: DisorderKind,
    /// `[value, probability]` pairs, used by `finite_discrete` only.
    pub atoms: Vec<[f64; 2]>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { dimension: 1, disorder: DisorderKind::Gaussian, atoms: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Whole,
    EndpointSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub betas: Vec<f64>,
    /// Polymer lengths; for `pinning` the extrapolation schedule.
    pub sizes: Vec<u64>,
    pub thetas: Vec<f64>,
    /// Pinning strengths for `pinning`.
    pub hs: Vec<f64>,
    pub variant: Variant,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { betas: vec![0.5], sizes: vec![64], thetas: vec![0.5], hs: vec![0.2], variant: Variant::EndpointSum }
    }
}

/// Free constants of the constructions. The defaults are choices; no
/// numerical values are implied by the theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub v_normalization: f64,
    /// Shift for the d = 1 audit; negative selects the finite-volume default.
    pub delta: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let c = Constants::default();
        Self {
            c2: c.c2,
            c3: c.c3,
            c4: c.c4,
            c5: c.c5,
            c6: c.c6,
            c7: c.c7,
            v_normalization: CoarsePlan::DEFAULT_V_NORMALIZATION,
            delta: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateSection {
    /// Standard errors in every confidence limit.
    pub level: f64,
    pub p_c: f64,
    /// Sizes scanned by the concentration certificate (d = 2).
    pub schedule: Vec<u64>,
}

impl Default for CertificateSection {
    fn default() -> Self {
        Self { level: 3.0, p_c: dirpoly::certificates::DEFAULT_PC, schedule: vec![4, 16, 64] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub theta: f64,
    /// Penalty constant K.
    pub k: f64,
    pub walks: u64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self { theta: 0.5, k: 1.0, walks: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicaSection {
    pub t: f64,
    pub eps: f64,
    pub lambdas: Vec<f64>,
}

impl Default for ReplicaSection {
    fn default() -> Self {
        let o = dirpoly::certificates::ReplicaOptions::default();
        Self { t: 0.5, eps: o.eps, lambdas: o.lambdas }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub timestamp: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), timestamp: true }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.dim()?;
        self.spec()?;
        self.run_config().validate().map_err(|e| ConfigError::Invalid(format!("run: {e}")))?;
        if self.grid.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("grid.betas must be finite and >= 0".into());
        }
        if self.grid.sizes.is_empty() || self.grid.sizes.contains(&0) {
            return bad("grid.sizes must hold positive integers".into());
        }
        if self.grid.thetas.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return bad("grid.thetas must lie in (0, 1]".into());
        }
        if self.grid.hs.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return bad("grid.hs must be finite and >= 0".into());
        }
        if !(self.certificate.level > 0.0) {
            return bad("certificate.level must be positive".into());
        }
        if !(self.certificate.p_c > 0.0 && self.certificate.p_c < 1.0) {
            return bad("certificate.p_c must lie in (0, 1)".into());
        }
        if !(self.audit.theta > 0.0 && self.audit.theta < 1.0) {
            return bad("audit.theta must lie in (0, 1)".into());
        }
        self.constants().map(|_| ())
    }

    pub fn dim(&self) -> Result<Dim, ConfigError> {
        Dim::from_usize(self.model.dimension).map_err(|e| ConfigError::Invalid(format!("model.dimension: {e}")))
    }

    pub fn spec(&self) -> Result<DisorderSpec, ConfigError> {
        let m = &self.model;
        if m.disorder != DisorderKind::FiniteDiscrete && !m.atoms.is_empty() {
            return Err(ConfigError::Invalid("model.atoms is only used with disorder = \"finite_discrete\"".into()));
        }
        match m.disorder {
            DisorderKind::Gaussian => Ok(DisorderSpec::Gaussian),
            DisorderKind::Rademacher => Ok(DisorderSpec::Rademacher),
            DisorderKind::FiniteDiscrete => {
                DisorderSpec::finite_discrete(m.atoms.iter().map(|a| (a[0], a[1])).collect())
                    .map_err(|e| ConfigError::Invalid(format!("model.atoms: {e}")))
            }
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            seed: self.run.seed,
            replicas: self.run.replicas,
            workers: self.run.workers,
            batch_size: (self.run.batch_size > 0).then_some(self.run.batch_size),
        }
    }

    pub fn constants(&self) -> Result<Constants, ConfigError> {
        let c = &self.constants;
        let k = Constants { c2: c.c2, c3: c.c3, c4: c.c4, c5: c.c5, c6: c.c6, c7: c.c7 };
        for (name, v) in [("c2", k.c2), ("c3", k.c3), ("c4", k.c4), ("c5", k.c5), ("c6", k.c6), ("c7", k.c7)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("constants.{name} must be positive")));
            }
        }
        if !(c.v_normalization > 0.0) {
            return Err(ConfigError::Invalid("constants.v_normalization must be positive".into()));
        }
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let mut c = ExperimentConfig::default();
        c.grid.betas = vec![0.1, 0.25];
        c.model.dimension = 2;
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = ExperimentConfig::from_toml("[run]\nseeed = 3\n").unwrap_err().to_string();
        assert!(e.contains("seeed"), "{e}");
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("[model]\ndimension = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("[model]\ndisorder = \"finite_discrete\"\natoms = [[1.0, 1.0]]\n").is_err());
        assert!(ExperimentConfig::from_toml("[certificate]\np_c = 1.5\n").is_err());
        let ok = "[model]\ndisorder = \"finite_discrete\"\natoms = [[-1.0, 0.5], [1.0, 0.5]]\n";
        assert!(ExperimentConfig::from_toml(ok).is_ok());
    }
}
