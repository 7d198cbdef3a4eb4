use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{AuditReport, Check};
use crate::disorder::{
    build_block_covariance, quadratic_form, tilted_mean, BlockCovariance, BlockPlacement, CorrelatedFactor,
    DisorderSpec, Environment, HashedEnvironment, SiteSampler, Window,
};
use crate::error::Result;
use crate::estimators::{replica_map, RunConfig};
use crate::geometry::{CoarsePlan, Dim, Pos};
use crate::renewal::sample_walk;
use crate::rng::{purpose, stream_rng, SiteHasher};
use crate::stats::{summarize, variance_summary};

/// `log |det M|` and the sign of `det M` by partial-pivot LU.
fn lu_log_det(m: DMatrix<f64>) -> (f64, f64) {
    let lu = m.lu();
    let mut sign: f64 = lu.p().determinant();
    let mut acc = 0.0;
    for v in lu.u().diagonal().iter() {
        sign *= v.signum();
        acc += v.abs().ln();
    }
    (acc, sign)
}

/// Audit of the block-correlated Gaussian change of measure on one block
/// of `plan`, with `V` built from the plan constants.
pub fn correlated_measure_audit(plan: &CoarsePlan, theta: f64) -> Result<AuditReport> {
    let cov = build_block_covariance(plan)?;
    Ok(correlated_measure_audit_for(&cov, theta))
}

/// Same audit for a given kernel. A kernel for which `I - V` or
/// `I - V/(1-theta)` is not positive definite yields failed checks.
pub fn correlated_measure_audit_for(cov: &BlockCovariance, theta: f64) -> AuditReport {
    let mut rep = AuditReport::new("correlated");
    rep.note(format!("block dimension {}, nonzeros {}", cov.dim(), cov.nnz()));
    if !(theta > 0.0 && theta < 1.0) {
        rep.note(format!("theta = {theta} outside (0, 1)"));
        rep.push(Check::failed("theta_domain"));
        return rep;
    }
    let row = cov.row_sum_bound();
    rep.push(Check::at_most("row_sum_vs_analytic", row, cov.analytic_row_bound(), 0.0));
    rep.push(Check::at_most("max_eigenvalue_vs_row_sum", cov.max_eigenvalue(), row, 1e-12 * row.max(1.0)));
    rep.push(Check::at_most("hs_norm_sq", cov.hs_norm_sq(), 1.0, 0.0));

    let s = 1.0 / (1.0 - theta);
    let chol = CorrelatedFactor::new(cov, 1.0).and_then(|a| CorrelatedFactor::new(cov, s).map(|b| (a, b)));
    let (fa, fb) = match chol {
        Ok(p) => p,
        Err(e) => {
            rep.note(format!("factorization failed: {e}"));
            for name in ["logdet_nonpositive", "det_identity", "block_factor_bound"] {
                rep.push(Check::failed(name));
            }
            return rep;
        }
    };
    let ld_a = fa.log_det();
    let ld_b = fb.log_det();
    rep.push(Check::at_most("logdet_nonpositive", ld_a, 0.0, 1e-12));

    // The Hölder factor E_Q[(dQ/dQ~)^{theta/(1-theta)}]^{1-theta} of one
    // block, as [det(I - V) / det(I - V/(1-theta))^{1-theta}]^{1/2}.
    let chol_log = 0.5 * (ld_a - (1.0 - theta) * ld_b);
    let c = cov.dense_shifted(1.0);
    let shifted = (&c - DMatrix::identity(c.nrows(), c.ncols()) * theta) * s;
    let (la, sa) = lu_log_det(c);
    let (lb, sb) = lu_log_det(shifted);
    if sa > 0.0 && sb > 0.0 {
        let lu_log = 0.5 * (la - (1.0 - theta) * lb);
        rep.push(Check::equal("det_identity", lu_log.exp(), chol_log.exp(), 1e-10));
    } else {
        rep.note("LU determinant has the wrong sign");
        rep.push(Check::failed("det_identity"));
    }
    rep.push(Check::at_most("block_factor_bound", chol_log, 1.0 / (2.0 * (1.0 - theta)), 0.0));
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyAuditOptions {
    /// Penalty constant: blocks with `U > exp(K^2)` are penalized.
    pub k: f64,
    /// Number of standard errors allowed on Monte Carlo checks.
    pub level: f64,
    /// Number of sampled walks for the size-biased checks.
    pub walks: u64,
}

impl Default for PenaltyAuditOptions {
    fn default() -> Self {
        Self { k: 1.0, level: 3.0, walks: 4 }
    }
}

/// Environment tilted by `beta` on the sites of one path and i.i.d.
/// elsewhere: the size-biased law given the path.
struct PathTilted {
    d: Dim,
    hasher: SiteHasher,
    base: SiteSampler,
    tilted: SiteSampler,
    path: HashSet<(i64, Pos)>,
}

impl Environment for PathTilted {
    fn dim(&self) -> Dim {
        self.d
    }

    fn covers(&self, _w: &Window) -> bool {
        true
    }

    fn value(&self, t: i64, p: Pos) -> f64 {
        let s = if self.path.contains(&(t, p)) { &self.tilted } else { &self.base };
        s.sample(&self.hasher, t, p[0], p[1])
    }
}

/// Audit of the penalty change of measure on a single block centered at
/// the origin: the Hölder factor of the penalty, the variance of the
/// quadratic form `U` under the base and size-biased laws, its tail, and
/// the column-sum bound along sampled walks.
pub fn penalty_measure_audit(
    beta: f64,
    plan: &CoarsePlan,
    spec: &DisorderSpec,
    cfg: &RunConfig,
    opts: &PenaltyAuditOptions,
) -> Result<AuditReport> {
    let cov = build_block_covariance(plan)?;
    let block = BlockPlacement { t0: 0, center: [0, 0] };
    let theta = plan.theta;
    let k = opts.k;
    let level = opts.level;
    let threshold = (k * k).exp();
    let hs = cov.hs_norm_sq();
    let mut rep = AuditReport::new("penalty");
    rep.note(format!("block dimension {}, K = {k}, threshold {threshold:e}", cov.dim()));

    let us = replica_map(cfg, |r| {
        let env = HashedEnvironment::new(spec, plan.d, cfg.environment_seed(r))?;
        quadratic_form(&env, &cov, &block)
    })?;

    // E_Q[g^{-theta/(1-theta)}] <= 2 per block, reported after the 1-theta power
    let q = theta / (1.0 - theta);
    let gs: Vec<f64> = us.iter().map(|&u| if u > threshold { (q * k).exp() } else { 1.0 }).collect();
    let g = summarize(&gs);
    let g_se = if g.stderr.is_nan() { 0.0 } else { g.stderr };
    let lhs = g.mean.powf(1.0 - theta);
    let lhs_se = (1.0 - theta) * g.mean.powf(-theta) * g_se;
    rep.push(Check::at_most("penalty_holder_factor", lhs, 2f64.powf(1.0 - theta), level * lhs_se));

    let v = variance_summary(&us);
    let v_se = if v.stderr.is_nan() { 0.0 } else { v.stderr };
    rep.push(Check::at_most("var_u_base", v.mean, 1.0, level * v_se));
    // zero diagonal and unit-variance sites give Var U = 2 |V|_HS^2
    rep.push(Check::equal("var_u_identity", v.mean, 2.0 * hs, level * v_se));

    let tail: Vec<f64> = us.iter().map(|&u| if u >= threshold { 1.0 } else { 0.0 }).collect();
    let t = summarize(&tail);
    let t_se = if t.stderr.is_nan() { 0.0 } else { t.stderr };
    rep.push(Check::at_most("u_tail_chebyshev", t.mean, 2.0 * hs * (-2.0 * k * k).exp(), level * t_se));

    let m_beta = tilted_mean(spec, beta)?;
    let n = plan.n as usize;
    let c = plan.constants;
    let trivbo = (plan.n as f64).ln().sqrt() / (c.c6 * c.c7 * plan.n as f64);
    let base = SiteSampler::new(spec, 0.0)?;
    let tilted = SiteSampler::new(spec, beta)?;
    for w in 0..opts.walks {
        let mut rng = stream_rng(cfg.seed, w, purpose::WALK);
        let walk = sample_walk(plan.d, n, &mut rng);
        let mut indicator = vec![0.0; cov.dim()];
        let mut path = HashSet::new();
        for (i, &p) in walk.iter().enumerate() {
            let t = i as i64 + 1;
            path.insert((t, p));
            if let Some(a) = cov.local_index(t, p) {
                indicator[a] = 1.0;
            }
        }
        let mut colsum = vec![0.0; cov.dim()];
        cov.matvec(&indicator, &mut colsum);
        let max_col = colsum.iter().cloned().fold(0.0, f64::max);
        rep.push(Check::at_most(format!("column_sum_walk_{w}"), max_col, trivbo, 0.0));

        let sq: f64 = colsum.iter().map(|x| x * x).sum();
        let bound = 16.0 * m_beta * m_beta * sq + 8.0 * hs;
        let us = replica_map(cfg, |r| {
            let env = PathTilted {
                d: plan.d,
                hasher: SiteHasher::new(cfg.environment_seed(r)),
                base: base.clone(),
                tilted: tilted.clone(),
                path: path.clone(),
            };
            quadratic_form(&env, &cov, &block)
        })?;
        let v = variance_summary(&us);
        let v_se = if v.stderr.is_nan() { 0.0 } else { v.stderr };
        rep.push(Check::at_most(format!("var_u_size_biased_walk_{w}"), v.mean, bound, level * v_se));
    }
    Ok(rep)
}
