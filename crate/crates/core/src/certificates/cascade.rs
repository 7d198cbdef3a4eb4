use super::{confidence_of, AuditReport, BoundDirection, Certificate, CertificateInputs, CertificateMethod, Check};
use crate::disorder::{log_mgf, shift_log_density, DisorderSpec, HashedEnvironment, ShiftPlan, ShiftedEnvironment};
use crate::error::{Error, Result};
use crate::estimators::{estimate_fractional_moment, replica_map, FractionalVariant, RunConfig};
use crate::geometry::{escape_probability, CoarsePlan, Dim, SiteBox, SiteSet, SpatialBox, SquareRequirement};
use crate::stats::summarize;
use crate::transfer::quenched_partition;

/// Upper bound `p(beta) <= log A+ / (theta n)` where `A+` is the upper
/// confidence limit of `A = E sum_x W_n(x)^theta` (d = 1). Returns `None`
/// when `A+ >= 1`, which is a legitimate outcome.
pub fn cascade_upper_certificate(
    beta: f64,
    n: u64,
    theta: f64,
    spec: &DisorderSpec,
    cfg: &RunConfig,
    level: f64,
) -> Result<Option<Certificate>> {
    SquareRequirement::Square.check(n)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} must lie in (0, 1)")));
    }
    let est = estimate_fractional_moment(beta, n as usize, theta, Dim::One, spec, FractionalVariant::EndpointSum, cfg)?;
    let upper = est.mean + level * est.stderr;
    if !(upper < 1.0) {
        return Ok(None);
    }
    let mut inputs = CertificateInputs::new(beta, n, Dim::One, spec, cfg, level);
    inputs.theta = Some(theta);
    Ok(Some(Certificate {
        direction: BoundDirection::Upper,
        value: upper.ln() / (theta * n as f64),
        confidence: confidence_of(level),
        method: CertificateMethod::FractionalCascade,
        inputs,
        estimate: est,
        limit: upper,
    }))
}

fn check_holder(theta: f64, delta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} must lie in (0, 1)")));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("delta = {delta} must be >= 0")));
    }
    Ok(())
}

/// `log (Q[(dQ/dQ~)^{theta/(1-theta)}])^{1-theta}` for a tilt by `-delta`
/// on `card_j` sites: `#J [(1-theta) lambda(theta delta/(1-theta)) + theta lambda(-delta)]`.
pub fn holder_log_cost(theta: f64, delta: f64, card_j: u64, spec: &DisorderSpec) -> Result<f64> {
    check_holder(theta, delta)?;
    if delta == 0.0 {
        return Ok(0.0);
    }
    let j = card_j as f64;
    match spec {
        DisorderSpec::Gaussian => Ok(theta * delta * delta * j / (2.0 * (1.0 - theta))),
        _ => holder_log_cost_general(theta, delta, card_j, spec),
    }
}

/// The tilt formula, valid for every law (used to cross-check the Gaussian
/// closed form).
pub(crate) fn holder_log_cost_general(theta: f64, delta: f64, card_j: u64, spec: &DisorderSpec) -> Result<f64> {
    check_holder(theta, delta)?;
    let a = log_mgf(spec, theta * delta / (1.0 - theta))?;
    let b = log_mgf(spec, -delta)?;
    Ok(card_j as f64 * ((1.0 - theta) * a + theta * b))
}

pub fn holder_cost(theta: f64, delta: f64, card_j: u64, spec: &DisorderSpec) -> Result<f64> {
    holder_log_cost(theta, delta, card_j, spec).map(f64::exp)
}

/// `delta_n = 1 / (n^{3/4} sqrt(2 C2 log n))`, the shift of the
/// finite-volume argument.
pub fn finite_volume_delta(n: u64, c2: f64) -> f64 {
    let nf = n as f64;
    1.0 / (nf.powf(0.75) * (2.0 * c2 * nf.ln()).sqrt())
}

/// `P exp(c #{1 <= i <= n : |S_i| <= hw})` for the simple walk in d = 1.
fn occupation_mgf(n: u64, hw: i64, c: f64) -> f64 {
    let nn = n as usize;
    let off = nn;
    let ec = c.exp();
    let mut cur = vec![0.0f64; 2 * nn + 3];
    let mut next = cur.clone();
    cur[off + 1] = 1.0;
    for i in 1..=nn {
        for (k, v) in next.iter_mut().enumerate().take(2 * nn + 2).skip(1) {
            let x = k as i64 - off as i64 - 1;
            let w = if x.abs() <= hw { ec } else { 1.0 };
            *v = 0.5 * (cur[k - 1] + cur[k + 1]) * w;
        }
        std::mem::swap(&mut cur, &mut next);
        let _ = i;
    }
    cur.iter().sum()
}

/// Audit of the shifted-measure argument in d = 1 on the region
/// `J = [1, n] x [-C2 sqrt n, C2 sqrt n]` with shift `plan.delta`:
/// (i) the Hölder factor by Monte Carlo against its closed form,
/// (ii) `E_{Q~} W_n` against the exact walk functional, and
/// (iii) the split into escape probability plus decay.
pub fn shift_measure_audit(
    beta: f64,
    plan: &CoarsePlan,
    spec: &DisorderSpec,
    cfg: &RunConfig,
    level: f64,
) -> Result<AuditReport> {
    if plan.d != Dim::One {
        return Err(Error::Unsupported("the shift audit is one-dimensional".into()));
    }
    plan.validate()?;
    let n = plan.n;
    let theta = plan.theta;
    let delta = plan.delta;
    let hw = plan.halfwidth(plan.constants.c2);
    let region = SiteSet::from_disjoint_boxes(
        Dim::One,
        vec![SiteBox { t_lo: 1, t_hi: n as i64, space: SpatialBox::ball(Dim::One, [0, 0], hw) }],
    )?;
    let card = region.cardinality();
    let shift = ShiftPlan::new(region, delta)?;
    let mut rep = AuditReport::new("shift");
    rep.note(format!("n = {n}, theta = {theta}, delta = {delta:e}, #J = {card}, half-width = {hw}"));

    // (i) Hölder factor
    let q = theta / (1.0 - theta);
    let vals = replica_map(cfg, |r| {
        let env = HashedEnvironment::new(spec, Dim::One, cfg.environment_seed(r))?;
        Ok((-q * shift_log_density(&env, &shift, spec)?).exp())
    })?;
    let s = summarize(&vals);
    let lhs = s.mean.powf(1.0 - theta);
    let se = (1.0 - theta) * s.mean.powf(-theta) * s.stderr;
    let cost = holder_cost(theta, delta, card, spec)?;
    rep.push(Check::equal("holder_factor", lhs, cost, level * se.max(0.0)));

    // (ii) mean of W_n under the shifted law
    let c = log_mgf(spec, beta - delta)? - log_mgf(spec, -delta)? - log_mgf(spec, beta)?;
    let exact = occupation_mgf(n, hw, c);
    let ws = replica_map(cfg, |r| {
        let env = ShiftedEnvironment::new(spec, &shift, cfg.environment_seed(r))?;
        Ok(quenched_partition(&env, beta, spec, n as usize)?.w())
    })?;
    let w = summarize(&ws);
    let w_se = if w.stderr.is_nan() { 0.0 } else { w.stderr };
    rep.push(Check::equal("shifted_mean_w", w.mean, exact, level * w_se));
    rep.push(Check::at_most("tilt_rate", c, -beta * delta / 2.0, 1e-15));

    // (iii) escape + decay
    let escape = escape_probability(n, hw + 1, Dim::One);
    let split = escape + (n as f64 * c).exp();
    rep.push(Check::at_most("escape_split_exact", exact, split, 0.0));
    rep.push(Check::at_most("escape_split_mc", w.mean, split, level * w_se));
    Ok(rep)
}
