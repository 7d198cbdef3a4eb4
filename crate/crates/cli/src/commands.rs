use std::time::Instant;

use clap::ValueEnum;
use serde_json::{json, Value};

use dirpoly::certificates::{
    cascade_upper_certificate, correlated_measure_audit, finite_volume_delta, penalty_measure_audit,
    percolation_lower_certificate, pinning_free_energy, pinning_free_energy_limit, replica_coupling_check,
    shift_measure_audit, AuditReport, PenaltyAuditOptions, ReplicaOptions,
};
use dirpoly::estimators::{
    estimate_fractional_moment, estimate_free_energy, estimate_variance_w, exact_variance_w, FractionalVariant,
};
use dirpoly::geometry::escape_probability;
use dirpoly::oracle::{
    brute_force_escape, brute_force_log_partition, brute_force_overlap_law, brute_force_pair_partition,
};
use dirpoly::renewal::{
    empirical_meet_probabilities, exact_visit_distribution, laplace_return, meet_probabilities, Truncation,
};
use dirpoly::transfer::{pair_pinning_partition, quenched_partition};
use dirpoly::{CoarsePlan, Dim, DisorderSpec};

use crate::config::{ConfigError, ExperimentConfig, Variant};
use crate::output::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    FreeEnergy,
    Fracmoment,
    CascadeCert,
    PercoCert,
    VarianceCheck,
    Renewal,
    ReplicaCheck,
    Pinning,
    ComAudit,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FreeEnergy => "free-energy",
            Command::Fracmoment => "fracmoment",
            Command::CascadeCert => "cascade-cert",
            Command::PercoCert => "perco-cert",
            Command::VarianceCheck => "variance-check",
            Command::Renewal => "renewal",
            Command::ReplicaCheck => "replica-check",
            Command::Pinning => "pinning",
            Command::ComAudit => "com-audit",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(#[from] dirpoly::Error),
    #[error("{0}")]
    Failed(String),
    #[error("cannot write results: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) | RunError::Failed(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    d: Dim,
    spec: DisorderSpec,
    out: &'a mut Output,
    name: &'static str,
}

impl Ctx<'_> {
    fn params(&self, extra: Value) -> Value {
        let mut p = json!({ "d": self.d.as_usize(), "disorder": self.spec.name() });
        if let (Some(p), Value::Object(e)) = (p.as_object_mut(), extra) {
            p.extend(e);
        }
        p
    }

    fn push(&mut self, params: Value, est: Option<f64>, se: Option<f64>, started: Instant, detail: Value) {
        let params = self.params(params);
        let rc = self.cfg.run_config();
        let secs = started.elapsed().as_secs_f64();
        self.out.push(self.name, params, est, se, rc.replicas, rc.seed, secs, detail);
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn audit_value(rep: &AuditReport) -> Value {
    json!({ "pass": rep.pass(), "report": to_value(rep) })
}

pub fn run(command: Command, cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let mut ctx = Ctx { cfg, d: cfg.dim()?, spec: cfg.spec()?, out, name: command.name() };
    match command {
        Command::FreeEnergy => free_energy(&mut ctx),
        Command::Fracmoment => fracmoment(&mut ctx),
        Command::CascadeCert => cascade(&mut ctx),
        Command::PercoCert => perco(&mut ctx),
        Command::VarianceCheck => variance(&mut ctx),
        Command::Renewal => renewal(&mut ctx),
        Command::ReplicaCheck => replica(&mut ctx),
        Command::Pinning => pinning(&mut ctx),
        Command::ComAudit => com_audit(&mut ctx),
        Command::Selftest => selftest(&mut ctx),
    }
}

fn free_energy(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    for &n in &ctx.cfg.grid.sizes {
        for &beta in &ctx.cfg.grid.betas {
            let t = Instant::now();
            let e = estimate_free_energy(beta, n as usize, ctx.d, &ctx.spec, &rc)?;
            ctx.out.point(&format!("free_energy_n{n}"), "beta p_N", beta, e.mean);
            ctx.push(json!({ "beta": beta, "n": n }), Some(e.mean), Some(e.stderr), t, to_value(&e));
        }
    }
    Ok(())
}

fn fracmoment(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    let variant = match ctx.cfg.grid.variant {
        Variant::Whole => FractionalVariant::Whole,
        Variant::EndpointSum => FractionalVariant::EndpointSum,
    };
    for &n in &ctx.cfg.grid.sizes {
        for &theta in &ctx.cfg.grid.thetas {
            for &beta in &ctx.cfg.grid.betas {
                let t = Instant::now();
                let e = estimate_fractional_moment(beta, n as usize, theta, ctx.d, &ctx.spec, variant, &rc)?;
                ctx.out.point(&format!("fracmoment_n{n}_theta{theta}"), "beta moment", beta, e.mean);
                let p = json!({ "beta": beta, "n": n, "theta": theta });
                ctx.push(p, Some(e.mean), Some(e.stderr), t, to_value(&e));
            }
        }
    }
    Ok(())
}

fn cascade(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    let level = ctx.cfg.certificate.level;
    for &n in &ctx.cfg.grid.sizes {
        for &theta in ctx.cfg.grid.thetas.iter().filter(|&&t| t < 1.0) {
            for &beta in &ctx.cfg.grid.betas {
                let t = Instant::now();
                let c = cascade_upper_certificate(beta, n, theta, &ctx.spec, &rc, level)?;
                let p = json!({ "beta": beta, "n": n, "theta": theta, "d": 1 });
                let est = c.as_ref().map(|c| c.value);
                ctx.push(p, est, None, t, json!({ "certificate": to_value(&c) }));
            }
        }
    }
    Ok(())
}

fn perco(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    let c = &ctx.cfg.certificate;
    let (level, p_c) = (c.level, c.p_c);
    for &n in &ctx.cfg.grid.sizes {
        for &beta in &ctx.cfg.grid.betas {
            let t = Instant::now();
            let o = percolation_lower_certificate(beta, n, &ctx.spec, &rc, p_c, level)?;
            ctx.out.point(&format!("open_probability_n{n}"), "beta q", beta, o.q.mean);
            let est = o.certificate.as_ref().map(|c| c.value);
            ctx.push(json!({ "beta": beta, "n": n, "d": 1 }), est, None, t, to_value(&o));
        }
    }
    Ok(())
}

fn variance(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    for &n in &ctx.cfg.grid.sizes {
        for &beta in &ctx.cfg.grid.betas {
            let t = Instant::now();
            let e = estimate_variance_w(beta, n as usize, ctx.d, &ctx.spec, &rc)?;
            let exact = exact_variance_w(beta, n as usize, ctx.d, &ctx.spec)?;
            ctx.out.point(&format!("variance_n{n}"), "beta var_W", beta, e.mean);
            let z = (e.mean - exact) / e.stderr;
            let detail = json!({ "exact": exact, "z": if z.is_finite() { json!(z) } else { Value::Null }, "estimate": to_value(&e) });
            ctx.push(json!({ "beta": beta, "n": n }), Some(e.mean), Some(e.stderr), t, detail);
        }
    }
    Ok(())
}

fn renewal(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    let d = ctx.d;
    let top = *ctx.cfg.grid.sizes.iter().max().unwrap_or(&1);
    let u = meet_probabilities(d, top);
    let mc = empirical_meet_probabilities(d, top, rc.replicas, rc.seed);
    for (k, &v) in u.iter().enumerate().skip(1) {
        ctx.out.point("meet_probability", "k u_k", k as f64, v);
    }
    for &n in &ctx.cfg.grid.sizes {
        let t = Instant::now();
        let un = u[n as usize];
        let scaled = match d {
            Dim::One => (std::f64::consts::PI * n as f64).sqrt() * un,
            Dim::Two => std::f64::consts::PI * n as f64 * un,
        };
        let lap = laplace_return(d, 1.0 / n as f64, Truncation::default())?;
        let visits: f64 = u[1..=n as usize].iter().sum();
        let detail = json!({
            "scaled": scaled,
            "laplace_at_inverse_n": lap.value,
            "expected_visits": visits,
            "empirical": mc[n as usize - 1].mean,
            "empirical_stderr": mc[n as usize - 1].stderr,
        });
        ctx.push(json!({ "n": n }), Some(un), Some(0.0), t, detail);
    }
    Ok(())
}

fn replica(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    let r = &ctx.cfg.replica;
    let opts = ReplicaOptions { eps: r.eps, lambdas: r.lambdas.clone(), level: ctx.cfg.certificate.level };
    let tt = r.t;
    for &n in &ctx.cfg.grid.sizes {
        for &beta in &ctx.cfg.grid.betas {
            let t = Instant::now();
            let rep = replica_coupling_check(beta, n as usize, tt, ctx.d, &ctx.spec, &rc, &opts)?;
            let fd = rep.check("phi_derivative").map(|c| c.lhs);
            ctx.push(json!({ "beta": beta, "n": n, "t": tt }), fd, None, t, audit_value(&rep));
        }
    }
    Ok(())
}

fn pinning(ctx: &mut Ctx) -> Result<(), RunError> {
    let sizes = ctx.cfg.grid.sizes.clone();
    for &h in &ctx.cfg.grid.hs {
        let t = Instant::now();
        let est = pinning_free_energy(h, &sizes, ctx.d)?;
        let limit = pinning_free_energy_limit(h, ctx.d)?;
        ctx.out.point("pinning", "h F", h, est.f);
        let ratio = if h > 0.0 { json!(2.0 * est.f / (h * h)) } else { Value::Null };
        let detail = json!({ "limit": limit, "ratio_2f_over_h2": ratio, "fit": to_value(&est) });
        ctx.push(json!({ "h": h }), Some(est.f), None, t, detail);
    }
    Ok(())
}

fn com_audit(ctx: &mut Ctx) -> Result<(), RunError> {
    let rc = ctx.cfg.run_config();
    let c = &ctx.cfg.constants;
    let n = ctx.cfg.grid.sizes[0];
    let mut plan = CoarsePlan::new(ctx.d, n, 1, ctx.cfg.audit.theta)?.with_constants(ctx.cfg.constants()?);
    plan.v_normalization = c.v_normalization;
    let delta = if c.delta >= 0.0 { c.delta } else { finite_volume_delta(n, c.c2) };
    let plan = plan.with_delta(delta);
    let level = ctx.cfg.certificate.level;

    let t = Instant::now();
    let rep = correlated_measure_audit(&plan, plan.theta)?;
    ctx.push(json!({ "n": n, "theta": plan.theta, "audit": "correlated" }), None, None, t, audit_value(&rep));

    let opts = PenaltyAuditOptions { k: ctx.cfg.audit.k, level, walks: ctx.cfg.audit.walks };
    for &beta in &ctx.cfg.grid.betas {
        if ctx.d == Dim::One {
            let t = Instant::now();
            let rep = shift_measure_audit(beta, &plan, &ctx.spec, &rc, level)?;
            let p = json!({ "beta": beta, "n": n, "theta": plan.theta, "audit": "shift", "delta": delta });
            ctx.push(p, None, None, t, audit_value(&rep));
        }
        let t = Instant::now();
        let rep = penalty_measure_audit(beta, &plan, &ctx.spec, &rc, &opts)?;
        let p = json!({ "beta": beta, "n": n, "theta": plan.theta, "audit": "penalty", "k": opts.k });
        ctx.push(p, None, None, t, audit_value(&rep));
    }
    Ok(())
}

/// Every fast algorithm against enumeration on small instances.
fn selftest(ctx: &mut Ctx) -> Result<(), RunError> {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0u64;
    let mut track = |fast: f64, slow: f64| {
        cases += 1;
        worst = worst.max((fast - slow).abs() / slow.abs().max(1e-300));
    };
    for spec in [DisorderSpec::Gaussian, DisorderSpec::Rademacher] {
        for (d, nmax) in [(Dim::One, 12usize), (Dim::Two, 6)] {
            for seed in 0..3u64 {
                let env = dirpoly::disorder::HashedEnvironment::new(&spec, d, seed)?;
                for n in 1..=nmax {
                    let fast = quenched_partition(&env, 0.7, &spec, n)?.w();
                    track(fast, brute_force_log_partition(&env, 0.7, &spec, n)?.exp());
                }
            }
        }
    }
    for (d, nmax) in [(Dim::One, 8usize), (Dim::Two, 4)] {
        for n in 1..=nmax {
            for h in [-0.5, 0.4] {
                track(pair_pinning_partition(n as u64, h, d)?.value(), brute_force_pair_partition(n, h, d)?);
            }
            let law = exact_visit_distribution(d, n as u64)?;
            for (a, b) in law.iter().zip(brute_force_overlap_law(d, n)?) {
                track(a + 1.0, b + 1.0);
            }
            for hw in 1..4 {
                track(escape_probability(n as u64, hw, d) + 1.0, brute_force_escape(n, hw, d)? + 1.0);
            }
        }
    }
    let pass = worst <= 1e-12;
    let detail = json!({ "cases": cases, "max_relative_error": worst, "pass": pass });
    ctx.push(json!({}), Some(worst), None, t, detail);
    if pass {
        Ok(())
    } else {
        Err(RunError::Failed(format!("selftest: relative error {worst:e} exceeds 1e-12")))
    }
}
