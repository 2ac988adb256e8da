use serde::{Deserialize, Serialize};

use super::{Check, CheckKind, HarnessError, Point, RunContext, VerificationReport};
use crate::env_model::EnvModel;
use crate::functionals::{w, QuenchedNormalizers};
use crate::rates::Rates;
use crate::simulator::SummarySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpRateParams {
    pub t: f64,
    pub p: f64,
    pub n: usize,
    pub replicas: usize,
    pub tolerance: f64,
}

impl Default for LpRateParams {
    fn default() -> Self {
        LpRateParams {
            t: 0.5,
            p: 2.0,
            n: 14,
            replicas: 200,
            tolerance: 0.1,
        }
    }
}

/// `L^p` convergence rate of `W_n(t)` under `P_{ξ,Y}`:
/// `(1/n) ln (E_{ξ,Y}|W_{n+1}(t) - W_n(t)|^p)^{1/p} ≤ max{-Λ(t), f_t(p)} + ε`.
pub fn verify_lp_rate(
    model: &EnvModel,
    params: &LpRateParams,
    ctx: &RunContext,
) -> Result<VerificationReport, HarnessError> {
    if params.n == 0 || params.replicas == 0 {
        return Err(HarnessError::Precondition("L^p rate needs n > 0 and replicas > 0".into()));
    }
    let rates = Rates::new(model)?;
    let (t, p) = (params.t, params.p);
    let lambda_t = rates.lambda(t);
    let f = rates.f_t(t, p);
    let target = (-lambda_t).max(f);

    let mut report = VerificationReport::new(
        "lp_rate",
        "(1/n) ln ||W_{n+1}(t) - W_n(t)||_p ≤ max{-Λ(t), f_t(p)} eventually, a.s.",
        ctx,
        params,
        params.replicas,
        vec![ctx.seed],
    );
    report.note(format!("Λ(t) = {lambda_t}, f_t(p) = {f}, target = {target}"));
    let mut unmet = Vec::new();
    if !(p > 1.0 && p <= 2.0) {
        unmet.push(format!("p = {p} is not in (1, 2]"));
    }
    if lambda_t.is_nan() || lambda_t <= 0.0 {
        unmet.push(format!("Λ(t) = {lambda_t} is not positive"));
    }
    if f.is_nan() || f >= 0.0 {
        unmet.push(format!("f_t(p) = {f} is not negative"));
    }
    if !unmet.is_empty() {
        report.hypothesis_unmet(format!("hypothesis unmet: {}", unmet.join("; ")));
    }

    let grid = vec![t];
    let sim = ctx.simulator(model, params.n + 1, ctx.seed, params.replicas, SummarySpec::new(grid.clone()))?;
    let norm = QuenchedNormalizers::new(sim.environment(), &grid);
    let trajectories = sim.run_all()?;
    let ws: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|traj| w(traj, &norm).map(|rows| rows.iter().map(|r| r[0]).collect()))
        .collect::<Result<_, _>>()?;

    let series = (1..=params.n)
        .map(|n| {
            let moment = ws.iter().map(|w| (w[n + 1] - w[n]).abs().powf(p)).sum::<f64>() / ws.len() as f64;
            let statistic = moment.ln() / (p * n as f64);
            Point { n, statistic, target, discrepancy: statistic - target }
        })
        .collect();
    report.push(Check::new(
        "rate",
        CheckKind::Statistical,
        "(1/n) ln (mean |W_{n+1} - W_n|^p)^{1/p} - max{-Λ(t), f_t(p)}",
        params.tolerance,
        series,
    ));
    Ok(report)
}
