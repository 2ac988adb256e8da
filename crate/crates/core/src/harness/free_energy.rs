use serde::{Deserialize, Serialize};

use super::{abs_point, Check, CheckKind, HarnessError, Point, RunContext, VerificationReport};
use crate::env_model::EnvModel;
use crate::functionals::log_laplace;
use crate::rates::Rates;
use crate::simulator::SummarySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreeEnergyParams {
    pub n: usize,
    pub ts: Vec<f64>,
    /// Tolerance for `t ∈ (t_-, t_+)`.
    pub inner_tolerance: f64,
    /// Tolerance on the linearized branch.
    pub outer_tolerance: f64,
    /// Slack of the annealed bound `(1/n) ln Z̃_n(t) ≤ Λ(t) + ε` checked outside `(t_-, t_+)`.
    pub upper_slack: f64,
}

impl Default for FreeEnergyParams {
    fn default() -> Self {
        FreeEnergyParams {
            n: 20,
            ts: vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
            inner_tolerance: 0.05,
            outer_tolerance: 0.15,
            upper_slack: 0.05,
        }
    }
}

/// Free energy: `(1/n) ln Z̃_n(t) -> Λ̃(t)`, plus the exact lower-bound
/// mechanism `Z̃_n(t) ≥ max{Z̄_n(t), Y_{n-1}(t)}` at every generation.
pub fn verify_free_energy(
    model: &EnvModel,
    params: &FreeEnergyParams,
    ctx: &RunContext,
) -> Result<VerificationReport, HarnessError> {
    if params.n == 0 || params.ts.is_empty() {
        return Err(HarnessError::Precondition("free energy needs n > 0 and a non-empty t-grid".into()));
    }
    let rates = Rates::new(model)?;
    let critical = rates.critical_points();
    let sim = ctx.simulator(model, params.n, ctx.seed, 1, SummarySpec::new(params.ts.clone()))?;
    let traj = sim.run_replica(0, |_| {})?;

    let mut report = VerificationReport::new(
        "free_energy",
        "(1/n) ln Z̃_n(t) -> Λ̃(t) a.s.",
        ctx,
        params,
        1,
        vec![ctx.seed],
    );
    report.note(format!("t- = {}, t+ = {}", critical.lower, critical.upper));

    for (ti, &t) in params.ts.iter().enumerate() {
        let target = rates.lambda_tilde(t);
        let series = traj.summaries[1..]
            .iter()
            .map(|s| abs_point(s.n, s.log_laplace[ti] / s.n as f64, target))
            .collect();
        let inner = critical.contains(t);
        let tolerance = if inner { params.inner_tolerance } else { params.outer_tolerance };
        report.push(Check::new(
            format!("free_energy[t={t}]"),
            CheckKind::Statistical,
            "|(1/n) ln Z̃_n(t) - Λ̃(t)|",
            tolerance,
            series,
        ));
        if !inner {
            let bound = rates.lambda(t);
            let series = traj.summaries[1..]
                .iter()
                .map(|s| {
                    let statistic = s.log_laplace[ti] / s.n as f64;
                    Point { n: s.n, statistic, target: bound, discrepancy: statistic - bound }
                })
                .collect();
            report.push(Check::new(
                format!("annealed_bound[t={t}]"),
                CheckKind::Statistical,
                "(1/n) ln Z̃_n(t) - Λ(t)",
                params.upper_slack,
                series,
            ));
        }
    }

    // Exact: compare logs of the full transform, the root part and the
    // batch that has just immigrated.
    let mut violations = 0usize;
    let mut series = Vec::with_capacity(traj.summaries.len());
    for s in &traj.summaries {
        let mut worst = f64::NEG_INFINITY;
        for (ti, &t) in params.ts.iter().enumerate() {
            let y = if s.n == 0 {
                f64::NEG_INFINITY
            } else {
                log_laplace(traj.immigration.positions(s.n - 1), t)
            };
            let gap = s.log_laplace_root[ti].max(y) - s.log_laplace[ti];
            if gap > 0.0 {
                violations += 1;
            }
            worst = worst.max(gap);
        }
        series.push(Point {
            n: s.n,
            statistic: worst,
            target: 0.0,
            discrepancy: violations as f64,
        });
    }
    report.push(Check::new(
        "lower_bound_mechanism",
        CheckKind::Exact,
        "cumulative count of (n, t) with max{ln Z̄_n(t), ln Y_{n-1}(t)} > ln Z̃_n(t)",
        0.0,
        series,
    ));
    Ok(report)
}
