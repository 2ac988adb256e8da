use serde::{Deserialize, Serialize};

use super::{z_score, Check, CheckKind, HarnessError, Point, RunContext, VerificationReport, SE_FLOOR};
use crate::env_model::EnvModel;
use crate::functionals::{immigrant_laplace, w, w_bar, QuenchedNormalizers};
use crate::numeric::mean_and_se;
use crate::simulator::SummarySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MartingaleParams {
    pub ts: Vec<f64>,
    pub n: usize,
    pub replicas: usize,
    /// Allowed distance from the target in standard errors.
    pub se_factor: f64,
}

impl Default for MartingaleParams {
    fn default() -> Self {
        MartingaleParams {
            ts: vec![0.0, 0.5, 1.0],
            n: 10,
            replicas: 500,
            se_factor: 3.0,
        }
    }
}

/// Under `P_{ξ,Y}`: `E W̄_n(t) = 1` and
/// `E W_n(t) = 1 + Σ_{k=1}^n Y_{k-1}(t) / Π_k(t)`, nondecreasing in n.
pub fn verify_martingale(
    model: &EnvModel,
    params: &MartingaleParams,
    ctx: &RunContext,
) -> Result<VerificationReport, HarnessError> {
    if params.replicas < 2 || params.ts.is_empty() {
        return Err(HarnessError::Precondition("martingale check needs >= 2 replicas and a t-grid".into()));
    }
    let grid = params.ts.clone();
    let sim = ctx.simulator(model, params.n, ctx.seed, params.replicas, SummarySpec::new(grid.clone()))?;
    let norm = QuenchedNormalizers::new(sim.environment(), &grid);
    let trajectories = sim.run_all()?;
    let immigration = sim.immigration(0);
    let ws: Vec<Vec<Vec<f64>>> = trajectories.iter().map(|t| w(t, &norm)).collect::<Result<_, _>>()?;
    let wbars: Vec<Vec<Vec<f64>>> = trajectories.iter().map(|t| w_bar(t, &norm)).collect::<Result<_, _>>()?;

    let mut report = VerificationReport::new(
        "martingale",
        "W̄_n(t) is a mean-one martingale and W_n(t) a sub-martingale under P_{ξ,Y}",
        ctx,
        params,
        params.replicas,
        vec![ctx.seed],
    );
    let column = |v: &[Vec<Vec<f64>>], n: usize, ti: usize| v.iter().map(|r| r[n][ti]).collect::<Vec<f64>>();

    for (ti, &t) in grid.iter().enumerate() {
        let mut bar_series = Vec::new();
        let mut w_series = Vec::new();
        let mut mono_series = Vec::new();
        let (mut bar_worst, mut w_worst, mut mono_worst) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
        let mut target = 1.0;
        for n in 0..=params.n {
            if n > 0 {
                target += immigrant_laplace(&immigration, n - 1, t) / norm.pi(n, ti);
            }
            let (mean, se) = mean_and_se(&column(&wbars, n, ti));
            bar_worst = bar_worst.max(z_score(mean, 1.0, se));
            bar_series.push(Point { n, statistic: mean, target: 1.0, discrepancy: bar_worst });

            let now = column(&ws, n, ti);
            let (mean, se) = mean_and_se(&now);
            w_worst = w_worst.max(z_score(mean, target, se));
            w_series.push(Point { n, statistic: mean, target, discrepancy: w_worst });

            if n > 0 {
                let before = column(&ws, n - 1, ti);
                let increments: Vec<f64> = now.iter().zip(&before).map(|(a, b)| a - b).collect();
                let (step, se) = mean_and_se(&increments);
                let drop = if step >= 0.0 { 0.0 } else { -step / se.max(SE_FLOOR) };
                mono_worst = mono_worst.max(drop);
                mono_series.push(Point { n, statistic: step, target: 0.0, discrepancy: mono_worst });
            }
        }
        report.push(Check::new(
            format!("w_bar_mean[t={t}]"),
            CheckKind::Statistical,
            "max over generations so far of |mean W̄_n - 1| / SE",
            params.se_factor,
            bar_series,
        ));
        report.push(Check::new(
            format!("w_mean[t={t}]"),
            CheckKind::Statistical,
            "max over generations so far of |mean W_n - (1 + Σ Y_{k-1}/Π_k)| / SE",
            params.se_factor,
            w_series,
        ));
        if !mono_series.is_empty() {
            report.push(Check::new(
                format!("w_mean_nondecreasing[t={t}]"),
                CheckKind::Statistical,
                "max over generations so far of the drop of mean W_n in SEs of the paired increment",
                params.se_factor,
                mono_series,
            ));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{ImmigrantCount, OffspringLaw};
    use crate::harness::testing::{binary, gaussian_state};

    #[test]
    fn generation_zero_is_exactly_one() {
        let model = binary(ImmigrantCount::Poisson { rate: 1.0 });
        let params = MartingaleParams { ts: vec![0.5], n: 3, replicas: 50, se_factor: 3.0 };
        let r = verify_martingale(&model, &params, &RunContext::new(2)).unwrap();
        for name in ["w_bar_mean[t=0.5]", "w_mean[t=0.5]"] {
            let p = &r.check(name).unwrap().series[0];
            assert_eq!((p.n, p.statistic, p.target, p.discrepancy), (0, 1.0, 1.0, 0.0));
        }
    }

    #[test]
    fn without_immigration_both_targets_are_one() {
        let model = EnvModel::constant(gaussian_state(
            OffspringLaw::Categorical { support: vec![1, 3], probs: vec![0.5, 0.5] },
            ImmigrantCount::Zero,
        ))
        .unwrap();
        let params = MartingaleParams { ts: vec![0.0, 0.5], n: 6, replicas: 300, se_factor: 3.0 };
        let r = verify_martingale(&model, &params, &RunContext::new(11)).unwrap();
        let bar = r.check("w_bar_mean[t=0.5]").unwrap();
        let full = r.check("w_mean[t=0.5]").unwrap();
        assert!(full.series.iter().all(|p| p.target == 1.0));
        assert_eq!(bar.series, full.series);
        assert!(r.pass, "{}", r.summary());
    }
}
