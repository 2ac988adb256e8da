use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Check, CheckKind, HarnessError, Point, RunContext, VerificationReport};
use crate::env_model::EnvModel;
use crate::functionals::{decomposition_residual, QuenchedNormalizers};
use crate::rng::run_seed;
use crate::simulator::SummarySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecompositionParams {
    pub n: usize,
    pub ts: Vec<f64>,
    pub runs: usize,
    pub threshold: f64,
}

impl Default for DecompositionParams {
    fn default() -> Self {
        DecompositionParams {
            n: 12,
            ts: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            runs: 20,
            threshold: 1e-9,
        }
    }
}

/// Founder decomposition of `Z̃_n(t)` into the root subtree and the
/// subtrees of every immigrant, checked per run, generation and t.
pub fn verify_decomposition(
    model: &EnvModel,
    params: &DecompositionParams,
    ctx: &RunContext,
) -> Result<VerificationReport, HarnessError> {
    if params.runs == 0 || params.ts.is_empty() {
        return Err(HarnessError::Precondition("decomposition needs runs > 0 and a t-grid".into()));
    }
    let seeds: Vec<u64> = (0..params.runs as u64).map(|i| run_seed(ctx.seed, i)).collect();
    let grid = params.ts.clone();
    // per run: worst relative residual at each generation
    let per_run: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let spec = SummarySpec::new(grid.clone()).with_founders();
            let sim = ctx.simulator(model, params.n, seed, 1, spec)?;
            let norm = QuenchedNormalizers::new(sim.environment(), &grid);
            let traj = sim.run_replica(0, |_| {})?;
            (0..=params.n)
                .map(|n| {
                    (0..grid.len()).try_fold(0.0f64, |worst, ti| {
                        Ok::<_, HarnessError>(worst.max(decomposition_residual(&traj, &norm, n, ti)?))
                    })
                })
                .collect()
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut report = VerificationReport::new(
        "decomposition",
        "Z̃_n(t) = Π_n(t) [W̄_n(t) + Σ_k Σ_i e^{t S_{0_{k-1} i}} W̄_{n-k}(0_{k-1} i, t) / Π_k(t)]",
        ctx,
        params,
        1,
        seeds,
    );
    let mut worst = 0.0f64;
    let series = (0..=params.n)
        .map(|n| {
            let here = per_run.iter().map(|r| r[n]).fold(0.0, f64::max);
            worst = worst.max(here);
            Point { n, statistic: here, target: 0.0, discrepancy: worst }
        })
        .collect();
    report.push(Check::new(
        "relative_residual",
        CheckKind::Exact,
        "max over runs, t and generations so far of |1 - RHS/LHS|",
        params.threshold,
        series,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::ImmigrantCount;
    use crate::harness::testing::binary;

    #[test]
    fn no_immigration_residual_is_zero() {
        let model = binary(ImmigrantCount::Zero);
        let params = DecompositionParams { n: 8, runs: 3, ..DecompositionParams::default() };
        let r = verify_decomposition(&model, &params, &RunContext::new(1)).unwrap();
        assert_eq!(r.checks[0].discrepancy, 0.0);
    }

    #[test]
    fn immigration_residual_is_tiny() {
        let model = binary(ImmigrantCount::Poisson { rate: 2.0 });
        let params = DecompositionParams { n: 10, runs: 4, ..DecompositionParams::default() };
        let r = verify_decomposition(&model, &params, &RunContext::new(1)).unwrap();
        assert!(r.pass, "{}", r.summary());
        assert_eq!(r.seeds, vec![1, 2, 3, 4]);
    }
}
