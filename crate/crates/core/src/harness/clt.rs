use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{abs_point, require_centered, Check, CheckKind, HarnessError, Point, RunContext, VerificationReport};
use crate::env_model::EnvModel;
use crate::functionals::QuenchedNormalizers;
use crate::numeric::{median, normal_cdf};
use crate::rng::run_seed;
use crate::simulator::SummarySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltParams {
    /// Generation of the main KS check.
    pub n: usize,
    pub threshold: f64,
    /// Generations of the median-over-seeds trend check.
    pub trend_ns: Vec<usize>,
    pub trend_seeds: usize,
}

impl Default for CltParams {
    fn default() -> Self {
        CltParams {
            n: 18,
            threshold: 0.05,
            trend_ns: vec![10, 14, 18],
            trend_seeds: 5,
        }
    }
}

/// KS distance between `Z_n(-inf, b_n x] / Z_n(R)` and `Φ(x)` at each requested n.
fn ks_series(model: &EnvModel, ctx: &RunContext, seed: u64, ns: &[usize]) -> Result<Vec<f64>, HarnessError> {
    let last = *ns.iter().max().expect("non-empty");
    let sim = ctx.simulator(model, last, seed, 1, SummarySpec::default())?;
    let norm = QuenchedNormalizers::new(sim.environment(), &[]);
    let mut out = vec![f64::NAN; ns.len()];
    sim.run_replica(0, |gen| {
        for (slot, &n) in ns.iter().enumerate() {
            if gen.index() == n {
                out[slot] = gen.measure().ks_distance(norm.b(n), normal_cdf);
            }
        }
    })?;
    Ok(out)
}

/// Quenched CLT: `sup_x |Z_n(-inf, b_n x]/Z_n(R) - Φ(x)|` along one
/// environment realization, plus the trend of its median over seeds.
pub fn verify_clt(model: &EnvModel, params: &CltParams, ctx: &RunContext) -> Result<VerificationReport, HarnessError> {
    require_centered(model, "the central limit theorem")?;
    if params.n == 0 || params.trend_ns.contains(&0) {
        return Err(HarnessError::Precondition("CLT generations must be positive".into()));
    }
    let sigma2: f64 = model.weighted_states().map(|(p, s)| p * s.sigma2()).sum();
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(HarnessError::Precondition(format!("E σ_0² = {sigma2} is not in (0, inf)")));
    }
    let mut main_ns: Vec<usize> = params.trend_ns.iter().copied().chain([params.n]).collect();
    main_ns.sort_unstable();
    main_ns.dedup();
    main_ns.retain(|&k| k <= params.n);

    let seeds: Vec<u64> = (0..params.trend_seeds.max(1) as u64).map(|i| run_seed(ctx.seed, i)).collect();
    let mut report = VerificationReport::new(
        "clt",
        "Z_n(-inf, b_n x] / Z_n(R) -> Φ(x) a.s.",
        ctx,
        params,
        1,
        seeds.clone(),
    );

    let main = ks_series(model, ctx, ctx.seed, &main_ns)?;
    let series: Vec<Point> = main_ns.iter().zip(&main).map(|(&n, &d)| abs_point(n, d, 0.0)).collect();
    report.push(Check::new(
        "ks_distance",
        CheckKind::Statistical,
        "sup_x |Z_n(-inf, b_n x]/Z_n(R) - Φ(x)|, exact over atoms",
        params.threshold,
        series,
    ));

    if params.trend_ns.len() >= 2 {
        let per_seed: Vec<Vec<f64>> = seeds
            .par_iter()
            .map(|&s| ks_series(model, ctx, s, &params.trend_ns))
            .collect::<Result<_, _>>()?;
        let medians: Vec<f64> = (0..params.trend_ns.len())
            .map(|j| median(&per_seed.iter().map(|v| v[j]).collect::<Vec<_>>()))
            .collect();
        let mut series = Vec::new();
        let mut worst_rise = f64::NEG_INFINITY;
        for j in 0..medians.len() {
            if j > 0 {
                worst_rise = worst_rise.max(medians[j] - medians[j - 1]);
            }
            let discrepancy = if j == 0 { f64::NEG_INFINITY } else { worst_rise };
            series.push(Point {
                n: params.trend_ns[j],
                statistic: medians[j],
                target: 0.0,
                discrepancy,
            });
        }
        report.push(Check::new(
            "median_trend",
            CheckKind::Statistical,
            "largest increase of the median KS distance between consecutive n",
            0.0,
            series,
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::ImmigrantCount;
    use crate::harness::testing::binary;

    #[test]
    fn rejects_uncentered_models() {
        let s = crate::env_model::EnvState::new(
            crate::env_model::OffspringLaw::Fixed { count: 2 },
            crate::env_model::DisplacementLaw::Gaussian { mean: 0.3, std: 1.0 },
            crate::env_model::ImmigrationLaw::none(),
        )
        .with_centered(false);
        let model = EnvModel::constant(s).unwrap();
        let err = verify_clt(&model, &CltParams::default(), &RunContext::new(1)).unwrap_err();
        assert!(matches!(err, HarnessError::Precondition(_)));
    }

    #[test]
    fn report_layout_and_seed_reuse() {
        let model = binary(ImmigrantCount::Zero);
        let params = CltParams { n: 12, threshold: 0.05, trend_ns: vec![6, 12], trend_seeds: 3 };
        let r = verify_clt(&model, &params, &RunContext::new(5)).unwrap();
        let ks = r.check("ks_distance").unwrap();
        assert_eq!(ks.series.iter().map(|p| p.n).collect::<Vec<_>>(), vec![6, 12]);
        assert!(ks.series.iter().all(|p| p.statistic > 0.0 && p.statistic < 1.0));
        let trend = r.check("median_trend").unwrap();
        assert_eq!(trend.series.len(), 2);
        assert_eq!(trend.series[0].discrepancy, f64::NEG_INFINITY);
        assert_eq!(trend.discrepancy, trend.series[1].statistic - trend.series[0].statistic);
        assert_eq!(r.seeds, vec![5, 6, 7]);
    }
}
