use serde::{Deserialize, Serialize};

use super::{abs_point, require_centered, Check, CheckKind, HarnessError, RunContext, VerificationReport};
use crate::env_model::EnvModel;
use crate::functionals::LaplaceScan;
use crate::rates::Rates;
use crate::simulator::SummarySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpParams {
    /// Exponent of the speed `a_n = n^α`, in (1/2, 1).
    pub alpha: f64,
    /// Left end of `A = [x, inf)`.
    pub x: f64,
    pub ns: Vec<usize>,
    pub tolerance: f64,
    pub tilt_t: f64,
    pub tilt_tolerance: f64,
}

impl Default for MdpParams {
    fn default() -> Self {
        MdpParams {
            alpha: 0.7,
            x: 1.0,
            ns: vec![10, 14, 18, 22],
            tolerance: 0.2,
            tilt_t: 1.0,
            tilt_tolerance: 0.1,
        }
    }
}

/// Moderate deviations: `(n/a_n²) ln(Z_n(a_n [x, inf)) / Z_n(R)) -> -x²/(2σ²)`,
/// and the tilt diagnostic `(n/a_n²) Γ_n((a_n/n) t) -> σ² t²/2` with
/// `Γ_n(s) = ln(Z̃_n(s) / Z_n(R))`.
pub fn verify_mdp(model: &EnvModel, params: &MdpParams, ctx: &RunContext) -> Result<VerificationReport, HarnessError> {
    require_centered(model, "the moderate deviation principle")?;
    if !(params.alpha > 0.5 && params.alpha < 1.0) {
        return Err(HarnessError::Precondition(format!("alpha = {} is not in (1/2, 1)", params.alpha)));
    }
    let mut ns = params.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || ns[0] == 0 {
        return Err(HarnessError::Precondition("MDP generations must be positive".into()));
    }
    let sigma2 = Rates::new(model)?.sigma2();
    let last = *ns.last().expect("non-empty");

    let sim = ctx.simulator(model, last, ctx.seed, 1, SummarySpec::default())?;
    let mut stats = Vec::with_capacity(ns.len());
    sim.run_replica(0, |gen| {
        let n = gen.index();
        if !ns.contains(&n) {
            return;
        }
        let nf = n as f64;
        let a_n = nf.powf(params.alpha);
        let scale = nf / (a_n * a_n);
        let total = gen.len() as f64;
        let threshold = a_n * params.x;
        let tail = gen.positions().filter(|&s| s >= threshold).count() as f64;
        let deviation = scale * (tail / total).ln();
        let s = a_n / nf * params.tilt_t;
        let scan = LaplaceScan::of(gen.positions());
        let gamma = scan.log_laplace(gen.positions(), s) - total.ln();
        stats.push((n, deviation, scale * gamma));
    })?;

    let mut report = VerificationReport::new(
        "mdp",
        "(n/a_n²) ln(Z_n(a_n A)/Z_n(R)) -> -inf_A x²/(2σ²), a_n = n^α",
        ctx,
        params,
        1,
        vec![ctx.seed],
    );
    report.note(format!("sigma2 = {sigma2} (from the rates layer)"));
    let target = -params.x.max(0.0).powi(2) / (2.0 * sigma2);
    report.push(Check::new(
        "deviation",
        CheckKind::Statistical,
        "|(n/a_n²) ln(Z_n([a_n x, inf))/Z_n(R)) + x²/(2σ²)|",
        params.tolerance,
        stats.iter().map(|&(n, d, _)| abs_point(n, d, target)).collect(),
    ));
    let tilt_target = sigma2 * params.tilt_t * params.tilt_t / 2.0;
    report.push(Check::new(
        "tilt",
        CheckKind::Statistical,
        "|(n/a_n²) Γ_n((a_n/n) t) - σ² t²/2|",
        params.tilt_tolerance,
        stats.iter().map(|&(n, _, g)| abs_point(n, g, tilt_target)).collect(),
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::ImmigrantCount;
    use crate::harness::testing::binary;

    #[test]
    fn zero_threshold_statistic_is_nonpositive() {
        let model = binary(ImmigrantCount::Zero);
        let params = MdpParams { x: 0.0, ns: vec![4, 8, 12], ..MdpParams::default() };
        let r = verify_mdp(&model, &params, &RunContext::new(9)).unwrap();
        let dev = r.check("deviation").unwrap();
        assert!(dev.series.iter().all(|p| p.statistic <= 0.0 && p.target == 0.0));
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        let model = binary(ImmigrantCount::Zero);
        let params = MdpParams { alpha: 1.0, ..MdpParams::default() };
        assert!(matches!(
            verify_mdp(&model, &params, &RunContext::new(1)),
            Err(HarnessError::Precondition(_))
        ));
    }

    #[test]
    fn empty_tail_is_minus_infinity() {
        let model = binary(ImmigrantCount::Zero);
        let params = MdpParams { x: 50.0, ns: vec![6], ..MdpParams::default() };
        let r = verify_mdp(&model, &params, &RunContext::new(2)).unwrap();
        let dev = r.check("deviation").unwrap();
        assert_eq!(dev.series[0].statistic, f64::NEG_INFINITY);
        assert!(!dev.pass);
    }
}
