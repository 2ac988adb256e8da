use serde::{Deserialize, Serialize};

use super::{Check, CheckKind, HarnessError, Point, RunContext, VerificationReport};
use crate::env_model::EnvModel;
use crate::rates::{LdpCase, Rates};
use crate::simulator::SummarySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpParams {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub epsilon: f64,
    /// An interval beyond the speed whose mass must vanish by generation `n`.
    pub empty_a: f64,
    pub empty_b: f64,
}

impl Default for LdpParams {
    fn default() -> Self {
        LdpParams {
            a: 0.5,
            b: 0.8,
            n: 20,
            epsilon: 0.1,
            empty_a: 1.3,
            empty_b: 1.5,
        }
    }
}

/// Large deviations (case I): `(1/n) ln Z_n(n[a, b])` lies between
/// `-inf_{(a,b)} Λ̃*` and `-inf_{[a,b]} Λ̃*`.
pub fn verify_ldp(model: &EnvModel, params: &LdpParams, ctx: &RunContext) -> Result<VerificationReport, HarnessError> {
    let ordered = |lo: f64, hi: f64| lo < hi;
    if !ordered(params.a, params.b) || !ordered(params.empty_a, params.empty_b) || params.n == 0 {
        return Err(HarnessError::Precondition("LDP needs a < b and n > 0".into()));
    }
    let rates = Rates::new(model)?;
    let case = rates.classify()?;
    if case.case != LdpCase::I {
        return Err(HarnessError::Precondition(format!(
            "the LDP verifier covers case I only; model is case {:?}",
            case.case
        )));
    }
    let (closed, open) = rates.legendre_inf(params.a, params.b);
    // liminf ≥ -inf over the open set, limsup ≤ -inf over the closed set
    let (lower, upper) = (-open, -closed);
    let (empty_closed, _) = rates.legendre_inf(params.empty_a, params.empty_b);

    let sim = ctx.simulator(model, params.n, ctx.seed, 1, SummarySpec::default())?;
    let mut rows = Vec::with_capacity(params.n);
    sim.run_replica(0, |gen| {
        let n = gen.index();
        if n == 0 {
            return;
        }
        let nf = n as f64;
        let count = |a: f64, b: f64| gen.positions().filter(|&x| x >= nf * a && x <= nf * b).count();
        rows.push((n, count(params.a, params.b), count(params.empty_a, params.empty_b)));
    })?;

    let mut report = VerificationReport::new(
        "ldp",
        "(1/n) ln Z_n(nA) has rate function Λ̃* (case I)",
        ctx,
        params,
        1,
        vec![ctx.seed],
    );
    report.note(format!(
        "targets: -inf over (a,b) = {lower}, -inf over [a,b] = {upper}; inf over the empty interval = {empty_closed}"
    ));
    let series = rows
        .iter()
        .map(|&(n, mass, _)| {
            let statistic = (mass as f64).ln() / n as f64;
            let discrepancy = if statistic < lower {
                lower - statistic
            } else if statistic > upper {
                statistic - upper
            } else {
                0.0
            };
            Point { n, statistic, target: upper, discrepancy }
        })
        .collect();
    report.push(Check::new(
        "rate_bracket",
        CheckKind::Statistical,
        "distance of (1/n) ln Z_n(n[a,b]) from [-inf_(a,b) Λ̃*, -inf_[a,b] Λ̃*]",
        params.epsilon,
        series,
    ));

    let zero_from = rows
        .iter()
        .rev()
        .take_while(|r| r.2 == 0)
        .last()
        .map(|r| r.0);
    match zero_from {
        Some(n0) => report.note(format!("Z_n(n[{}, {}]) = 0 for all n >= {n0}", params.empty_a, params.empty_b)),
        None => report.note(format!("Z_n(n[{}, {}]) > 0 at the final n", params.empty_a, params.empty_b)),
    }
    let series = rows
        .iter()
        .map(|&(n, _, mass)| Point {
            n,
            statistic: (mass as f64).ln() / n as f64,
            target: -empty_closed,
            discrepancy: mass as f64,
        })
        .collect();
    report.push(Check::new(
        "beyond_speed_empty",
        CheckKind::Statistical,
        "Z_n(n[empty_a, empty_b]) (must be 0)",
        0.0,
        series,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{DisplacementLaw, EnvState, ImmigrantCount, ImmigrationLaw, OffspringLaw};
    use crate::harness::testing::binary;

    #[test]
    fn interval_around_the_mean_carries_the_total_mass() {
        let model = binary(ImmigrantCount::Zero);
        let params = LdpParams { a: -0.1, b: 0.1, n: 14, ..LdpParams::default() };
        let r = verify_ldp(&model, &params, &RunContext::new(3)).unwrap();
        let c = r.check("rate_bracket").unwrap();
        let last = c.series.last().unwrap();
        assert!((last.target - std::f64::consts::LN_2).abs() < 1e-9);
        assert!(last.statistic <= std::f64::consts::LN_2);
        assert!(c.pass, "{}", r.summary());
    }

    #[test]
    fn only_case_one_is_supported() {
        let s = EnvState::new(
            OffspringLaw::Fixed { count: 2 },
            DisplacementLaw::Gaussian { mean: -3.0, std: 1.0 },
            ImmigrationLaw::none(),
        )
        .with_centered(false);
        let model = EnvModel::constant(s).unwrap();
        assert!(matches!(
            verify_ldp(&model, &LdpParams::default(), &RunContext::new(1)),
            Err(HarnessError::Precondition(_))
        ));
    }
}
