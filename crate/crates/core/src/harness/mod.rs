//! Statistical verification of the limit theorems against simulator output
//! and the rates layer.
//!
//! Each `verify_*` procedure returns a [`VerificationReport`]: one or more
//! [`Check`]s, each with a statistic-vs-n series, a target, a discrepancy
//! metric and a threshold. A check passes iff its discrepancy at the final
//! n is at most its threshold. Finite-n thresholds of statistical checks are
//! acceptance choices, not proven rates; reports label them as such.

mod clt;
mod decomposition;
mod free_energy;
mod ldp;
mod lp_rate;
mod martingale;
mod mdp;

pub use clt::{verify_clt, CltParams};
pub use decomposition::{verify_decomposition, DecompositionParams};
pub use free_energy::{verify_free_energy, FreeEnergyParams};
pub use ldp::{verify_ldp, LdpParams};
pub use lp_rate::{verify_lp_rate, LpRateParams};
pub use martingale::{verify_martingale, MartingaleParams};
pub use mdp::{verify_mdp, MdpParams};

use serde::Serialize;
use thiserror::Error;

use crate::env_model::{CheckOutcome, EnvModel};
use crate::functionals::FunctionalError;
use crate::output::{ext_f64, OutputError, Table};
use crate::rates::RatesError;
use crate::simulator::{SimConfig, SimError, SimMode, Simulator, SummarySpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Settings shared by every verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub seed: u64,
    pub max_particles: usize,
    /// Echoed into reports so a run can be reproduced from its output.
    pub config_hash: Option<String>,
}

impl RunContext {
    pub fn new(seed: u64) -> Self {
        RunContext {
            seed,
            max_particles: SimConfig::new(0, 0).max_particles,
            config_hash: None,
        }
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }

    pub fn with_max_particles(mut self, cap: usize) -> Self {
        self.max_particles = cap;
        self
    }

    pub(crate) fn simulator(
        &self,
        model: &EnvModel,
        generations: usize,
        seed: u64,
        replicas: usize,
        spec: SummarySpec,
    ) -> Result<Simulator, HarnessError> {
        let config = SimConfig::new(generations, seed)
            .with_mode(SimMode::QuenchedXiAndY)
            .with_replicas(replicas)
            .with_max_particles(self.max_particles);
        Ok(Simulator::new(model, config, spec)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The analytic hypotheses of the statement do not hold for this model.
    HypothesisUnmet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Holds exactly (up to floating point) for every realization.
    Exact,
    /// Finite-n proxy for a limit; the threshold is an acceptance choice.
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    pub n: usize,
    #[serde(with = "ext_f64")]
    pub statistic: f64,
    #[serde(with = "ext_f64")]
    pub target: f64,
    #[serde(with = "ext_f64")]
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    /// How `discrepancy` is computed from statistic and target.
    pub metric: String,
    #[serde(with = "ext_f64")]
    pub threshold: f64,
    pub final_n: usize,
    #[serde(with = "ext_f64")]
    pub discrepancy: f64,
    pub pass: bool,
    pub series: Vec<Point>,
}

impl Check {
    /// Builds the check from its series; the last point decides.
    pub fn new(
        name: impl Into<String>,
        kind: CheckKind,
        metric: impl Into<String>,
        threshold: f64,
        series: Vec<Point>,
    ) -> Self {
        let last = series.last().expect("a check needs at least one point");
        let (final_n, discrepancy) = (last.n, last.discrepancy);
        Check {
            name: name.into(),
            kind,
            metric: metric.into(),
            threshold,
            final_n,
            discrepancy,
            pass: discrepancy <= threshold,
            series,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub theorem: String,
    pub statement: String,
    pub status: Status,
    pub pass: bool,
    pub replicas: usize,
    pub seeds: Vec<u64>,
    pub config_hash: Option<String>,
    pub parameters: serde_json::Value,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub(crate) fn new<P: Serialize>(
        theorem: &str,
        statement: &str,
        ctx: &RunContext,
        params: &P,
        replicas: usize,
        seeds: Vec<u64>,
    ) -> Self {
        VerificationReport {
            theorem: theorem.to_string(),
            statement: statement.to_string(),
            status: Status::Pass,
            pass: true,
            replicas,
            seeds,
            config_hash: ctx.config_hash.clone(),
            parameters: serde_json::to_value(params).expect("parameters serialize"),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        if self.status != Status::HypothesisUnmet {
            self.status = if self.pass { Status::Pass } else { Status::Fail };
        }
        self.checks.push(check);
    }

    pub(crate) fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub(crate) fn hypothesis_unmet(&mut self, why: impl Into<String>) {
        self.status = Status::HypothesisUnmet;
        self.note(why);
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Only `Fail` counts as a failure; an unmet hypothesis is reported, not failed.
    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    /// The statistic-vs-n table.
    pub fn table(&self) -> Result<Table, OutputError> {
        let mut table = Table::new(["check", "n", "statistic", "target", "discrepancy", "threshold", "pass"]);
        for c in &self.checks {
            for p in &c.series {
                table.push(vec![
                    c.name.as_str().into(),
                    p.n.into(),
                    p.statistic.into(),
                    p.target.into(),
                    p.discrepancy.into(),
                    c.threshold.into(),
                    (p.discrepancy <= c.threshold).into(),
                ])?;
            }
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> Result<String, OutputError> {
        self.table()?.to_csv()
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::HypothesisUnmet => "HYPOTHESIS UNMET",
        };
        let detail: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{}={}{}{}",
                    c.name,
                    fmt_short(c.discrepancy),
                    if c.pass { "<=" } else { ">" },
                    fmt_short(c.threshold)
                )
            })
            .collect();
        format!("{} {}: {}", status, self.theorem, detail.join(", "))
    }
}

fn fmt_short(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e4) {
        format!("{x:.3e}")
    } else {
        format!("{x:.4}")
    }
}

/// Point whose discrepancy is `|statistic - target|`.
pub(crate) fn abs_point(n: usize, statistic: f64, target: f64) -> Point {
    let discrepancy = if statistic == target { 0.0 } else { (statistic - target).abs() };
    Point { n, statistic, target, discrepancy }
}

/// Fails unless the model is declared centered and passes the centering check.
pub(crate) fn require_centered(model: &EnvModel, what: &str) -> Result<(), HarnessError> {
    let report = model.validate(&[]);
    match report.check("centering") {
        Some(CheckOutcome::Pass) => Ok(()),
        _ => Err(HarnessError::Precondition(format!("{what} requires a centered model"))),
    }
}

/// Smallest standard error used as the denominator of z-scores, so that
/// deterministic quantities (zero variance) compare up to rounding.
pub(crate) const SE_FLOOR: f64 = 1e-12;

pub(crate) fn z_score(mean: f64, target: f64, se: f64) -> f64 {
    let d = (mean - target).abs();
    if d == 0.0 {
        0.0
    } else {
        d / se.max(SE_FLOOR)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn point(n: usize, d: f64) -> Point {
        Point { n, statistic: d, target: 0.0, discrepancy: d }
    }

    #[test]
    fn final_point_decides() {
        let c = Check::new("c", CheckKind::Statistical, "|s - t|", 0.1, vec![point(1, 5.0), point(2, 0.05)]);
        assert!(c.pass);
        assert_eq!(c.final_n, 2);
        let c = Check::new("c", CheckKind::Statistical, "|s - t|", 0.1, vec![point(1, 0.0), point(2, f64::INFINITY)]);
        assert!(!c.pass);
    }

    #[test]
    fn report_aggregates_and_renders() {
        let ctx = RunContext::new(3).with_config_hash("abc");
        let mut r = VerificationReport::new("demo", "statement", &ctx, &serde_json::json!({"k": 1}), 1, vec![3]);
        r.push(Check::new("a", CheckKind::Exact, "count", 0.0, vec![point(4, 0.0)]));
        assert_eq!(r.status, Status::Pass);
        r.push(Check::new("b", CheckKind::Statistical, "|s - t|", 0.1, vec![point(4, 0.2)]));
        assert_eq!(r.status, Status::Fail);
        assert!(r.failed());
        let csv = r.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().ends_with(",false"));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["config_hash"], "abc");
        assert_eq!(json["checks"][1]["kind"], "statistical");
        assert!(r.summary().starts_with("FAIL demo"));
    }

    #[test]
    fn unmet_hypothesis_is_not_a_failure() {
        let ctx = RunContext::new(0);
        let mut r = VerificationReport::new("demo", "s", &ctx, &(), 1, vec![0]);
        r.hypothesis_unmet("f_t(p) >= 0");
        r.push(Check::new("a", CheckKind::Statistical, "x", 0.0, vec![point(1, 1.0)]));
        assert_eq!(r.status, Status::HypothesisUnmet);
        assert!(!r.failed());
    }

    #[test]
    fn z_scores_tolerate_rounding_of_deterministic_values() {
        assert_eq!(z_score(1.0, 1.0, 0.0), 0.0);
        assert!(z_score(1.0 + 2e-16, 1.0, 0.0) < 1.0);
        assert_eq!(z_score(1.3, 1.0, 0.1), 3.0000000000000004);
    }
}
