//! Environment states and stationary ergodic environment sequences.
//!
//! A state fixes the offspring law, the displacement law and the
//! immigration law for one generation. Displacements are i.i.d. and
//! independent of the offspring count given the state, so every moment
//! functional used downstream has a closed form.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Stream};

const SIMPLEX_TOL: f64 = 1e-9;
const STATIONARY_TOL: f64 = 1e-12;
const CENTERING_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("environment model has no states")]
    NoStates,
    #[error("{what}: probabilities do not form a simplex")]
    NotSimplex { what: String },
    #[error("{what}: expected {expected} entries, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("state {state}: offspring support is empty")]
    EmptySupport { state: usize },
    #[error("state {state}: {message}")]
    InvalidParameter { state: usize, message: String },
    #[error("transition matrix is not irreducible")]
    NotIrreducible,
    #[error("transition matrix is periodic (period {period})")]
    Periodic { period: usize },
}

/// Law of the relative displacement of a child from its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisplacementLaw {
    Gaussian { mean: f64, std: f64 },
    /// `±offset` with probability one half each.
    TwoPoint { offset: f64 },
}

impl DisplacementLaw {
    pub fn standard_gaussian() -> Self {
        DisplacementLaw::Gaussian { mean: 0.0, std: 1.0 }
    }

    fn check(&self) -> Result<(), String> {
        match *self {
            DisplacementLaw::Gaussian { mean, std } => {
                if !mean.is_finite() {
                    return Err(format!("gaussian mean must be finite, got {mean}"));
                }
                if !(std > 0.0 && std.is_finite()) {
                    return Err(format!("gaussian std must be positive, got {std}"));
                }
            }
            DisplacementLaw::TwoPoint { offset } => {
                if !(offset > 0.0 && offset.is_finite()) {
                    return Err(format!("two-point offset must be positive, got {offset}"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DisplacementLaw::Gaussian { mean, .. } => mean,
            DisplacementLaw::TwoPoint { .. } => 0.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            DisplacementLaw::Gaussian { mean, std } => std * std + mean * mean,
            DisplacementLaw::TwoPoint { offset } => offset * offset,
        }
    }

    /// `ln E[e^{tL}]`.
    pub fn log_mgf(&self, t: f64) -> f64 {
        match *self {
            DisplacementLaw::Gaussian { mean, std } => t * mean + 0.5 * t * t * std * std,
            DisplacementLaw::TwoPoint { offset } => log_cosh(t * offset),
        }
    }

    pub fn mgf(&self, t: f64) -> f64 {
        match *self {
            DisplacementLaw::Gaussian { .. } => self.log_mgf(t).exp(),
            DisplacementLaw::TwoPoint { offset } => (t * offset).cosh(),
        }
    }

    /// `d/dt ln E[e^{tL}]`.
    pub fn dlog_mgf(&self, t: f64) -> f64 {
        match *self {
            DisplacementLaw::Gaussian { mean, std } => mean + t * std * std,
            DisplacementLaw::TwoPoint { offset } => offset * (t * offset).tanh(),
        }
    }

    /// Limit of `dlog_mgf(t)` as `t -> +inf` (`sign = 1`) or `-inf` (`sign = -1`).
    pub fn dlog_mgf_limit(&self, sign: f64) -> f64 {
        match *self {
            DisplacementLaw::Gaussian { .. } => sign * f64::INFINITY,
            DisplacementLaw::TwoPoint { offset } => sign * offset,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DisplacementLaw::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            DisplacementLaw::TwoPoint { offset } => {
                if rng.random::<bool>() {
                    offset
                } else {
                    -offset
                }
            }
        }
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Law of the number of children of one particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringLaw {
    Fixed { count: u32 },
    Categorical { support: Vec<u32>, probs: Vec<f64> },
}

impl OffspringLaw {
    fn check(&self, state: usize) -> Result<(), ModelError> {
        if let OffspringLaw::Categorical { support, probs } = self {
            if support.is_empty() {
                return Err(ModelError::EmptySupport { state });
            }
            if support.len() != probs.len() {
                return Err(ModelError::DimensionMismatch {
                    what: format!("state {state} offspring probs"),
                    expected: support.len(),
                    found: probs.len(),
                });
            }
            if !is_simplex(probs) {
                return Err(ModelError::NotSimplex {
                    what: format!("state {state} offspring law"),
                });
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            OffspringLaw::Fixed { count } => f64::from(*count),
            OffspringLaw::Categorical { support, probs } => support
                .iter()
                .zip(probs)
                .map(|(&k, &p)| f64::from(k) * p)
                .sum(),
        }
    }

    pub fn prob(&self, k: u32) -> f64 {
        match self {
            OffspringLaw::Fixed { count } => {
                if *count == k {
                    1.0
                } else {
                    0.0
                }
            }
            OffspringLaw::Categorical { support, probs } => support
                .iter()
                .zip(probs)
                .filter(|(&s, _)| s == k)
                .map(|(_, &p)| p)
                .sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            OffspringLaw::Fixed { count } => *count,
            OffspringLaw::Categorical { support, probs } => {
                support[sample_index(probs, rng.random::<f64>())]
            }
        }
    }
}

/// Law of the number of immigrants arriving with the next generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImmigrantCount {
    Zero,
    Fixed { count: u32 },
    Poisson { rate: f64 },
}

impl ImmigrantCount {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            ImmigrantCount::Zero => 0,
            ImmigrantCount::Fixed { count } => count,
            ImmigrantCount::Poisson { rate: 0.0 } => 0,
            ImmigrantCount::Poisson { rate } => {
                let v: f64 = Poisson::new(rate)
                    .expect("rate checked at construction")
                    .sample(rng);
                v as u32
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ImmigrantCount::Zero => 0.0,
            ImmigrantCount::Fixed { count } => f64::from(count),
            ImmigrantCount::Poisson { rate } => rate,
        }
    }
}

/// Immigrant count law plus the law of their (absolute) positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmigrationLaw {
    pub count: ImmigrantCount,
    pub position: DisplacementLaw,
}

impl ImmigrationLaw {
    pub fn none() -> Self {
        ImmigrationLaw {
            count: ImmigrantCount::Zero,
            position: DisplacementLaw::standard_gaussian(),
        }
    }

    pub fn poisson(rate: f64, position: DisplacementLaw) -> Self {
        ImmigrationLaw {
            count: ImmigrantCount::Poisson { rate },
            position,
        }
    }

    fn check(&self) -> Result<(), String> {
        if let ImmigrantCount::Poisson { rate } = self.count {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(format!("poisson immigration rate must be >= 0, got {rate}"));
            }
        }
        self.position.check()
    }
}

impl Default for ImmigrationLaw {
    fn default() -> Self {
        ImmigrationLaw::none()
    }
}

fn default_centered() -> bool {
    true
}

/// One realization of the environment at a single time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub offspring: OffspringLaw,
    pub displacement: DisplacementLaw,
    #[serde(default)]
    pub immigration: ImmigrationLaw,
    /// Whether the state is meant to satisfy `E Σ L_i = 0`.
    #[serde(default = "default_centered")]
    pub centered: bool,
}

impl EnvState {
    pub fn new(offspring: OffspringLaw, displacement: DisplacementLaw, immigration: ImmigrationLaw) -> Self {
        EnvState {
            name: None,
            offspring,
            displacement,
            immigration,
            centered: true,
        }
    }

    pub fn with_centered(mut self, centered: bool) -> Self {
        self.centered = centered;
        self
    }

    fn check(&self, index: usize) -> Result<(), ModelError> {
        self.offspring.check(index)?;
        let invalid = |message| ModelError::InvalidParameter { state: index, message };
        self.displacement.check().map_err(invalid)?;
        self.immigration.check().map_err(invalid)?;
        Ok(())
    }

    pub fn mean_offspring(&self) -> f64 {
        self.offspring.mean()
    }

    /// `m(t) = E Σ_{i≤N} e^{t L_i} = E[N] · E[e^{tL}]`.
    pub fn m(&self, t: f64) -> f64 {
        self.mean_offspring() * self.displacement.mgf(t)
    }

    pub fn log_m(&self, t: f64) -> f64 {
        self.mean_offspring().ln() + self.displacement.log_mgf(t)
    }

    pub fn m_prime(&self, t: f64) -> f64 {
        self.m(t) * self.displacement.dlog_mgf(t)
    }

    /// `m'(t) / m(t)`.
    pub fn log_m_derivative(&self, t: f64) -> f64 {
        self.displacement.dlog_mgf(t)
    }

    /// `(1/m) E Σ L_i²`, which is `E[L²]` under the independence assumption.
    pub fn sigma2(&self) -> f64 {
        self.displacement.second_moment()
    }

    /// `E Σ_{i≤N} L_i`.
    pub fn mean_total_displacement(&self) -> f64 {
        self.mean_offspring() * self.displacement.mean()
    }
}

/// How the environment sequence is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    Constant,
    Iid { probs: Vec<f64> },
    Markov { transition: Vec<Vec<f64>> },
}

/// Stationary ergodic generator of environment sequences.
#[derive(Debug, Clone)]
pub struct EnvModel {
    kind: EnvKind,
    states: Arc<[EnvState]>,
    stationary: Vec<f64>,
}

impl EnvModel {
    pub fn constant(state: EnvState) -> Result<Self, ModelError> {
        state.check(0)?;
        Ok(EnvModel {
            kind: EnvKind::Constant,
            states: Arc::from(vec![state]),
            stationary: vec![1.0],
        })
    }

    pub fn iid(states: Vec<EnvState>, probs: Vec<f64>) -> Result<Self, ModelError> {
        check_states(&states)?;
        if probs.len() != states.len() {
            return Err(ModelError::DimensionMismatch {
                what: "iid state probabilities".into(),
                expected: states.len(),
                found: probs.len(),
            });
        }
        if !is_simplex(&probs) {
            return Err(ModelError::NotSimplex {
                what: "iid state probabilities".into(),
            });
        }
        Ok(EnvModel {
            stationary: probs.clone(),
            kind: EnvKind::Iid { probs },
            states: Arc::from(states),
        })
    }

    pub fn markov(states: Vec<EnvState>, transition: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        check_states(&states)?;
        let k = states.len();
        if transition.len() != k {
            return Err(ModelError::DimensionMismatch {
                what: "transition matrix rows".into(),
                expected: k,
                found: transition.len(),
            });
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != k {
                return Err(ModelError::DimensionMismatch {
                    what: format!("transition matrix row {i}"),
                    expected: k,
                    found: row.len(),
                });
            }
            if !is_simplex(row) {
                return Err(ModelError::NotSimplex {
                    what: format!("transition matrix row {i}"),
                });
            }
        }
        if !is_irreducible(&transition) {
            return Err(ModelError::NotIrreducible);
        }
        let period = period(&transition);
        if period != 1 {
            return Err(ModelError::Periodic { period });
        }
        let stationary = stationary_distribution(&transition);
        Ok(EnvModel {
            kind: EnvKind::Markov { transition },
            states: Arc::from(states),
            stationary,
        })
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn states(&self) -> &[EnvState] {
        &self.states
    }

    /// Stationary distribution `π` over `states()`.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Iterator over `(π_i, state_i)` for states with positive weight.
    pub fn weighted_states(&self) -> impl Iterator<Item = (f64, &EnvState)> + '_ {
        self.stationary
            .iter()
            .copied()
            .zip(self.states.iter())
            .filter(|(p, _)| *p > 0.0)
    }

    /// `E log m_0 = Σ π_i log E[N_i]`.
    pub fn mean_log_offspring(&self) -> f64 {
        self.weighted_states()
            .map(|(p, s)| p * s.mean_offspring().ln())
            .sum()
    }

    pub fn has_immigration(&self) -> bool {
        self.states
            .iter()
            .any(|s| s.immigration.count != ImmigrantCount::Zero)
    }

    /// Same model with immigration switched off in every state.
    pub fn without_immigration(&self) -> EnvModel {
        let states: Vec<EnvState> = self
            .states
            .iter()
            .cloned()
            .map(|mut s| {
                s.immigration.count = ImmigrantCount::Zero;
                s
            })
            .collect();
        EnvModel {
            kind: self.kind.clone(),
            states: Arc::from(states),
            stationary: self.stationary.clone(),
        }
    }

    /// Checks the standing assumptions of the process on `t_grid`.
    pub fn validate(&self, t_grid: &[f64]) -> ValidationReport {
        let mut checks = Vec::new();

        let bad: Vec<usize> = self.positive_states().filter(|(_, s)| s.offspring.prob(0) > 0.0).map(|(i, _)| i).collect();
        checks.push(ValidationCheck::from_failures("no_extinction", "P(N=0)=0 violated", &bad));

        let bad: Vec<usize> = self.positive_states().filter(|(_, s)| s.offspring.prob(1) >= 1.0).map(|(i, _)| i).collect();
        checks.push(ValidationCheck::from_failures("nondegenerate", "P(N=1)<1 violated", &bad));

        let off_center: Vec<usize> = self
            .positive_states()
            .filter(|(_, s)| s.mean_total_displacement().abs() > CENTERING_TOL)
            .map(|(i, _)| i)
            .collect();
        let flagged: Vec<usize> = off_center.iter().copied().filter(|&i| self.states[i].centered).collect();
        let centering = if !flagged.is_empty() {
            ValidationCheck::from_failures("centering", "E Σ L_i = 0 violated", &flagged)
        } else if !off_center.is_empty() {
            ValidationCheck {
                name: "centering".into(),
                outcome: CheckOutcome::Warn(format!(
                    "skipped: states {off_center:?} are declared non-centered"
                )),
            }
        } else {
            ValidationCheck::pass("centering")
        };
        checks.push(centering);

        let mlog = self.mean_log_offspring();
        checks.push(if mlog > 0.0 {
            ValidationCheck::pass("supercritical")
        } else {
            ValidationCheck {
                name: "supercritical".into(),
                outcome: CheckOutcome::Fail(format!("E log m_0 = {mlog} is not > 0")),
            }
        });

        let mut finiteness = ValidationCheck::pass("finite_m");
        'outer: for (i, s) in self.positive_states() {
            for &t in t_grid {
                let m = s.m(t);
                if !(m.is_finite() && m > 0.0) {
                    finiteness.outcome = CheckOutcome::Fail(format!("state {i}: m({t}) = {m}"));
                    break 'outer;
                }
            }
        }
        checks.push(finiteness);

        ValidationReport { checks }
    }

    fn positive_states(&self) -> impl Iterator<Item = (usize, &EnvState)> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(|(i, _)| self.stationary[*i] > 0.0)
    }

    /// Draws `ξ_0, …, ξ_{n-1}` from the environment stream of `seed`.
    pub fn sample_environment(&self, n: usize, seed: u64) -> Environment {
        let mut rng = rng::stream(seed, Stream::Environment);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Environment {
        let indices = match &self.kind {
            EnvKind::Constant => vec![0; n],
            EnvKind::Iid { probs } => (0..n).map(|_| sample_index(probs, rng.random())).collect(),
            EnvKind::Markov { transition } => {
                let mut out = Vec::with_capacity(n);
                if n > 0 {
                    let mut cur = sample_index(&self.stationary, rng.random());
                    out.push(cur);
                    for _ in 1..n {
                        cur = sample_index(&transition[cur], rng.random());
                        out.push(cur);
                    }
                }
                out
            }
        };
        Environment {
            states: Arc::clone(&self.states),
            indices,
        }
    }
}

/// A realized environment sequence `ξ_0, ξ_1, …`.
#[derive(Debug, Clone)]
pub struct Environment {
    states: Arc<[EnvState]>,
    indices: Vec<usize>,
}

impl Environment {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn state(&self, k: usize) -> &EnvState {
        &self.states[self.indices[k]]
    }

    /// State index (into the model's state list) at each time.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = &EnvState> + '_ {
        self.indices.iter().map(|&i| &self.states[i])
    }
}

impl PartialEq for Environment {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices && self.states == other.states
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum CheckOutcome {
    Pass,
    Warn(String),
    Fail(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub outcome: CheckOutcome,
}

impl ValidationCheck {
    fn pass(name: &str) -> Self {
        ValidationCheck {
            name: name.into(),
            outcome: CheckOutcome::Pass,
        }
    }

    fn from_failures(name: &str, message: &str, states: &[usize]) -> Self {
        if states.is_empty() {
            Self::pass(name)
        } else {
            ValidationCheck {
                name: name.into(),
                outcome: CheckOutcome::Fail(format!("{message} in states {states:?}")),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    /// No check failed (warnings allowed).
    pub fn is_ok(&self) -> bool {
        !self.checks.iter().any(|c| matches!(c.outcome, CheckOutcome::Fail(_)))
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| matches!(c.outcome, CheckOutcome::Fail(_)))
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| matches!(c.outcome, CheckOutcome::Warn(_)))
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name).map(|c| &c.outcome)
    }
}

impl fmt::Display for ValidationCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            CheckOutcome::Pass => write!(f, "pass {}", self.name),
            CheckOutcome::Warn(m) => write!(f, "warn {}: {m}", self.name),
            CheckOutcome::Fail(m) => write!(f, "FAIL {}: {m}", self.name),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

fn check_states(states: &[EnvState]) -> Result<(), ModelError> {
    if states.is_empty() {
        return Err(ModelError::NoStates);
    }
    states.iter().enumerate().try_for_each(|(i, s)| s.check(i))
}

fn is_simplex(p: &[f64]) -> bool {
    !p.is_empty()
        && p.iter().all(|&x| x.is_finite() && x >= 0.0)
        && (p.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

/// Inverse-CDF draw from a probability vector given `u ∈ [0, 1)`.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding slack: last state with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn reachable(adj: impl Fn(usize, usize) -> bool, k: usize) -> Vec<bool> {
    let mut seen = vec![false; k];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..k {
            if !seen[v] && adj(u, v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

fn is_irreducible(p: &[Vec<f64>]) -> bool {
    let k = p.len();
    reachable(|u, v| p[u][v] > 0.0, k).iter().all(|&x| x)
        && reachable(|u, v| p[v][u] > 0.0, k).iter().all(|&x| x)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain: gcd of `level(u) + 1 - level(v)` over edges.
fn period(p: &[Vec<f64>]) -> usize {
    let k = p.len();
    let mut level = vec![usize::MAX; k];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for v in 0..k {
            if p[u][v] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..k {
        for v in 0..k {
            if p[u][v] > 0.0 {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g
}

/// Solves `πP = π`, `Σπ = 1` by Gaussian elimination, then polishes with
/// power steps until the fixed-point residual is below tolerance.
fn stationary_distribution(p: &[Vec<f64>]) -> Vec<f64> {
    let k = p.len();
    // rows: (P^T - I) with the last equation replaced by Σπ = 1
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[k - 1] = vec![1.0; k + 1];
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty");
        a.swap(col, pivot);
        let d = a[col][col];
        for j in col..=k {
            a[col][j] /= d;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in col..=k {
                        a[r][j] -= f * a[col][j];
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = a.iter().map(|row| row[k].max(0.0)).collect();
    for _ in 0..1000 {
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= s);
        let next: Vec<f64> = (0..k).map(|j| (0..k).map(|i| pi[i] * p[i][j]).sum()).collect();
        let resid = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if resid <= STATIONARY_TOL * 0.1 {
            break;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= s);
    pi
}
