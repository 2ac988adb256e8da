//! Analytic layer: `Λ(t) = E log m_0(t)`, the critical points `t_±`, the
//! linearized free energy `Λ̄`, its positive part `Λ̃`, the Legendre
//! transform `Λ̃*` and the large-deviation case classification.
//!
//! Everything is an exact weighted sum over the stationary law of the
//! (finite) environment; no quadrature is involved.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::env_model::EnvModel;
use crate::numeric::{bisect, golden_section_max, linspace};
use crate::output::{ext_f64, ext_f64_opt, OutputError, Table};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RatesError {
    #[error("model is not supercritical: Λ(0) = {lambda0}")]
    NotSupercritical { lambda0: f64 },
    #[error(
        "configuration matches none of the three cases: t1 = {t1}, t2 = {t2}, t- = {t_minus}, t+ = {t_plus}"
    )]
    UnclassifiedCase {
        t1: f64,
        t2: f64,
        t_minus: f64,
        t_plus: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Bisection tolerance in `t`.
    pub tol: f64,
    /// Bracket expansion stops here; no sign change by then means ±inf.
    pub t_cap: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            tol: 1e-10,
            t_cap: 1e6,
        }
    }
}

/// `t_- ≤ 0 ≤ t_+`, either possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoints {
    #[serde(with = "ext_f64")]
    pub lower: f64,
    #[serde(with = "ext_f64")]
    pub upper: f64,
}

impl CriticalPoints {
    pub fn contains(&self, t: f64) -> bool {
        self.lower < t && t < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEnergy {
    /// `Λ̄(t)`
    pub bar: f64,
    /// `Λ̃(t) = max{Λ̄(t), 0}`
    pub tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LdpCase {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseClassification {
    #[serde(with = "ext_f64")]
    pub t1: f64,
    #[serde(with = "ext_f64")]
    pub t2: f64,
    pub case: LdpCase,
    /// Exposed points of `Λ̃*` for cases II and III.
    pub exposed: Option<(f64, f64)>,
}

/// Rate functions of one environment model.
#[derive(Debug, Clone)]
pub struct Rates {
    model: EnvModel,
    options: RootOptions,
    critical: CriticalPoints,
}

impl Rates {
    pub fn new(model: &EnvModel) -> Result<Self, RatesError> {
        Self::with_options(model, RootOptions::default())
    }

    pub fn with_options(model: &EnvModel, options: RootOptions) -> Result<Self, RatesError> {
        let mut rates = Rates {
            model: model.clone(),
            options,
            critical: CriticalPoints {
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            },
        };
        let lambda0 = rates.lambda(0.0);
        if lambda0.is_nan() || lambda0 <= 0.0 {
            return Err(RatesError::NotSupercritical { lambda0 });
        }
        rates.critical = rates.find_critical_points();
        Ok(rates)
    }

    pub fn model(&self) -> &EnvModel {
        &self.model
    }

    pub fn lambda(&self, t: f64) -> f64 {
        self.model.weighted_states().map(|(p, s)| p * s.log_m(t)).sum()
    }

    /// `Λ'(t)`; at `t = ±inf` the limit of `Λ'`.
    pub fn lambda_prime(&self, t: f64) -> f64 {
        if t.is_infinite() {
            return self.lambda_prime_limit(t.signum());
        }
        self.model
            .weighted_states()
            .map(|(p, s)| p * s.log_m_derivative(t))
            .sum()
    }

    fn lambda_prime_limit(&self, sign: f64) -> f64 {
        self.model
            .weighted_states()
            .map(|(p, s)| p * s.displacement.dlog_mgf_limit(sign))
            .sum()
    }

    /// `σ² = E σ_0²`.
    pub fn sigma2(&self) -> f64 {
        self.model.weighted_states().map(|(p, s)| p * s.sigma2()).sum()
    }

    /// `f_t(p) = Λ(pt)/p - Λ(t)`.
    pub fn f_t(&self, t: f64, p: f64) -> f64 {
        self.lambda(p * t) / p - self.lambda(t)
    }

    fn g(&self, t: f64) -> f64 {
        t * self.lambda_prime(t) - self.lambda(t)
    }

    /// Expands `[0, ±w]` until `f` turns positive, then bisects.
    fn first_positive(&self, f: impl Fn(f64) -> f64, sign: f64) -> f64 {
        self.first_positive_within(f, sign, self.options.t_cap)
    }

    fn first_positive_within(&self, f: impl Fn(f64) -> f64, sign: f64, span: f64) -> f64 {
        let mut inner = 0.0;
        let mut w = 1.0;
        while w <= span {
            if f(sign * w) > 0.0 {
                let (lo, hi) = if sign > 0.0 { (inner, w) } else { (-w, -inner) };
                return bisect(&f, lo, hi, self.options.tol);
            }
            inner = w;
            w *= 2.0;
        }
        sign * f64::INFINITY
    }

    fn find_critical_points(&self) -> CriticalPoints {
        CriticalPoints {
            lower: self.first_positive(|t| self.g(t), -1.0),
            upper: self.first_positive(|t| self.g(t), 1.0),
        }
    }

    pub fn critical_points(&self) -> CriticalPoints {
        self.critical
    }

    pub fn lambda_bar(&self, t: f64) -> f64 {
        let cp = self.critical;
        if t >= cp.upper {
            t * self.lambda_prime(cp.upper)
        } else if t <= cp.lower {
            t * self.lambda_prime(cp.lower)
        } else {
            self.lambda(t)
        }
    }

    pub fn lambda_tilde(&self, t: f64) -> f64 {
        self.lambda_bar(t).max(0.0)
    }

    pub fn free_energy(&self, t: f64) -> FreeEnergy {
        let bar = self.lambda_bar(t);
        FreeEnergy { bar, tilde: bar.max(0.0) }
    }

    /// Asymptotic slopes `(s_-, s_+)` of `Λ̃` at `-inf` and `+inf`; `Λ̃*`
    /// is finite exactly on `[s_-, s_+]`.
    pub fn tilde_slopes(&self) -> (f64, f64) {
        let cp = self.critical;
        let right = self.lambda_prime(cp.upper).max(0.0);
        let left = self.lambda_prime(cp.lower).min(0.0);
        (left, right)
    }

    /// `Λ̃*(x) = sup_t {x t - Λ̃(t)}`; `+inf` outside the slope range.
    pub fn legendre(&self, x: f64) -> f64 {
        let (left, right) = self.tilde_slopes();
        if x > right || x < left {
            return f64::INFINITY;
        }
        let h = |t: f64| x * t - self.lambda_tilde(t);
        let grid = linspace(-8.0, 8.0, 161);
        let values: Vec<f64> = grid.iter().map(|&t| h(t)).collect();
        let best = (0..grid.len())
            .max_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("non-empty grid");
        let cap = self.options.t_cap;
        let (lo, hi) = if best == 0 {
            match expand_bracket(&h, grid[0], -1.0, cap) {
                Some(b) => b,
                None => return h(-cap),
            }
        } else if best == grid.len() - 1 {
            match expand_bracket(&h, grid[best], 1.0, cap) {
                Some(b) => b,
                None => return h(cap),
            }
        } else {
            (grid[best - 1], grid[best + 1])
        };
        let tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let (_, v) = golden_section_max(h, lo, hi, tol);
        v.max(values[best])
    }

    /// `(t_1, t_2)`: the extent of `{t : Λ(t) < 0}`, `(-inf, +inf)` when empty.
    pub fn negative_region(&self) -> (f64, f64) {
        let none = (f64::NEG_INFINITY, f64::INFINITY);
        let cap = self.options.t_cap;
        let lp0 = self.lambda_prime(0.0);
        let t_min = if lp0 == 0.0 {
            0.0
        } else {
            let sign = -lp0.signum();
            // Λ' increasing: look for its sign change on the descent side
            let root = self.first_positive(|t| sign * self.lambda_prime(t), sign);
            if root.is_finite() {
                root
            } else {
                sign * cap
            }
        };
        if self.lambda(t_min) >= 0.0 {
            return none;
        }
        let shift = |sign: f64| move |u: f64| self.lambda(t_min + sign * u.abs());
        let span = 2.0 * self.options.t_cap;
        let left = self.first_positive_within(shift(-1.0), 1.0, span);
        let right = self.first_positive_within(shift(1.0), 1.0, span);
        (t_min - left, t_min + right)
    }

    pub fn classify(&self) -> Result<CaseClassification, RatesError> {
        let (t1, t2) = self.negative_region();
        let cp = self.critical;
        let case = if t1 == f64::NEG_INFINITY && t2 == f64::INFINITY {
            LdpCase::I
        } else if t1 < cp.lower && cp.lower < t2 && t2 < 0.0 {
            LdpCase::II
        } else if 0.0 < t1 && t1 < cp.upper && cp.upper < t2 {
            LdpCase::III
        } else {
            return Err(RatesError::UnclassifiedCase {
                t1,
                t2,
                t_minus: cp.lower,
                t_plus: cp.upper,
            });
        };
        let exposed = match case {
            LdpCase::I => None,
            LdpCase::II => Some((self.lambda_prime(t2), self.lambda_prime(cp.upper))),
            LdpCase::III => Some((self.lambda_prime(cp.lower), self.lambda_prime(t1))),
        };
        Ok(CaseClassification { t1, t2, case, exposed })
    }

    /// `inf_{x ∈ [a, b]} Λ̃*(x)` (closed) and `inf_{x ∈ (a, b)} Λ̃*(x)` (open).
    pub fn legendre_inf(&self, a: f64, b: f64) -> (f64, f64) {
        let (left, right) = self.tilde_slopes();
        let lo = a.max(left);
        let hi = b.min(right);
        if lo > hi {
            return (f64::INFINITY, f64::INFINITY);
        }
        // Λ̃* is convex: golden section on the negated function
        let tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let closed = if lo == hi {
            self.legendre(lo)
        } else {
            -golden_section_max(|x| -self.legendre(x), lo, hi, tol).1
        };
        // the open interval misses the domain only if it touches it at a single point
        let open = if a.max(left) < b.min(right) || (a < left && right < b) {
            closed
        } else {
            f64::INFINITY
        };
        (closed, open)
    }

    pub fn table(&self, t_grid: &[f64], x_grid: &[f64]) -> RateTable {
        let per_t: Vec<(f64, f64, f64, f64)> = t_grid
            .par_iter()
            .map(|&t| {
                let fe = self.free_energy(t);
                (self.lambda(t), self.lambda_prime(t), fe.bar, fe.tilde)
            })
            .collect();
        let legendre: Vec<f64> = x_grid.par_iter().map(|&x| self.legendre(x)).collect();
        let (t1, t2) = self.negative_region();
        let (case, exposed) = match self.classify() {
            Ok(c) => (CaseLabel::from(c.case), c.exposed),
            Err(_) => (CaseLabel::Unclassified, None),
        };
        RateTable {
            t_grid: t_grid.to_vec(),
            lambda: per_t.iter().map(|r| r.0).collect(),
            lambda_prime: per_t.iter().map(|r| r.1).collect(),
            lambda_bar: per_t.iter().map(|r| r.2).collect(),
            lambda_tilde: per_t.iter().map(|r| r.3).collect(),
            x_grid: x_grid.to_vec(),
            legendre,
            t_minus: self.critical.lower,
            t_plus: self.critical.upper,
            t1,
            t2,
            case,
            exposed,
            sigma2: self.sigma2(),
            lambda_0: self.lambda(0.0),
            lambda_prime_0: self.lambda_prime(0.0),
            continuity_gap: self.continuity_gap(),
        }
    }

    /// `max |Λ(t_±) - t_± Λ'(t_±)|` over the finite critical points.
    fn continuity_gap(&self) -> f64 {
        [self.critical.lower, self.critical.upper]
            .into_iter()
            .filter(|t| t.is_finite())
            .map(|t| (self.lambda(t) - t * self.lambda_prime(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Walks outward from `start` in doubling steps while `h` keeps
/// increasing; returns a bracket of the maximum.
fn expand_bracket(h: &impl Fn(f64) -> f64, start: f64, dir: f64, cap: f64) -> Option<(f64, f64)> {
    let mut prev = start - dir * 0.1;
    let mut cur = start;
    let mut h_cur = h(cur);
    let mut step = 1.0;
    while cur.abs() < cap {
        let next = (cur + dir * step).clamp(-cap, cap);
        let h_next = h(next);
        if h_next < h_cur {
            return Some(if dir > 0.0 { (prev, next) } else { (next, prev) });
        }
        prev = cur;
        cur = next;
        h_cur = h_next;
        step *= 2.0;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    I,
    II,
    III,
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl From<LdpCase> for CaseLabel {
    fn from(c: LdpCase) -> Self {
        match c {
            LdpCase::I => CaseLabel::I,
            LdpCase::II => CaseLabel::II,
            LdpCase::III => CaseLabel::III,
        }
    }
}

/// Tabulated rate functions plus the scalar summary of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub t_grid: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_prime: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    pub lambda_tilde: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub legendre: Vec<f64>,
    pub t_minus: f64,
    pub t_plus: f64,
    pub t1: f64,
    pub t2: f64,
    pub case: CaseLabel,
    pub exposed: Option<(f64, f64)>,
    pub sigma2: f64,
    pub lambda_0: f64,
    pub lambda_prime_0: f64,
    pub continuity_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub pass: bool,
    #[serde(with = "ext_f64")]
    pub worst: f64,
}

const CONVEXITY_TOL: f64 = 1e-9;

fn min_second_difference(v: &[f64]) -> f64 {
    v.windows(3)
        .filter(|w| w.iter().all(|x| x.is_finite()))
        .map(|w| w[0] - 2.0 * w[1] + w[2])
        .fold(f64::INFINITY, f64::min)
}

impl RateTable {
    /// Grid-level checks of convexity, monotonicity, continuity and the
    /// conjugate's lower bound.
    pub fn invariants(&self) -> Vec<InvariantCheck> {
        let mut out = Vec::new();
        let mut push = |name, worst: f64, pass: bool| out.push(InvariantCheck { name, pass, worst });

        let d2 = min_second_difference(&self.lambda);
        push("lambda_convex", d2, d2 >= -CONVEXITY_TOL);
        let d1 = self
            .lambda_prime
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        push("lambda_prime_nondecreasing", d1, d1 >= -CONVEXITY_TOL);
        push("lambda_bar_continuous", self.continuity_gap, self.continuity_gap <= 1e-9);
        let d2 = min_second_difference(&self.lambda_tilde);
        push("lambda_tilde_convex", d2, d2 >= -CONVEXITY_TOL);
        let d2 = min_second_difference(&self.legendre);
        push("legendre_convex", d2, d2 >= -CONVEXITY_TOL);
        let floor = -self.lambda_0.max(0.0);
        let gap = self
            .legendre
            .iter()
            .map(|v| v - floor)
            .fold(f64::INFINITY, f64::min);
        push("legendre_lower_bound", gap, gap >= -CONVEXITY_TOL);
        out
    }

    /// Columns `t, lambda, lambda_prime, lambda_bar, lambda_tilde`.
    pub fn t_table(&self) -> Result<Table, OutputError> {
        let mut table = Table::new(["t", "lambda", "lambda_prime", "lambda_bar", "lambda_tilde"]);
        for i in 0..self.t_grid.len() {
            table.push(vec![
                self.t_grid[i].into(),
                self.lambda[i].into(),
                self.lambda_prime[i].into(),
                self.lambda_bar[i].into(),
                self.lambda_tilde[i].into(),
            ])?;
        }
        Ok(table)
    }

    /// Columns `x, legendre`.
    pub fn x_table(&self) -> Result<Table, OutputError> {
        let mut table = Table::new(["x", "legendre"]);
        for (x, v) in self.x_grid.iter().zip(&self.legendre) {
            table.push(vec![(*x).into(), (*v).into()])?;
        }
        Ok(table)
    }

    pub fn header(&self) -> RateHeader {
        RateHeader {
            t_minus: self.t_minus,
            t_plus: self.t_plus,
            t1: self.t1,
            t2: self.t2,
            case: self.case,
            exposed_lower: self.exposed.map(|e| e.0),
            exposed_upper: self.exposed.map(|e| e.1),
            sigma2: self.sigma2,
            lambda_0: self.lambda_0,
            lambda_prime_0: self.lambda_prime_0,
            invariants: self.invariants(),
        }
    }
}

/// Scalar summary of a [`RateTable`], the JSON side of the `rates` output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateHeader {
    #[serde(with = "ext_f64")]
    pub t_minus: f64,
    #[serde(with = "ext_f64")]
    pub t_plus: f64,
    #[serde(with = "ext_f64")]
    pub t1: f64,
    #[serde(with = "ext_f64")]
    pub t2: f64,
    pub case: CaseLabel,
    /// Exposed points are `(exposed_lower, exposed_upper)` in cases II and III.
    #[serde(with = "ext_f64_opt")]
    pub exposed_lower: Option<f64>,
    #[serde(with = "ext_f64_opt")]
    pub exposed_upper: Option<f64>,
    pub sigma2: f64,
    pub lambda_0: f64,
    pub lambda_prime_0: f64,
    pub invariants: Vec<InvariantCheck>,
}

pub fn lambda(model: &EnvModel, t: f64) -> Result<f64, RatesError> {
    Ok(Rates::new(model)?.lambda(t))
}

pub fn lambda_prime(model: &EnvModel, t: f64) -> Result<f64, RatesError> {
    Ok(Rates::new(model)?.lambda_prime(t))
}

pub fn critical_points(model: &EnvModel) -> Result<CriticalPoints, RatesError> {
    Ok(Rates::new(model)?.critical_points())
}

pub fn free_energy(model: &EnvModel, t: f64) -> Result<FreeEnergy, RatesError> {
    Ok(Rates::new(model)?.free_energy(t))
}

pub fn legendre(model: &EnvModel, x: f64) -> Result<f64, RatesError> {
    Ok(Rates::new(model)?.legendre(x))
}

pub fn classify_case(model: &EnvModel) -> Result<CaseClassification, RatesError> {
    Rates::new(model)?.classify()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{DisplacementLaw, EnvState, ImmigrationLaw, OffspringLaw};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn gaussian(mean: f64, std: f64) -> EnvState {
        EnvState::new(
            OffspringLaw::Fixed { count: 2 },
            DisplacementLaw::Gaussian { mean, std },
            ImmigrationLaw::none(),
        )
        .with_centered(mean == 0.0)
    }

    fn reference() -> Rates {
        Rates::new(&EnvModel::constant(gaussian(0.0, 1.0)).unwrap()).unwrap()
    }

    fn two_state() -> EnvModel {
        EnvModel::iid(vec![gaussian(0.0, 1.0), gaussian(0.0, 2.0)], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn lambda_closed_forms() {
        let r = reference();
        assert!((r.lambda(0.0) - LN2).abs() < 1e-15);
        for t in [-3.0, -1.0, 0.5, 1.0, 2.5] {
            assert!((r.lambda(t) - (LN2 + t * t / 2.0)).abs() < 1e-14);
            let h = 1e-6;
            let fd = (r.lambda(t + h) - r.lambda(t - h)) / (2.0 * h);
            assert!((fd - r.lambda_prime(t)).abs() < 1e-7);
        }
        assert_eq!(r.lambda_prime(1.0), 1.0);
    }

    #[test]
    fn two_state_lambda_matches_monte_carlo_over_states() {
        let model = two_state();
        let r = Rates::new(&model).unwrap();
        // weighted sum against ln2 + 1.25 t²
        for t in [-1.0, 0.3, 1.0] {
            assert!((r.lambda(t) - (LN2 + 1.25 * t * t)).abs() < 1e-14);
        }
        // sampled-state oracle for E log m_0(t)
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let env = model.sample_with(1_000_000, &mut rng);
        let t = 1.0;
        let samples: Vec<f64> = env.iter().map(|s| s.log_m(t)).collect();
        let (mc, se) = crate::numeric::mean_and_se(&samples);
        assert!((mc - r.lambda(t)).abs() < 4.0 * se, "{mc} ± {se}");
    }

    #[test]
    fn critical_points_of_reference_models() {
        let cp = reference().critical_points();
        let expected = (2.0 * LN2).sqrt();
        assert!((cp.upper - expected).abs() < 1e-9);
        assert!((cp.lower + expected).abs() < 1e-9);

        let cp = critical_points(&two_state()).unwrap();
        let expected = (2.0 * LN2 / 2.5).sqrt();
        assert!((cp.upper - expected).abs() < 1e-9);
        assert!((cp.lower + expected).abs() < 1e-9);

        let flat = EnvModel::constant(gaussian(0.0, 1e-12)).unwrap();
        let cp = critical_points(&flat).unwrap();
        assert_eq!(cp.upper, f64::INFINITY);
        assert_eq!(cp.lower, f64::NEG_INFINITY);
    }

    #[test]
    fn bounded_slope_never_catches_up() {
        // two-point with E N = 3: g(t) -> ln(2/3) < 0
        let s = EnvState::new(
            OffspringLaw::Fixed { count: 3 },
            DisplacementLaw::TwoPoint { offset: 1.0 },
            ImmigrationLaw::none(),
        );
        let r = Rates::new(&EnvModel::constant(s).unwrap()).unwrap();
        assert_eq!(r.critical_points().upper, f64::INFINITY);
        assert_eq!(r.tilde_slopes(), (-1.0, 1.0));
        assert!(r.legendre(1.5).is_infinite());
        // Λ̃*(1) = lim t - ln 3 - ln cosh t = ln 2 - ln 3
        assert!((r.legendre(1.0) - (2f64 / 3.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn free_energy_branches() {
        let r = reference();
        let tp = r.critical_points().upper;
        for t in [-1.0, 0.0, 0.7] {
            assert_eq!(r.lambda_bar(t), r.lambda(t));
        }
        assert!((r.lambda_bar(2.0) - 2.0 * (2.0 * LN2).sqrt()).abs() < 1e-9);
        assert!((r.lambda_bar(-2.0) - 2.0 * (2.0 * LN2).sqrt()).abs() < 1e-9);
        // continuity at t_+
        assert!((r.lambda(tp) - tp * r.lambda_prime(tp)).abs() < 1e-9);
        for t in linspace(-4.0, 4.0, 81) {
            let fe = r.free_energy(t);
            assert_eq!(fe.tilde, fe.bar);
        }
    }

    #[test]
    fn legendre_of_reference_model() {
        let r = reference();
        assert!((r.legendre(0.0) + LN2).abs() < 1e-12);
        let v = (2.0 * LN2).sqrt();
        for x in [-1.1, -0.5, 0.25, 1.0] {
            assert!((r.legendre(x) - (x * x / 2.0 - LN2)).abs() < 1e-10, "x = {x}");
        }
        // the domain edge is only known to the root tolerance; probe just inside it
        let edge = r.tilde_slopes().1;
        assert!((edge - v).abs() < 1e-9);
        assert!(r.legendre(edge).abs() < 1e-9);
        let x = v - 1e-6;
        assert!((r.legendre(x) - (x * x / 2.0 - LN2)).abs() < 1e-9);
        assert_eq!(r.legendre(2.0), f64::INFINITY);
        assert_eq!(r.legendre(-2.0), f64::INFINITY);
    }

    #[test]
    fn legendre_inf_over_intervals() {
        let r = reference();
        let (closed, open) = r.legendre_inf(0.5, 0.8);
        assert!((closed - (0.125 - LN2)).abs() < 1e-9);
        assert_eq!(closed, open);
        let (closed, _) = r.legendre_inf(-0.1, 0.1);
        assert!((closed + LN2).abs() < 1e-9);
        assert_eq!(r.legendre_inf(1.3, 1.5), (f64::INFINITY, f64::INFINITY));
        let edge = r.tilde_slopes().1;
        // [edge, 2] touches the domain at a single point
        let (closed, open) = r.legendre_inf(edge, 2.0);
        assert!(closed.abs() < 1e-9);
        assert_eq!(open, f64::INFINITY);
    }

    #[test]
    fn classification_of_reference_models() {
        let c = reference().classify().unwrap();
        assert_eq!(c.case, LdpCase::I);
        assert_eq!((c.t1, c.t2), (f64::NEG_INFINITY, f64::INFINITY));
        assert_eq!(c.exposed, None);

        let disc = (9.0 - 2.0 * LN2).sqrt();
        let left = Rates::new(&EnvModel::constant(gaussian(-3.0, 1.0)).unwrap()).unwrap();
        let c = left.classify().unwrap();
        assert_eq!(c.case, LdpCase::III);
        assert!((c.t1 - (3.0 - disc)).abs() < 1e-9);
        assert!((c.t2 - (3.0 + disc)).abs() < 1e-9);
        let tp = left.critical_points().upper;
        assert!(0.0 < c.t1 && c.t1 < tp && tp < c.t2);
        let (a, b) = c.exposed.unwrap();
        assert!((a - (-3.0 - (2.0 * LN2).sqrt())).abs() < 1e-9);
        assert!((b - (-3.0 + 3.0 - disc)).abs() < 1e-9);

        let right = Rates::new(&EnvModel::constant(gaussian(3.0, 1.0)).unwrap()).unwrap();
        let c = right.classify().unwrap();
        assert_eq!(c.case, LdpCase::II);
        assert!((c.t1 + 3.0 + disc).abs() < 1e-9);
        assert!((c.t2 + 3.0 - disc).abs() < 1e-9);
    }

    #[test]
    fn unsupported_configuration_is_reported() {
        // nearly deterministic drift: Λ(t) ≈ ln 2 + t is negative on a half-line
        let r = Rates::new(&EnvModel::constant(gaussian(1.0, 1e-12)).unwrap()).unwrap();
        let (t1, t2) = r.negative_region();
        assert_eq!(t1, f64::NEG_INFINITY);
        assert!((t2 + LN2).abs() < 1e-9);
        assert!(matches!(r.classify(), Err(RatesError::UnclassifiedCase { .. })));
    }

    #[test]
    fn subcritical_model_is_rejected() {
        let s = EnvState::new(
            OffspringLaw::Categorical { support: vec![0, 1], probs: vec![0.5, 0.5] },
            DisplacementLaw::standard_gaussian(),
            ImmigrationLaw::none(),
        );
        assert!(matches!(
            Rates::new(&EnvModel::constant(s).unwrap()),
            Err(RatesError::NotSupercritical { .. })
        ));
    }

    #[test]
    fn f_t_reference_values() {
        let r = reference();
        for t in [-1.0, 0.5, 2.0] {
            assert!(r.f_t(t, 1.0).abs() < 1e-15);
        }
        assert!((r.f_t(0.5, 2.0) - (0.125 - LN2 / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn header_and_tables_render() {
        let r = reference();
        let table = r.table(&linspace(-2.0, 2.0, 5), &[0.0, 2.0]);
        let json = serde_json::to_value(table.header()).unwrap();
        assert_eq!(json["case"], "I");
        assert_eq!(json["t1"], "-inf");
        assert!((json["t_plus"].as_f64().unwrap() - 1.177_410_022_515_474_7).abs() < 1e-9);
        assert!(json["exposed_lower"].is_null());
        let csv = table.x_table().unwrap().to_csv().unwrap();
        assert_eq!(csv.lines().last().unwrap(), "2.0000000000000000e0,inf");
        assert_eq!(table.t_table().unwrap().rows().len(), 5);
    }

    #[test]
    fn table_invariants_hold() {
        let r = reference();
        let table = r.table(&linspace(-4.0, 4.0, 81), &linspace(-1.5, 1.5, 61));
        assert_eq!(table.case, CaseLabel::I);
        for c in table.invariants() {
            assert!(c.pass, "{c:?}");
        }
        let r = Rates::new(&two_state()).unwrap();
        for c in r.table(&linspace(-4.0, 4.0, 81), &linspace(-3.0, 3.0, 121)).invariants() {
            assert!(c.pass, "{c:?}");
        }
    }
}
