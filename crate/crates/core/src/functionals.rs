//! Per-realization functionals of the counting measures: Laplace
//! transforms, quenched normalizations, the martingales `W_n(t)` and
//! `W̄_n(t)`, immigrant transforms `Y_k(t)` and the founder decomposition.

use thiserror::Error;

use crate::env_model::Environment;
use crate::numeric::CompensatedSum;
use crate::simulator::{ImmigrationRealization, OriginTag, Trajectory};

/// Exponents beyond this magnitude switch Laplace sums to log space.
pub const LOG_SPACE_THRESHOLD: f64 = 600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("counting measure must have at least one atom")]
    EmptyMeasure,
    #[error("non-finite particle position")]
    NonFinite,
    #[error("Laplace transform overflows at t = {t}; use log_laplace")]
    Overflow { t: f64 },
    #[error("trajectory carries no founder tags")]
    MissingTags,
    #[error("founder bookkeeping mismatch: expected {expected:?}, found {found:?}")]
    TagMismatch { expected: OriginTag, found: OriginTag },
    #[error("t-grid of the trajectory and the normalizers differ")]
    GridMismatch,
    #[error("generation {n} is beyond the trajectory / environment")]
    OutOfRange { n: usize },
}

/// Range of the atoms, used to choose between the direct and the
/// log-space summation path.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceScan {
    pub min: f64,
    pub max: f64,
}

impl LaplaceScan {
    pub fn of<I: Iterator<Item = f64>>(positions: I) -> Self {
        positions.fold(
            LaplaceScan {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |s, x| LaplaceScan {
                min: s.min.min(x),
                max: s.max.max(x),
            },
        )
    }

    fn max_exponent(&self, t: f64) -> f64 {
        (t * self.min).max(t * self.max)
    }

    pub fn needs_log_space(&self, t: f64) -> bool {
        (t * self.min).abs() > LOG_SPACE_THRESHOLD || (t * self.max).abs() > LOG_SPACE_THRESHOLD
    }

    /// `ln Σ e^{t x}` over `positions` (which must be the scanned atoms).
    pub fn log_laplace<I: Iterator<Item = f64>>(&self, positions: I, t: f64) -> f64 {
        if self.min > self.max {
            return f64::NEG_INFINITY;
        }
        if t == 0.0 {
            return (positions.count() as f64).ln();
        }
        if self.needs_log_space(t) {
            let shift = self.max_exponent(t);
            let acc: CompensatedSum = positions.map(|x| (t * x - shift).exp()).collect();
            shift + acc.value().ln()
        } else {
            let acc: CompensatedSum = positions.map(|x| (t * x).exp()).collect();
            acc.value().ln()
        }
    }
}

/// `Z̃(t) = Σ_u e^{t S_u}` with compensated summation.
pub fn laplace(positions: &[f64], t: f64) -> Result<f64, FunctionalError> {
    let scan = LaplaceScan::of(positions.iter().copied());
    if scan.max_exponent(t) > f64::MAX.ln() {
        return Err(FunctionalError::Overflow { t });
    }
    let v = positions
        .iter()
        .map(|&x| (t * x).exp())
        .collect::<CompensatedSum>()
        .value();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FunctionalError::Overflow { t })
    }
}

/// `ln Z̃(t)`, switching to a shifted sum when `|t S_u|` exceeds 600.
pub fn log_laplace(positions: &[f64], t: f64) -> f64 {
    LaplaceScan::of(positions.iter().copied()).log_laplace(positions.iter().copied(), t)
}

/// Empirical counting measure `Z_n`: sorted atoms with multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingMeasure {
    positions: Vec<f64>,
}

impl CountingMeasure {
    pub fn from_positions(mut positions: Vec<f64>) -> Result<Self, FunctionalError> {
        if positions.is_empty() {
            return Err(FunctionalError::EmptyMeasure);
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(FunctionalError::NonFinite);
        }
        positions.sort_unstable_by(f64::total_cmp);
        Ok(CountingMeasure { positions })
    }

    pub(crate) fn from_sorted_unchecked(positions: Vec<f64>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] <= w[1]));
        CountingMeasure { positions }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// `Z(R)`.
    pub fn total(&self) -> usize {
        self.positions.len()
    }

    /// `Z((-inf, x])`.
    pub fn mass_at_most(&self, x: f64) -> usize {
        self.positions.partition_point(|&p| p <= x)
    }

    /// `Z((-inf, x))`.
    pub fn mass_below(&self, x: f64) -> usize {
        self.positions.partition_point(|&p| p < x)
    }

    /// `Z([x, inf))`.
    pub fn mass_at_least(&self, x: f64) -> usize {
        self.total() - self.mass_below(x)
    }

    /// `Z([a, b])`; zero when `a > b`.
    pub fn mass_in(&self, a: f64, b: f64) -> usize {
        if a > b {
            return 0;
        }
        self.mass_at_most(b) - self.mass_below(a)
    }

    /// `Z((-inf, x]) / Z(R)`.
    pub fn cdf_ratio(&self, x: f64) -> f64 {
        self.mass_at_most(x) as f64 / self.total() as f64
    }

    pub fn laplace(&self, t: f64) -> Result<f64, FunctionalError> {
        laplace(&self.positions, t)
    }

    pub fn log_laplace(&self, t: f64) -> f64 {
        log_laplace(&self.positions, t)
    }

    pub fn rightmost(&self) -> f64 {
        *self.positions.last().expect("non-empty")
    }

    pub fn leftmost(&self) -> f64 {
        self.positions[0]
    }

    /// `sup_x |Z((-inf, scale x]) / Z(R) - cdf(x)|`, evaluated exactly at
    /// both sides of every atom.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, scale: f64, cdf: F) -> f64 {
        let n = self.total() as f64;
        let mut sup: f64 = 0.0;
        let mut i = 0;
        while i < self.positions.len() {
            let x = self.positions[i];
            let mut j = i;
            while j < self.positions.len() && self.positions[j] == x {
                j += 1;
            }
            let f = cdf(x / scale);
            sup = sup.max((i as f64 / n - f).abs()).max((j as f64 / n - f).abs());
            i = j;
        }
        sup
    }
}

/// `Y_k(t) = Σ_{i ≤ V_k} e^{t S_{0_k i}}`.
pub fn immigrant_laplace(immigration: &ImmigrationRealization, k: usize, t: f64) -> f64 {
    immigration
        .positions(k)
        .iter()
        .map(|&x| (t * x).exp())
        .collect::<CompensatedSum>()
        .value()
}

/// Quenched normalizers `m_k(t)`, `Π_k(t)`, `σ_k²` and `b_n` of one
/// environment realization, tabulated on a t-grid (stored as logs).
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedNormalizers {
    t_grid: Vec<f64>,
    log_m: Vec<Vec<f64>>,
    log_pi: Vec<Vec<f64>>,
    sigma2: Vec<f64>,
    b2: Vec<f64>,
}

impl QuenchedNormalizers {
    pub fn new(env: &Environment, t_grid: &[f64]) -> Self {
        let log_m: Vec<Vec<f64>> = env
            .iter()
            .map(|s| t_grid.iter().map(|&t| s.log_m(t)).collect())
            .collect();
        let mut log_pi = Vec::with_capacity(env.len() + 1);
        log_pi.push(vec![0.0; t_grid.len()]);
        for lm in &log_m {
            let prev: &Vec<f64> = log_pi.last().expect("non-empty");
            let next = prev.iter().zip(lm).map(|(p, m)| p + m).collect();
            log_pi.push(next);
        }
        let sigma2: Vec<f64> = env.iter().map(|s| s.sigma2()).collect();
        let mut b2 = Vec::with_capacity(env.len() + 1);
        let mut acc = CompensatedSum::new();
        b2.push(0.0);
        for s in &sigma2 {
            acc.add(*s);
            b2.push(acc.value());
        }
        QuenchedNormalizers {
            t_grid: t_grid.to_vec(),
            log_m,
            log_pi,
            sigma2,
            b2,
        }
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    /// Number of environment steps covered.
    pub fn len(&self) -> usize {
        self.log_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_m.is_empty()
    }

    pub fn log_m(&self, k: usize, ti: usize) -> f64 {
        self.log_m[k][ti]
    }

    pub fn m(&self, k: usize, ti: usize) -> f64 {
        self.log_m[k][ti].exp()
    }

    pub fn log_pi(&self, n: usize, ti: usize) -> f64 {
        self.log_pi[n][ti]
    }

    pub fn pi(&self, n: usize, ti: usize) -> f64 {
        self.log_pi[n][ti].exp()
    }

    pub fn sigma2(&self, k: usize) -> f64 {
        self.sigma2[k]
    }

    pub fn b(&self, n: usize) -> f64 {
        self.b2[n].sqrt()
    }
}

fn check_grid(traj: &Trajectory, norm: &QuenchedNormalizers) -> Result<(), FunctionalError> {
    if traj.t_grid != norm.t_grid {
        return Err(FunctionalError::GridMismatch);
    }
    if traj.generations() > norm.len() {
        return Err(FunctionalError::OutOfRange { n: traj.generations() });
    }
    Ok(())
}

/// `ln W_n(t)` for every generation (outer) and grid point (inner).
pub fn log_w(traj: &Trajectory, norm: &QuenchedNormalizers) -> Result<Vec<Vec<f64>>, FunctionalError> {
    check_grid(traj, norm)?;
    Ok(traj
        .summaries
        .iter()
        .map(|s| s.log_laplace.iter().enumerate().map(|(ti, l)| l - norm.log_pi(s.n, ti)).collect())
        .collect())
}

/// `ln W̄_n(t)`, from the root-tagged restriction.
pub fn log_w_bar(traj: &Trajectory, norm: &QuenchedNormalizers) -> Result<Vec<Vec<f64>>, FunctionalError> {
    check_grid(traj, norm)?;
    Ok(traj
        .summaries
        .iter()
        .map(|s| s.log_laplace_root.iter().enumerate().map(|(ti, l)| l - norm.log_pi(s.n, ti)).collect())
        .collect())
}

pub fn w(traj: &Trajectory, norm: &QuenchedNormalizers) -> Result<Vec<Vec<f64>>, FunctionalError> {
    Ok(exp_all(log_w(traj, norm)?))
}

pub fn w_bar(traj: &Trajectory, norm: &QuenchedNormalizers) -> Result<Vec<Vec<f64>>, FunctionalError> {
    Ok(exp_all(log_w_bar(traj, norm)?))
}

fn exp_all(v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    v.into_iter().map(|row| row.into_iter().map(f64::exp).collect()).collect()
}

/// `R_n` per generation.
pub fn rightmost(traj: &Trajectory) -> Vec<f64> {
    traj.summaries.iter().map(|s| s.rightmost).collect()
}

/// Relative residual `|LHS - RHS| / LHS` of the founder decomposition
///
/// ```text
/// W_n(t) = W̄_n(t) + Σ_{k=1}^{n} Π_k(t)^{-1} Σ_{i ≤ V_{k-1}} W̄_{n-k}(0_{k-1}i, t) e^{t S_{0_{k-1}i}}
/// ```
///
/// at generation `n` and grid point `ti`. The left side is the Laplace
/// transform over all particles; the right side is assembled from the
/// recentred transforms of each founder's subtree, normalized by
/// `Π_n / Π_k`, with founder positions taken from the immigration record.
pub fn decomposition_residual(
    traj: &Trajectory,
    norm: &QuenchedNormalizers,
    n: usize,
    ti: usize,
) -> Result<f64, FunctionalError> {
    check_grid(traj, norm)?;
    let summary = traj.summaries.get(n).ok_or(FunctionalError::OutOfRange { n })?;
    let founders = summary.founders.as_ref().ok_or(FunctionalError::MissingTags)?;
    let t = traj.t_grid[ti];
    let log_pi_n = norm.log_pi(n, ti);
    let log_lhs = summary.log_laplace[ti] - log_pi_n;

    let mut founder_iter = founders.iter();
    let root = founder_iter.next().ok_or(FunctionalError::MissingTags)?;
    if root.tag != OriginTag::Root {
        return Err(FunctionalError::TagMismatch {
            expected: OriginTag::Root,
            found: root.tag,
        });
    }
    let mut rhs = CompensatedSum::new();
    let log_w_bar = root.log_laplace_recentred[ti] - log_pi_n;
    rhs.add((log_w_bar - log_lhs).exp());

    for k in 1..=n {
        let log_pi_k = norm.log_pi(k, ti);
        for (i, &s0) in traj.immigration.positions(k - 1).iter().enumerate() {
            let expected = OriginTag::Immigrant {
                generation: k as u32,
                index: i as u32 + 1,
            };
            let f = founder_iter.next().ok_or(FunctionalError::MissingTags)?;
            if f.tag != expected {
                return Err(FunctionalError::TagMismatch { expected, found: f.tag });
            }
            // W̄_{n-k}(0_{k-1}i, t): founder subtree normalized by Π_n / Π_k
            let log_w_bar_sub = f.log_laplace_recentred[ti] - (log_pi_n - log_pi_k);
            let log_term = -log_pi_k + log_w_bar_sub + t * s0;
            rhs.add((log_term - log_lhs).exp());
        }
    }
    if let Some(extra) = founder_iter.next() {
        return Err(FunctionalError::TagMismatch {
            expected: OriginTag::Root,
            found: extra.tag,
        });
    }
    Ok((1.0 - rhs.value()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{DisplacementLaw, EnvModel, EnvState, ImmigrantCount, ImmigrationLaw, OffspringLaw};
    use crate::simulator::{SimConfig, Simulator, SummarySpec};
    use proptest::prelude::*;

    const E_PLUS_INV_E: f64 = 3.086_161_269_630_487_6;

    #[test]
    fn laplace_basics() {
        assert_eq!(laplace(&[0.0], 3.7).unwrap(), 1.0);
        assert!((laplace(&[-1.0, 1.0], 1.0).unwrap() - E_PLUS_INV_E).abs() < 1e-15);
        let pts: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 5.0).collect();
        assert_eq!(laplace(&pts, 0.0).unwrap(), 1000.0);
        assert_eq!(log_laplace(&pts, 0.0), 1000f64.ln());
    }

    #[test]
    fn laplace_overflow_and_log_path() {
        let pts = [0.0, 10.0, 10.0];
        let t = 100.0;
        assert!(LaplaceScan::of(pts.iter().copied()).needs_log_space(t));
        assert_eq!(laplace(&pts, t), Err(FunctionalError::Overflow { t }));
        let expected = 1000.0 + 2f64.ln();
        assert!((log_laplace(&pts, t) - expected).abs() < 1e-12);
        // the two paths agree where both are valid
        let pts = [-3.0, 0.5, 2.0, 7.0];
        for t in [-2.0, -0.3, 0.7, 1.5] {
            let direct = laplace(&pts, t).unwrap().ln();
            assert!((direct - log_laplace(&pts, t)).abs() < 1e-14);
        }
        let far = [-700.0, -650.0, 100.0];
        let lp = log_laplace(&far, -1.0);
        let expected = 700.0 + (1.0 + (-50f64).exp() + (-800f64).exp()).ln();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn cdf_ratio_steps() {
        let z = CountingMeasure::from_positions(vec![1.0, -1.0]).unwrap();
        assert_eq!(z.cdf_ratio(0.0), 0.5);
        assert_eq!(z.cdf_ratio(-1.5), 0.0);
        assert_eq!(z.cdf_ratio(1.0), 1.0);
        assert_eq!(z.cdf_ratio(-1.0), 0.5);
        assert_eq!(z.rightmost(), 1.0);

        let sym = CountingMeasure::from_positions(vec![-2.0, -1.0, 0.0, 0.0, 1.0, 2.0]).unwrap();
        let left_limit = sym.mass_below(0.0) as f64 / sym.total() as f64;
        let atom = (sym.mass_at_most(0.0) - sym.mass_below(0.0)) as f64 / sym.total() as f64;
        assert!((sym.cdf_ratio(0.0) - left_limit - atom).abs() < 1e-15);
        assert_eq!(atom, 2.0 / 6.0);
        assert_eq!(sym.mass_in(-1.0, 1.0), 4);
        assert_eq!(sym.mass_in(1.0, -1.0), 0);
        assert_eq!(sym.mass_at_least(1.0), 2);
    }

    #[test]
    fn empty_or_nan_measures_are_rejected() {
        assert_eq!(CountingMeasure::from_positions(vec![]), Err(FunctionalError::EmptyMeasure));
        assert_eq!(CountingMeasure::from_positions(vec![f64::NAN]), Err(FunctionalError::NonFinite));
    }

    #[test]
    fn ks_distance_of_two_atoms() {
        let z = CountingMeasure::from_positions(vec![-1.0, 1.0]).unwrap();
        // uniform cdf on [-2, 2]
        let cdf = |x: f64| ((x + 2.0) / 4.0).clamp(0.0, 1.0);
        assert!((z.ks_distance(1.0, cdf) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn immigrant_transform() {
        let imm = ImmigrationRealization::from_batches(vec![vec![], vec![0.0, 0.0], vec![-1.0, 1.0]]);
        assert_eq!(immigrant_laplace(&imm, 0, 2.0), 0.0);
        assert_eq!(immigrant_laplace(&imm, 1, 5.0), 2.0);
        assert!((immigrant_laplace(&imm, 2, 1.0) - E_PLUS_INV_E).abs() < 1e-15);
        assert_eq!(immigrant_laplace(&imm, 2, 0.0), 2.0);
    }

    fn gaussian_state(count: ImmigrantCount) -> EnvState {
        EnvState::new(
            OffspringLaw::Fixed { count: 2 },
            DisplacementLaw::standard_gaussian(),
            ImmigrationLaw {
                count,
                position: DisplacementLaw::standard_gaussian(),
            },
        )
    }

    fn markov_model() -> EnvModel {
        let calm = EnvState::new(
            OffspringLaw::Categorical { support: vec![1, 3], probs: vec![0.5, 0.5] },
            DisplacementLaw::standard_gaussian(),
            ImmigrationLaw::poisson(1.0, DisplacementLaw::standard_gaussian()),
        );
        let rough = EnvState::new(
            OffspringLaw::Fixed { count: 2 },
            DisplacementLaw::TwoPoint { offset: 0.5 },
            ImmigrationLaw::poisson(1.0, DisplacementLaw::TwoPoint { offset: 1.0 }),
        );
        EnvModel::markov(vec![calm, rough], vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()
    }

    fn run(model: &EnvModel, n: usize, seed: u64, grid: Vec<f64>) -> (Trajectory, QuenchedNormalizers) {
        let sim = Simulator::new(model, SimConfig::new(n, seed), SummarySpec::new(grid.clone()).with_founders()).unwrap();
        let traj = sim.run_replica(0, |_| {}).unwrap();
        let norm = QuenchedNormalizers::new(sim.environment(), &grid);
        (traj, norm)
    }

    #[test]
    fn normalizer_recurrences() {
        let model = markov_model();
        let env = model.sample_environment(30, 4);
        let grid = [-1.0, 0.0, 0.5, 2.0];
        let norm = QuenchedNormalizers::new(&env, &grid);
        for ti in 0..grid.len() {
            assert_eq!(norm.pi(0, ti), 1.0);
            for k in 0..30 {
                let lhs = norm.pi(k + 1, ti);
                let rhs = norm.pi(k, ti) * norm.m(k, ti);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            }
        }
        for k in 0..30 {
            assert!(norm.b(k + 1) >= norm.b(k));
            let direct: f64 = (0..=k).map(|i| env.state(i).sigma2()).sum();
            assert!((norm.b(k + 1).powi(2) - direct).abs() < 1e-12);
        }
        // t = 0 gives Π_n = Π E N
        let prod: f64 = env.iter().map(|s| s.mean_offspring()).product();
        assert!((norm.pi(30, 1) / prod - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_at_generation_zero_is_one() {
        let (traj, norm) = run(&markov_model(), 5, 1, vec![-1.0, 0.0, 1.0]);
        let w = w(&traj, &norm).unwrap();
        assert!(w[0].iter().all(|&x| x == 1.0));
        let wb = w_bar(&traj, &norm).unwrap();
        assert!(wb[0].iter().all(|&x| x == 1.0));
        assert_eq!(rightmost(&traj)[0], 0.0);
    }

    #[test]
    fn no_immigration_means_w_equals_w_bar_and_exact_decomposition() {
        let model = EnvModel::constant(gaussian_state(ImmigrantCount::Zero)).unwrap();
        let grid = vec![-1.0, 0.0, 1.0];
        let (traj, norm) = run(&model, 10, 3, grid.clone());
        assert_eq!(w(&traj, &norm).unwrap(), w_bar(&traj, &norm).unwrap());
        for n in 0..=10 {
            for ti in 0..grid.len() {
                assert_eq!(decomposition_residual(&traj, &norm, n, ti).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn one_generation_decomposition_by_hand() {
        let model = EnvModel::constant(gaussian_state(ImmigrantCount::Fixed { count: 1 })).unwrap();
        let grid = vec![0.7];
        let sim = Simulator::new(&model, SimConfig::new(1, 8), SummarySpec::new(grid.clone()).with_founders()).unwrap();
        let mut g1 = None;
        let traj = sim.run_replica(0, |g| g1 = Some(g.clone())).unwrap();
        let g1 = g1.unwrap();
        let s0 = traj.immigration.positions(0)[0];
        let z1 = laplace(g1.measure().positions(), 0.7).unwrap();
        let zbar1 = laplace(g1.root().positions(), 0.7).unwrap();
        assert!((z1 - (zbar1 + (0.7 * s0).exp())).abs() < 1e-13 * z1);
        let norm = QuenchedNormalizers::new(sim.environment(), &grid);
        assert!(decomposition_residual(&traj, &norm, 1, 0).unwrap() < 1e-14);
    }

    #[test]
    fn decomposition_holds_on_markov_runs() {
        let grid = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        for seed in 0..5 {
            let (traj, norm) = run(&markov_model(), 12, seed, grid.clone());
            assert!(traj.immigration.total() > 0);
            for n in 0..=12 {
                for ti in 0..grid.len() {
                    let r = decomposition_residual(&traj, &norm, n, ti).unwrap();
                    assert!(r <= 1e-9, "seed {seed} n {n} t {}: {r}", grid[ti]);
                }
            }
        }
    }

    #[test]
    fn decomposition_requires_tags() {
        let model = markov_model();
        let grid = vec![0.0];
        let sim = Simulator::new(&model, SimConfig::new(3, 1), SummarySpec::new(grid.clone())).unwrap();
        let traj = sim.run_replica(0, |_| {}).unwrap();
        let norm = QuenchedNormalizers::new(sim.environment(), &grid);
        assert_eq!(decomposition_residual(&traj, &norm, 3, 0), Err(FunctionalError::MissingTags));
        let other = QuenchedNormalizers::new(sim.environment(), &[1.0]);
        assert_eq!(decomposition_residual(&traj, &norm, 9, 0), Err(FunctionalError::OutOfRange { n: 9 }));
        assert_eq!(log_w(&traj, &other), Err(FunctionalError::GridMismatch));
    }

    #[test]
    fn w_bar_is_a_mean_one_martingale() {
        let model = EnvModel::constant(gaussian_state(ImmigrantCount::Zero)).unwrap();
        let grid = vec![0.5];
        let n = 8;
        let sim = Simulator::new(&model, SimConfig::new(n, 31).with_replicas(1000), SummarySpec::new(grid.clone())).unwrap();
        let norm = QuenchedNormalizers::new(sim.environment(), &grid);
        let finals: Vec<f64> = sim
            .run_all()
            .unwrap()
            .iter()
            .map(|t| w_bar(t, &norm).unwrap()[n][0])
            .collect();
        let (mean, se) = crate::numeric::mean_and_se(&finals);
        assert!((mean - 1.0).abs() <= 3.0 * se, "{mean} ± {se}");
    }

    proptest! {
        #[test]
        fn laplace_is_bounded_below_by_leftmost_atom(
            pts in prop::collection::vec(-20.0f64..20.0, 1..200),
            t in -5.0f64..5.0,
        ) {
            let z = CountingMeasure::from_positions(pts).unwrap();
            let lower = z.total() as f64 * (t * z.leftmost()).min(t * z.rightmost()).exp();
            let v = z.laplace(t).unwrap();
            prop_assert!(v >= lower * (1.0 - 1e-12));
            prop_assert!((v.ln() - z.log_laplace(t)).abs() < 1e-12);
        }

        #[test]
        fn cdf_ratio_is_monotone(
            pts in prop::collection::vec(-20.0f64..20.0, 1..200),
            a in -25.0f64..25.0,
            b in -25.0f64..25.0,
        ) {
            let z = CountingMeasure::from_positions(pts).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(z.cdf_ratio(lo) <= z.cdf_ratio(hi));
            prop_assert!((0.0..=1.0).contains(&z.cdf_ratio(a)));
            prop_assert!(z.mass_in(lo, hi) <= z.total());
        }
    }
}
