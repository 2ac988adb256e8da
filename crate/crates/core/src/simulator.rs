//! Forward simulation of the branching random walk with immigration under
//! the quenched law.
//!
//! Only the current generation is kept in memory. Particles are stored in
//! founder groups: the root's descendants first, then one group per
//! immigrant in order of arrival. Immigrants drawn at time `k` (the batch
//! `V_k`) join generation `k + 1` at absolute positions and carry the tag
//! `Immigrant { generation: k + 1, index: i }`.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env_model::{EnvModel, EnvState, Environment, ValidationReport};
use crate::functionals::{self, CountingMeasure, LaplaceScan};
use crate::rng::{self, Stream};

#[derive(Debug, Error, Clone)]
pub enum SimError {
    #[error("model failed validation:\n{0}")]
    InvalidModel(ValidationReport),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(
        "particle cap {cap} exceeded while building generation {generation} \
         (last complete generation: {reached})"
    )]
    CapExceeded {
        generation: usize,
        reached: usize,
        cap: usize,
    },
}

/// Founding ancestor of a particle: the initial particle or an immigrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OriginTag {
    Root,
    /// Immigrant `i` (1-based) that joined generation `generation`.
    Immigrant { generation: u32, index: u32 },
}

/// All particles descending from one founder.
#[derive(Debug, Clone, PartialEq)]
pub struct FounderGroup {
    pub tag: OriginTag,
    /// Position of the founder when it joined the process.
    pub origin: f64,
    positions: Vec<f64>,
}

impl FounderGroup {
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    index: usize,
    groups: Vec<FounderGroup>,
}

impl Generation {
    /// Generation 0: one particle at the origin.
    pub fn initial() -> Self {
        Generation {
            index: 0,
            groups: vec![FounderGroup {
                tag: OriginTag::Root,
                origin: 0.0,
                positions: vec![0.0],
            }],
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(FounderGroup::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn groups(&self) -> &[FounderGroup] {
        &self.groups
    }

    pub fn root(&self) -> &FounderGroup {
        &self.groups[0]
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.groups.iter().flat_map(|g| g.positions.iter().copied())
    }

    pub fn particles(&self) -> impl Iterator<Item = (f64, OriginTag)> + '_ {
        self.groups
            .iter()
            .flat_map(|g| g.positions.iter().map(move |&x| (x, g.tag)))
    }

    pub fn rightmost(&self) -> f64 {
        self.positions().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn measure(&self) -> CountingMeasure {
        CountingMeasure::from_sorted_unchecked(sorted(self.positions().collect()))
    }

    /// Counting measure of the descendants of the initial particle only.
    pub fn root_measure(&self) -> CountingMeasure {
        CountingMeasure::from_sorted_unchecked(sorted(self.root().positions.clone()))
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// The immigrant batches `Y_k = (V_k, S_{0_k 1}, …, S_{0_k V_k})`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImmigrationRealization {
    batches: Vec<Vec<f64>>,
}

impl ImmigrationRealization {
    pub fn sample(env: &Environment, rng: &mut ChaCha8Rng) -> Self {
        let batches = env
            .iter()
            .map(|state| {
                let law = &state.immigration;
                let count = law.count.sample(rng);
                (0..count).map(|_| law.position.sample(rng)).collect()
            })
            .collect();
        ImmigrationRealization { batches }
    }

    pub fn from_batches(batches: Vec<Vec<f64>>) -> Self {
        ImmigrationRealization { batches }
    }

    /// `n` empty batches.
    pub fn none(n: usize) -> Self {
        ImmigrationRealization {
            batches: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// `V_k`.
    pub fn count(&self, k: usize) -> usize {
        self.batches[k].len()
    }

    pub fn positions(&self, k: usize) -> &[f64] {
        &self.batches[k]
    }

    pub fn total(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimMode {
    /// Environment fixed across replicas; immigration redrawn per replica.
    #[serde(rename = "quenched_xi")]
    QuenchedXi,
    /// Environment and immigration both fixed across replicas.
    #[serde(rename = "quenched_xi_and_Y")]
    QuenchedXiAndY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub generations: usize,
    pub seed: u64,
    pub max_particles: usize,
    pub mode: SimMode,
    pub replicas: usize,
}

impl SimConfig {
    pub fn new(generations: usize, seed: u64) -> Self {
        SimConfig {
            generations,
            seed,
            max_particles: 1 << 25,
            mode: SimMode::QuenchedXiAndY,
            replicas: 1,
        }
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_max_particles(mut self, cap: usize) -> Self {
        self.max_particles = cap;
        self
    }

    fn check(&self) -> Result<(), SimError> {
        if self.generations == 0 {
            return Err(SimError::InvalidConfig("n_generations must be >= 1".into()));
        }
        if self.max_particles == 0 {
            return Err(SimError::InvalidConfig("max_particles must be >= 1".into()));
        }
        if self.replicas == 0 {
            return Err(SimError::InvalidConfig("replicas must be >= 1".into()));
        }
        Ok(())
    }
}

/// One branching stream per founder group of a replica.
#[derive(Debug, Clone)]
pub struct BranchingStreams {
    seed: u64,
    replica: u32,
    rngs: Vec<ChaCha8Rng>,
}

impl BranchingStreams {
    pub fn new(seed: u64, replica: u32) -> Self {
        let mut s = BranchingStreams {
            seed,
            replica,
            rngs: Vec::new(),
        };
        s.push_founder();
        s
    }

    fn push_founder(&mut self) {
        let founder = u32::try_from(self.rngs.len()).expect("founder count fits in u32");
        self.rngs.push(rng::stream(
            self.seed,
            Stream::Branching {
                replica: self.replica,
                founder,
            },
        ));
    }
}

/// Replaces every particle by its children and appends the immigrant batch.
pub fn step(
    gen: &Generation,
    state: &EnvState,
    immigrants: &[f64],
    streams: &mut BranchingStreams,
    max_particles: usize,
) -> Result<Generation, SimError> {
    assert_eq!(streams.rngs.len(), gen.groups.len(), "one branching stream per founder group");
    let next_index = gen.index + 1;
    let cap_error = || SimError::CapExceeded {
        generation: next_index,
        reached: gen.index,
        cap: max_particles,
    };
    let mean = state.mean_offspring();
    let mut total = 0usize;
    let mut groups = Vec::with_capacity(gen.groups.len() + immigrants.len());
    for (group, rng) in gen.groups.iter().zip(streams.rngs.iter_mut()) {
        let expected = (group.len() as f64 * mean).ceil() as usize;
        let mut children = Vec::with_capacity(expected.min(max_particles));
        for &x in &group.positions {
            let n = state.offspring.sample(rng) as usize;
            total += n;
            if total > max_particles {
                return Err(cap_error());
            }
            for _ in 0..n {
                children.push(x + state.displacement.sample(rng));
            }
        }
        groups.push(FounderGroup {
            tag: group.tag,
            origin: group.origin,
            positions: children,
        });
    }
    for (i, &pos) in immigrants.iter().enumerate() {
        total += 1;
        if total > max_particles {
            return Err(cap_error());
        }
        streams.push_founder();
        groups.push(FounderGroup {
            tag: OriginTag::Immigrant {
                generation: next_index as u32,
                index: i as u32 + 1,
            },
            origin: pos,
            positions: vec![pos],
        });
    }
    Ok(Generation {
        index: next_index,
        groups,
    })
}

/// Which per-generation functionals to record while streaming.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummarySpec {
    pub t_grid: Vec<f64>,
    /// Also record recentred Laplace transforms of every founder subtree.
    pub per_founder: bool,
}

impl SummarySpec {
    pub fn new(t_grid: Vec<f64>) -> Self {
        SummarySpec {
            t_grid,
            per_founder: false,
        }
    }

    pub fn with_founders(mut self) -> Self {
        self.per_founder = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FounderSummary {
    pub tag: OriginTag,
    pub origin: f64,
    pub total: usize,
    /// `ln Σ_u e^{t (S_u - origin)}` over the founder's descendants.
    pub log_laplace_recentred: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    pub n: usize,
    pub total: usize,
    pub root_total: usize,
    pub rightmost: f64,
    /// `ln Z̃_n(t)` on the spec grid.
    pub log_laplace: Vec<f64>,
    /// `ln Z̄_n(t)`, the root-tagged restriction.
    pub log_laplace_root: Vec<f64>,
    pub founders: Option<Vec<FounderSummary>>,
}

impl GenerationSummary {
    pub fn of(gen: &Generation, spec: &SummarySpec) -> Self {
        let scan = LaplaceScan::of(gen.positions());
        let root = gen.root().positions();
        let root_scan = LaplaceScan::of(root.iter().copied());
        let log_laplace = spec
            .t_grid
            .iter()
            .map(|&t| scan.log_laplace(gen.positions(), t))
            .collect();
        let log_laplace_root = spec
            .t_grid
            .iter()
            .map(|&t| root_scan.log_laplace(root.iter().copied(), t))
            .collect();
        let founders = spec.per_founder.then(|| {
            gen.groups
                .iter()
                .map(|g| {
                    let shifted = g.positions.iter().map(|&x| x - g.origin);
                    let scan = LaplaceScan::of(shifted.clone());
                    FounderSummary {
                        tag: g.tag,
                        origin: g.origin,
                        total: g.len(),
                        log_laplace_recentred: spec
                            .t_grid
                            .iter()
                            .map(|&t| scan.log_laplace(shifted.clone(), t))
                            .collect(),
                    }
                })
                .collect()
        });
        GenerationSummary {
            n: gen.index,
            total: gen.len(),
            root_total: gen.root().len(),
            rightmost: scan.max,
            log_laplace,
            log_laplace_root,
            founders,
        }
    }
}

/// Per-generation record of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub replica: u32,
    pub t_grid: Vec<f64>,
    pub immigration: Arc<ImmigrationRealization>,
    pub summaries: Vec<GenerationSummary>,
}

impl Trajectory {
    pub fn generations(&self) -> usize {
        self.summaries.len() - 1
    }
}

/// A configured simulation: the environment (and in `QuenchedXiAndY` mode
/// the immigration) is drawn once and shared by every replica.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    spec: SummarySpec,
    environment: Environment,
    shared_immigration: Option<Arc<ImmigrationRealization>>,
    immigration_enabled: bool,
    validation: ValidationReport,
}

impl Simulator {
    pub fn new(model: &EnvModel, config: SimConfig, spec: SummarySpec) -> Result<Self, SimError> {
        config.check()?;
        let validation = model.validate(&spec.t_grid);
        if !validation.is_ok() {
            return Err(SimError::InvalidModel(validation));
        }
        let environment = model.sample_environment(config.generations, config.seed);
        let immigration_enabled = model.has_immigration();
        let shared_immigration = (config.mode == SimMode::QuenchedXiAndY).then(|| {
            Arc::new(sample_immigration(&environment, config.seed, None, immigration_enabled))
        });
        Ok(Simulator {
            config,
            spec,
            environment,
            shared_immigration,
            immigration_enabled,
            validation,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn spec(&self) -> &SummarySpec {
        &self.spec
    }

    pub fn environment(&self) -> &Environment {
        &self.environment
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    pub fn immigration(&self, replica: u32) -> Arc<ImmigrationRealization> {
        match &self.shared_immigration {
            Some(shared) => Arc::clone(shared),
            None => Arc::new(sample_immigration(
                &self.environment,
                self.config.seed,
                Some(replica),
                self.immigration_enabled,
            )),
        }
    }

    /// Runs one replica, calling `hook` on every generation (including 0)
    /// before it is discarded.
    pub fn run_replica<F>(&self, replica: u32, mut hook: F) -> Result<Trajectory, SimError>
    where
        F: FnMut(&Generation),
    {
        let immigration = self.immigration(replica);
        let mut streams = BranchingStreams::new(self.config.seed, replica);
        let mut gen = Generation::initial();
        let mut summaries = Vec::with_capacity(self.config.generations + 1);
        summaries.push(GenerationSummary::of(&gen, &self.spec));
        hook(&gen);
        for k in 0..self.config.generations {
            gen = step(
                &gen,
                self.environment.state(k),
                immigration.positions(k),
                &mut streams,
                self.config.max_particles,
            )?;
            summaries.push(GenerationSummary::of(&gen, &self.spec));
            hook(&gen);
        }
        Ok(Trajectory {
            replica,
            t_grid: self.spec.t_grid.clone(),
            immigration,
            summaries,
        })
    }

    /// All replicas, in replica order, in parallel.
    pub fn run_all(&self) -> Result<Vec<Trajectory>, SimError> {
        (0..self.config.replicas as u32)
            .into_par_iter()
            .map(|r| self.run_replica(r, |_| {}))
            .collect()
    }
}

fn sample_immigration(env: &Environment, seed: u64, replica: Option<u32>, enabled: bool) -> ImmigrationRealization {
    if !enabled {
        return ImmigrationRealization::none(env.len());
    }
    let mut rng = rng::stream(seed, Stream::Immigration { replica });
    ImmigrationRealization::sample(env, &mut rng)
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Run {
    pub environment: Environment,
    pub trajectories: Vec<Trajectory>,
}

pub fn simulate(model: &EnvModel, config: &SimConfig, spec: &SummarySpec) -> Result<Run, SimError> {
    let sim = Simulator::new(model, config.clone(), spec.clone())?;
    let trajectories = sim.run_all()?;
    Ok(Run {
        environment: sim.environment,
        trajectories,
    })
}

/// The same process with immigration switched off (the plain branching
/// random walk in random environment). Because every founder owns its own
/// branching stream, this is draw-for-draw the root-tagged part of
/// [`simulate`] under the same seed.
pub fn simulate_no_immigration(model: &EnvModel, config: &SimConfig, spec: &SummarySpec) -> Result<Run, SimError> {
    simulate(&model.without_immigration(), config, spec)
}

/// `Y_k(t)` for every `k` in a realization.
pub fn immigrant_laplace_series(immigration: &ImmigrationRealization, t: f64) -> Vec<f64> {
    (0..immigration.len())
        .map(|k| functionals::immigrant_laplace(immigration, k, t))
        .collect()
}
