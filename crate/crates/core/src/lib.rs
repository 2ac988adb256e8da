//! Simulation and verification of branching random walks with immigration
//! in a random environment.
//!
//! The crate is organized bottom-up:
//!
//! - [`env_model`]: environment laws and their validation,
//! - [`simulator`]: generation-by-generation simulation with origin tags,
//! - [`functionals`]: counting measures, Laplace transforms, martingales,
//! - [`rates`]: `Λ`, the free energy and the Legendre transform,
//! - [`harness`]: the statistical verification procedures,
//! - [`config`]: typed run configuration,
//! - [`output`]: CSV/JSON formatting.

pub mod config;
pub mod env_model;
pub mod functionals;
pub mod harness;
pub mod numeric;
pub mod output;
pub mod rates;
pub mod rng;
pub mod simulator;

pub use env_model::{
    CheckOutcome, DisplacementLaw, EnvKind, EnvModel, EnvState, Environment, ImmigrantCount,
    ImmigrationLaw, ModelError, OffspringLaw, ValidationCheck, ValidationReport,
};
pub use functionals::{CountingMeasure, FunctionalError, QuenchedNormalizers};
pub use rates::{CaseClassification, CaseLabel, CriticalPoints, FreeEnergy, LdpCase, RateTable, Rates, RatesError};
pub use simulator::{
    Generation, GenerationSummary, ImmigrationRealization, OriginTag, Run, SimConfig, SimError,
    SimMode, Simulator, SummarySpec, Trajectory,
};
