//! Inference for partially observed stochastic epidemics.
//!
//! The crate revolves around the pairwise infective pressure
//! `tau_kj = min(r_k, e_j) - min(e_j, i_k)`: the length of time an infectious
//! individual `k` (infectious on `[i_k, r_k)`) can exert pressure on a
//! susceptible `j` before `j`'s own exposure at `e_j`. Sums of these pressures
//! are the sufficient statistic for the infection rate in Markovian SIR/SEIR
//! models, which makes rate estimation a matter of adding up pair terms.
//!
//! When infection or removal times are missing, each ordered pair falls into
//! one of seven observation patterns, and `tau` is replaced by its conditional
//! expectation under Exponential or Erlang infectious periods ([`exposure`]).
//! The [`estimate`] module builds moment-style rate estimators on top of these
//! expectations, [`bootstrap`] wraps them in studentized parametric bootstrap
//! intervals, and [`mcmc`] provides the alternative data-augmentation sampler
//! with conjugate Gamma updates for the rates.
//!
//! Everything is deterministic given a seed: simulation, bootstrap, and MCMC
//! consume named ChaCha streams derived from a master seed ([`stream`]), and
//! parallel loops reduce in index order.

pub mod bootstrap;
pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod exposure;
pub mod mcmc;
pub mod model;
pub mod numeric;
pub mod observe;
pub mod simulate;
pub mod stream;

pub use error::{Error, Result};
pub use model::{
    CaseRecord, EventKind, EventLog, InfectionStructure, KernelSpec, ObservationPattern,
    PairObservation, RateModel, RemovalStructure, SufficientStats,
};
