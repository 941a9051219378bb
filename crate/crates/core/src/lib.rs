//! Network creation games with quality-of-service edges.
//!
//! Every node buys a set of undirected edges, choosing for each edge a weight
//! (its length) from an interval `[lo, hi]` and paying `p(weight)` for it,
//! where `p` is a monotonically decreasing price function. Nodes minimise the
//! sum of their edge prices plus either the sum (SUM game) or the maximum (MAX
//! game) of their shortest-path distances.
//!
//! The crate is organised bottom-up:
//!
//! * [`price`] - admissible price functions and exact tradeoff minimisers.
//! * [`game`] - strategies, profiles, graph realisation and cost functions.
//! * [`constructions`] - the explicit optimal and equilibrium graph families.
//! * [`dynamics`] - finite candidate weights, improving and best responses,
//!   round-based best-response dynamics.
//! * [`verifier`] - Nash certification, bound checks, ratio reports and a
//!   brute-force profile enumerator.
//! * [`experiment`] - reproducible parameter sweeps and their reports.

#![forbid(unsafe_code)]

pub mod constructions;
pub mod dynamics;
pub mod experiment;
pub mod game;
pub mod price;
pub mod tolerance;
pub mod verifier;

pub use constructions::{ConstructionOutcome, StructureFamily};
pub use dynamics::{CandidateWeights, DeviationFamily, DynamicsTrace, Scheduler, SearchOptions};
pub use game::{CostBreakdown, GameKind, RealizedGame, Strategy, StrategyProfile};
pub use price::{PriceError, PriceForm, PriceFunction, TradeoffMinimizer, WeightInterval};
pub use verifier::{BoundCheck, RatioReport, StabilityReport, Verdict};

/// Dense node identifier in `0..n`.
pub type NodeId = usize;
