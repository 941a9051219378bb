//! Candidate weights, improving and best responses, and round-based
//! best-response dynamics.

mod candidates;
pub(crate) mod eval;
mod search;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use candidates::CandidateWeights;
pub use search::{best_response, improving_response, Response, SearchOutcome};

use crate::game::{GameError, GameKind, Strategy, StrategyProfile};
use crate::price::PriceFunction;
use crate::{tolerance, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("exhaustive search needs n <= {limit}, got n = {n}")]
    LimitExceeded { n: usize, limit: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationFamily {
    /// Drop one own edge.
    RemoveOnly,
    /// Buy one extra edge.
    SingleAdd,
    /// Change the weight of one own edge.
    SingleReweight,
    /// Replace the whole strategy by nothing, a single edge, or edges to
    /// every other node at one weight.
    StarCollapse,
    /// The four families above, in that order.
    Restricted,
    /// Every target subset with per-edge weight optimisation.
    #[serde(rename = "exhaustive")]
    ExhaustiveSubset,
}

impl DeviationFamily {
    pub const RESTRICTED: [DeviationFamily; 4] = [
        DeviationFamily::RemoveOnly,
        DeviationFamily::SingleAdd,
        DeviationFamily::SingleReweight,
        DeviationFamily::StarCollapse,
    ];

    pub const ALL: [DeviationFamily; 6] = [
        DeviationFamily::RemoveOnly,
        DeviationFamily::SingleAdd,
        DeviationFamily::SingleReweight,
        DeviationFamily::StarCollapse,
        DeviationFamily::Restricted,
        DeviationFamily::ExhaustiveSubset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeviationFamily::RemoveOnly => "remove-only",
            DeviationFamily::SingleAdd => "single-add",
            DeviationFamily::SingleReweight => "single-reweight",
            DeviationFamily::StarCollapse => "star-collapse",
            DeviationFamily::Restricted => "restricted",
            DeviationFamily::ExhaustiveSubset => "exhaustive",
        }
    }
}

impl fmt::Display for DeviationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeviationFamily {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| DynamicsError::InvalidArgument(format!("unknown deviation family `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// A move must lower the mover's cost by more than this.
    pub epsilon: f64,
    /// Largest n for which the exhaustive family is allowed.
    pub exhaustive_limit: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            epsilon: tolerance::COST,
            exhaustive_limit: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheduler {
    #[default]
    RoundRobin,
    /// A fresh node order each round, drawn from a ChaCha8 stream.
    RandomPermutation(u64),
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheduler::RoundRobin => f.write_str("round-robin"),
            Scheduler::RandomPermutation(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for Scheduler {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "round-robin" {
            return Ok(Scheduler::RoundRobin);
        }
        match s.strip_prefix("random:") {
            Some(seed) => seed
                .parse()
                .map(Scheduler::RandomPermutation)
                .map_err(|_| DynamicsError::InvalidArgument(format!("bad seed in `{s}`"))),
            None if s == "random" => Err(DynamicsError::InvalidArgument(
                "random scheduler needs a seed: random:<u64>".into(),
            )),
            None => Err(DynamicsError::InvalidArgument(format!("unknown scheduler `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsStep {
    pub round: usize,
    pub node: NodeId,
    #[serde(with = "float")]
    pub old_cost: f64,
    #[serde(with = "float")]
    pub new_cost: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTrace {
    pub scheduler: Scheduler,
    pub family: DeviationFamily,
    pub steps: Vec<DynamicsStep>,
    pub converged: bool,
    /// Rounds run, including the final quiet one when converged.
    pub rounds: usize,
    pub final_profile: StrategyProfile,
}

/// Activates every node once per round; the exhaustive family plays best
/// responses, the others play the first improving move found. Stops after a
/// round without moves or after `max_rounds`.
pub fn run_dynamics(
    initial: &StrategyProfile,
    cands: &CandidateWeights,
    scheduler: Scheduler,
    family: DeviationFamily,
    max_rounds: usize,
    opts: &SearchOptions,
) -> Result<DynamicsTrace, DynamicsError> {
    if max_rounds == 0 {
        return Err(DynamicsError::InvalidArgument("max_rounds must be at least 1".into()));
    }
    let n = initial.n();
    if family == DeviationFamily::ExhaustiveSubset && n > opts.exhaustive_limit {
        return Err(DynamicsError::LimitExceeded {
            n,
            limit: opts.exhaustive_limit,
        });
    }
    let mut rng = match scheduler {
        Scheduler::RoundRobin => None,
        Scheduler::RandomPermutation(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut profile = initial.clone();
    let mut steps = Vec::new();
    let mut order: Vec<NodeId> = (0..n).collect();
    let mut converged = false;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut moved = false;
        for &v in &order {
            let found = improving_response(&profile, v, family, cands, opts)?;
            if let Some(r) = found.response {
                profile = profile.apply_deviation(v, r.strategy.clone())?;
                steps.push(DynamicsStep {
                    round: rounds,
                    node: v,
                    old_cost: r.old_cost,
                    new_cost: r.new_cost,
                    strategy: r.strategy,
                });
                moved = true;
            }
        }
        if !moved {
            converged = true;
            break;
        }
    }
    Ok(DynamicsTrace {
        scheduler,
        family,
        steps,
        converged,
        rounds,
        final_profile: profile,
    })
}

/// Each ordered pair buys an edge with probability `density`, at a weight
/// drawn uniformly from `cands`.
pub fn random_profile<R: Rng>(
    kind: GameKind,
    price: Arc<PriceFunction>,
    n: usize,
    cands: &CandidateWeights,
    density: f64,
    rng: &mut R,
) -> Result<StrategyProfile, DynamicsError> {
    if !(0.0..=1.0).contains(&density) {
        return Err(DynamicsError::InvalidArgument(format!("density {density} not in [0, 1]")));
    }
    let mut edges = Vec::new();
    for owner in 0..n {
        for target in 0..n {
            if owner != target && rng.gen_bool(density) {
                let &w = cands.weights().choose(rng).expect("candidate set is non-empty");
                edges.push((owner, target, w));
            }
        }
    }
    Ok(StrategyProfile::from_edges(kind, price, n, &edges)?)
}

/// JSON has no infinities; non-finite costs travel as strings.
pub(crate) mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float `{other}`"))),
            },
        }
    }
}
