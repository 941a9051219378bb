//! Nash certification and checks of the social-cost, diameter and ratio
//! bounds.

mod bounds;
mod enumerate;
mod ratios;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{
    max_cost_upper_check, max_diameter_check, max_lower_bound, max_lower_check, max_x_star,
    sum_cost_upper_check, sum_diameter_check, sum_lower_bound, BoundCheck, Direction,
};
pub use enumerate::{brute_force_opt, enumerate_profiles, profile_count, MAX_ENUMERATION_NODES};
pub use ratios::{opt_reference, poa_report, pos_report, worst_clique_report, RatioReport};

use crate::constructions::ConstructionError;
use crate::dynamics::{
    float, improving_response, CandidateWeights, DeviationFamily, DynamicsError, SearchOptions,
};
use crate::game::{GameError, GameKind, RealizedGame, Strategy, StrategyProfile};
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifierError {
    #[error("profile is not certified stable: {0}")]
    NotCertified(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("{check} applies to the {expected} game")]
    WrongGame { check: &'static str, expected: GameKind },
    #[error("weight {x} outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("enumeration would produce {count} profiles, cap is {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    Unstable {
        node: NodeId,
        strategy: Strategy,
        #[serde(with = "float")]
        old_cost: f64,
        #[serde(with = "float")]
        new_cost: f64,
        #[serde(with = "float")]
        gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub profile_fingerprint: String,
    pub family: DeviationFamily,
    pub verdict: Verdict,
    pub epsilon: f64,
    pub examined: u64,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }

    /// Errors unless this report certifies `profile` as stable.
    pub fn require_stable_for(&self, profile: &StrategyProfile) -> Result<(), VerifierError> {
        if !self.is_stable() {
            return Err(VerifierError::NotCertified("report verdict is unstable".into()));
        }
        if self.profile_fingerprint != profile.fingerprint() {
            return Err(VerifierError::NotCertified("report is for a different profile".into()));
        }
        Ok(())
    }
}

/// Searches every node for an improving move in `family`. Nodes are searched
/// in parallel; the reported counterexample is the one at the lowest node id.
pub fn certify_ne(
    profile: &StrategyProfile,
    family: DeviationFamily,
    cands: &CandidateWeights,
    opts: &SearchOptions,
) -> Result<StabilityReport, VerifierError> {
    let n = profile.n();
    if family == DeviationFamily::ExhaustiveSubset && n > opts.exhaustive_limit {
        return Err(DynamicsError::LimitExceeded {
            n,
            limit: opts.exhaustive_limit,
        }
        .into());
    }
    let outcomes = (0..n)
        .into_par_iter()
        .map(|v| improving_response(profile, v, family, cands, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let examined = outcomes.iter().map(|o| o.examined).sum();
    let verdict = outcomes
        .into_iter()
        .find_map(|o| o.response)
        .map_or(Verdict::Stable, |r| Verdict::Unstable {
            node: r.node,
            strategy: r.strategy,
            old_cost: r.old_cost,
            new_cost: r.new_cost,
            gain: r.gain,
        });
    Ok(StabilityReport {
        profile_fingerprint: profile.fingerprint(),
        family,
        verdict,
        epsilon: opts.epsilon,
        examined,
    })
}

/// The exhaustive family when `n` allows it, the combined restricted
/// families otherwise.
pub fn default_family(n: usize, opts: &SearchOptions) -> DeviationFamily {
    if n <= opts.exhaustive_limit {
        DeviationFamily::ExhaustiveSubset
    } else {
        DeviationFamily::Restricted
    }
}

/// Recomputes an unstable verdict on the realised games: returns
/// `(old_cost, new_cost, gain)` for the mover.
pub fn replay(profile: &StrategyProfile, verdict: &Verdict) -> Result<Option<(f64, f64, f64)>, VerifierError> {
    let Verdict::Unstable { node, strategy, .. } = verdict else {
        return Ok(None);
    };
    let old = profile.realize().private_cost(*node).total;
    let new = profile
        .apply_deviation(*node, strategy.clone())?
        .realize()
        .private_cost(*node)
        .total;
    Ok(Some((old, new, crate::tolerance::gain(old, new))))
}

fn require_kind(game: &RealizedGame, check: &'static str, expected: GameKind) -> Result<(), VerifierError> {
    if game.kind() == expected {
        Ok(())
    } else {
        Err(VerifierError::WrongGame { check, expected })
    }
}
