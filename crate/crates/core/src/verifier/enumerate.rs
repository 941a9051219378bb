use std::sync::Arc;

use super::VerifierError;
use crate::dynamics::CandidateWeights;
use crate::game::{GameKind, StrategyProfile};
use crate::price::PriceFunction;
use crate::NodeId;

pub const MAX_ENUMERATION_NODES: usize = 4;

/// Number of profiles [`enumerate_profiles`] yields: each unordered pair is
/// absent, or bought by one of its endpoints at one of `c` weights.
pub fn profile_count(n: usize, c: usize) -> u128 {
    let pairs = (n * n.saturating_sub(1) / 2) as u32;
    (1 + 2 * c as u128).pow(pairs)
}

/// Every profile on `n <= 4` nodes in which each pair is bought at most
/// once, with weights from `cands`. Profiles where both endpoints buy the
/// same pair are skipped: dropping the heavier purchase gives the same
/// graph at lower cost.
pub fn enumerate_profiles(
    kind: GameKind,
    price: &Arc<PriceFunction>,
    n: usize,
    cands: &CandidateWeights,
    cap: u128,
) -> Result<impl Iterator<Item = StrategyProfile>, VerifierError> {
    if !(2..=MAX_ENUMERATION_NODES).contains(&n) {
        return Err(VerifierError::InvalidArgument(format!(
            "enumeration needs 2 <= n <= {MAX_ENUMERATION_NODES}, got {n}"
        )));
    }
    let count = profile_count(n, cands.len());
    if count > cap {
        return Err(VerifierError::CapExceeded { count, cap });
    }
    let pairs: Vec<(NodeId, NodeId)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let weights = cands.weights().to_vec();
    let price = Arc::clone(price);
    let radix = 1 + 2 * weights.len();
    Ok((0..count).map(move |mut code| {
        let mut edges = Vec::with_capacity(pairs.len());
        for &(u, v) in &pairs {
            let digit = (code % radix as u128) as usize;
            code /= radix as u128;
            if digit == 0 {
                continue;
            }
            let (owner, target) = if digit <= weights.len() { (u, v) } else { (v, u) };
            edges.push((owner, target, weights[(digit - 1) % weights.len()]));
        }
        StrategyProfile::from_edges(kind, Arc::clone(&price), n, &edges)
            .expect("enumerated edges are valid")
    }))
}

/// Cheapest enumerated profile and its social cost; the first one found on
/// ties.
pub fn brute_force_opt(
    kind: GameKind,
    price: &Arc<PriceFunction>,
    n: usize,
    cands: &CandidateWeights,
    cap: u128,
) -> Result<(f64, StrategyProfile), VerifierError> {
    let mut best: Option<(f64, StrategyProfile)> = None;
    for profile in enumerate_profiles(kind, price, n, cands, cap)? {
        let cost = profile.realize().social_cost();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, profile));
        }
    }
    Ok(best.expect("at least the empty profile is enumerated"))
}
