use std::cmp::Ordering;

use rayon::prelude::*;

use super::eval::DeviationContext;
use super::{CandidateWeights, DeviationFamily, DynamicsError, SearchOptions};
use crate::game::{Strategy, StrategyProfile};
use crate::{tolerance, NodeId};

/// A deviation together with the mover's costs before and after, both
/// computed on fully realised games.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub node: NodeId,
    pub strategy: Strategy,
    pub old_cost: f64,
    pub new_cost: f64,
    pub gain: f64,
}

impl Response {
    fn realize(profile: &StrategyProfile, v: NodeId, strategy: Strategy) -> Result<Self, DynamicsError> {
        let old_cost = profile.realize().private_cost(v).total;
        let new_cost = profile
            .apply_deviation(v, strategy.clone())?
            .realize()
            .private_cost(v)
            .total;
        Ok(Self {
            node: v,
            strategy,
            old_cost,
            new_cost,
            gain: tolerance::gain(old_cost, new_cost),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// An improving move, if one was found.
    pub response: Option<Response>,
    /// Deviations whose cost was evaluated.
    pub examined: u64,
}

type Edges = Vec<(NodeId, f64)>;

fn current_edges(s: &Strategy) -> Edges {
    s.edges().iter().map(|e| (e.target, e.weight)).collect()
}

fn to_strategy(v: NodeId, edges: Edges) -> Strategy {
    Strategy::new(v, edges).expect("search only builds simple strategies")
}

/// All moves of a restricted family in search order: targets ascending,
/// then weights ascending.
fn family_moves(
    v: NodeId,
    n: usize,
    current: &Strategy,
    family: DeviationFamily,
    cands: &CandidateWeights,
) -> Vec<Edges> {
    let cur = current_edges(current);
    let mut moves = Vec::new();
    match family {
        DeviationFamily::RemoveOnly => {
            for i in 0..cur.len() {
                let mut m = cur.clone();
                m.remove(i);
                moves.push(m);
            }
        }
        DeviationFamily::SingleAdd => {
            for w in (0..n).filter(|&w| w != v && current.weight_to(w).is_none()) {
                for &x in cands.weights() {
                    let mut m = cur.clone();
                    m.push((w, x));
                    moves.push(m);
                }
            }
        }
        DeviationFamily::SingleReweight => {
            for (i, &(_, old)) in cur.iter().enumerate() {
                for &x in cands.weights().iter().filter(|&&x| x != old) {
                    let mut m = cur.clone();
                    m[i].1 = x;
                    moves.push(m);
                }
            }
        }
        DeviationFamily::StarCollapse => {
            moves.push(Vec::new());
            for w in (0..n).filter(|&w| w != v) {
                for &x in cands.weights() {
                    moves.push(vec![(w, x)]);
                }
            }
            if n > 2 {
                for &x in cands.weights() {
                    moves.push((0..n).filter(|&w| w != v).map(|w| (w, x)).collect());
                }
            }
        }
        DeviationFamily::Restricted => {
            for f in DeviationFamily::RESTRICTED {
                moves.extend(family_moves(v, n, current, f, cands));
            }
        }
        DeviationFamily::ExhaustiveSubset => unreachable!("not a restricted family"),
    }
    moves
}

/// Finds an improving move for `v` in `family`.
///
/// Restricted families return the first improving move in search order. The
/// exhaustive family returns the best response when it improves.
pub fn improving_response(
    profile: &StrategyProfile,
    v: NodeId,
    family: DeviationFamily,
    cands: &CandidateWeights,
    opts: &SearchOptions,
) -> Result<SearchOutcome, DynamicsError> {
    check_node(profile, v)?;
    if family == DeviationFamily::ExhaustiveSubset {
        let (r, examined) = best_response(profile, v, cands, opts)?;
        let response = (r.gain > opts.epsilon).then_some(r);
        return Ok(SearchOutcome { response, examined });
    }
    let ctx = DeviationContext::new(profile, v);
    let old_cost = profile.realize().private_cost(v).total;
    let mut examined = 0;
    for m in family_moves(v, profile.n(), profile.strategy(v), family, cands) {
        examined += 1;
        let fast = ctx.cost(&m);
        if tolerance::gain(old_cost, fast) > 0.5 * opts.epsilon {
            let r = Response::realize(profile, v, to_strategy(v, m))?;
            if r.gain > opts.epsilon {
                return Ok(SearchOutcome {
                    response: Some(r),
                    examined,
                });
            }
        }
    }
    Ok(SearchOutcome {
        response: None,
        examined,
    })
}

fn check_node(profile: &StrategyProfile, v: NodeId) -> Result<(), DynamicsError> {
    if v >= profile.n() {
        return Err(DynamicsError::InvalidArgument(format!(
            "node {v} out of range for n = {}",
            profile.n()
        )));
    }
    Ok(())
}

fn costs_tie(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= tolerance::TIE * a.abs().max(b.abs()).max(1.0))
}

/// Tie-break order: cost, then fewer edges, smaller total weight,
/// lexicographically smaller targets.
fn compare(a: &(f64, Edges), b: &(f64, Edges)) -> Ordering {
    if !costs_tie(a.0, b.0) {
        return a.0.total_cmp(&b.0);
    }
    let total = |e: &Edges| e.iter().map(|&(_, x)| x).sum::<f64>();
    a.1.len()
        .cmp(&b.1.len())
        .then_with(|| {
            let (ta, tb) = (total(&a.1), total(&b.1));
            if costs_tie(ta, tb) {
                Ordering::Equal
            } else {
                ta.total_cmp(&tb)
            }
        })
        .then_with(|| a.1.iter().map(|e| e.0).cmp(b.1.iter().map(|e| e.0)))
}

/// Cost-minimal strategy for `v` over every target subset, with weights
/// from `cands` chosen per edge by coordinate descent. The current strategy
/// and every restricted-family move are also considered, so the result never
/// costs more than either. Returns the response and the number of evaluated
/// deviations.
pub fn best_response(
    profile: &StrategyProfile,
    v: NodeId,
    cands: &CandidateWeights,
    opts: &SearchOptions,
) -> Result<(Response, u64), DynamicsError> {
    check_node(profile, v)?;
    let n = profile.n();
    if n > opts.exhaustive_limit {
        return Err(DynamicsError::LimitExceeded {
            n,
            limit: opts.exhaustive_limit,
        });
    }
    let ctx = DeviationContext::new(profile, v);
    let current = profile.strategy(v);
    let others: Vec<NodeId> = (0..n).filter(|&w| w != v).collect();
    let prices: Vec<f64> = cands.weights().iter().map(|&x| ctx.price.eval_raw(x)).collect();

    let mut seeds = vec![current_edges(current)];
    seeds.extend(family_moves(v, n, current, DeviationFamily::Restricted, cands));
    let mut examined = seeds.len() as u64;
    let mut best: Option<(f64, Edges)> = None;
    let mut offer = |cand: (f64, Edges)| {
        if best.as_ref().is_none_or(|b| compare(&cand, b) == Ordering::Less) {
            best = Some(cand);
        }
    };
    for s in seeds {
        let c = ctx.cost(&s);
        offer((c, s));
    }

    let per_subset: Vec<(f64, Edges, u64)> = (0..1u64 << others.len())
        .into_par_iter()
        .map(|mask| {
            let targets: Vec<NodeId> = others
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &w)| w)
                .collect();
            optimize_subset(&ctx, current, &targets, cands.weights(), &prices)
        })
        .collect();
    for (c, e, k) in per_subset {
        examined += k;
        offer((c, e));
    }

    let (_, edges) = best.expect("at least the current strategy was offered");
    let r = Response::realize(profile, v, to_strategy(v, edges))?;
    Ok((r, examined))
}

/// Coordinate descent over candidate weights for a fixed target set, from
/// several starting assignments. Returns the best (cost, edges) found and the
/// number of evaluations.
fn optimize_subset(
    ctx: &DeviationContext<'_>,
    current: &Strategy,
    targets: &[NodeId],
    weights: &[f64],
    prices: &[f64],
) -> (f64, Edges, u64) {
    let k = targets.len();
    if k == 0 {
        return (ctx.cost(&[]), Vec::new(), 1);
    }
    let n = ctx.n;
    let mut examined = 0u64;

    // Best weight for each edge on its own.
    let mut solo = Vec::with_capacity(k);
    let mut scratch = vec![0.0; n];
    for &w in targets {
        let (i, _) = best_coordinate(ctx, ctx.reach(), w, 0.0, weights, prices, &mut scratch);
        examined += weights.len() as u64;
        solo.push(i);
    }
    let last = weights.len() - 1;
    let mut starts: Vec<Vec<usize>> = vec![solo.clone(), vec![0; k], vec![last; k]];
    // Current weights, where they are candidates.
    let from_current: Vec<usize> = targets
        .iter()
        .zip(&solo)
        .map(|(&w, &s)| {
            current
                .weight_to(w)
                .and_then(|x| weights.iter().position(|&c| (c - x).abs() <= tolerance::DOMAIN))
                .unwrap_or(s)
        })
        .collect();
    starts.push(from_current);
    starts.sort();
    starts.dedup();

    let mut best: Option<(f64, Edges)> = None;
    let mut partial = vec![0.0; n];
    for mut idx in starts {
        for _sweep in 0..n.max(1) {
            let mut changed = false;
            for i in 0..k {
                partial.copy_from_slice(ctx.reach());
                let mut others_price = 0.0;
                for j in (0..k).filter(|&j| j != i) {
                    ctx.add_edge(&mut partial, targets[j], weights[idx[j]]);
                    others_price += prices[idx[j]];
                }
                let cur = eval_with(ctx, &partial, targets[i], weights[idx[i]], &mut scratch)
                    + prices[idx[i]];
                let (bi, bc) =
                    best_coordinate(ctx, &partial, targets[i], others_price, weights, prices, &mut scratch);
                examined += weights.len() as u64;
                if bc < cur + others_price && !costs_tie(bc, cur + others_price) {
                    idx[i] = bi;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let edges: Edges = targets.iter().zip(&idx).map(|(&w, &i)| (w, weights[i])).collect();
        let cost = ctx.cost(&edges);
        examined += 1;
        let cand = (cost, edges);
        if best.as_ref().is_none_or(|b| compare(&cand, b) == Ordering::Less) {
            best = Some(cand);
        }
    }
    let (c, e) = best.expect("at least one start");
    (c, e, examined)
}

/// Distance cost of `partial` plus an edge `(w, x)`.
#[inline]
fn eval_with(ctx: &DeviationContext<'_>, partial: &[f64], w: NodeId, x: f64, scratch: &mut [f64]) -> f64 {
    scratch.copy_from_slice(partial);
    ctx.add_edge(scratch, w, x);
    ctx.aggregate(scratch)
}

/// Cheapest candidate for edge `(w, ·)` given the other edges' distances in
/// `partial` and their total price `base_price`; smallest weight on ties.
fn best_coordinate(
    ctx: &DeviationContext<'_>,
    partial: &[f64],
    w: NodeId,
    base_price: f64,
    weights: &[f64],
    prices: &[f64],
    scratch: &mut [f64],
) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, (&x, &p)) in weights.iter().zip(prices).enumerate() {
        let c = base_price + p + eval_with(ctx, partial, w, x, scratch);
        if i == 0 || c < best.1 {
            best = (i, c);
        }
    }
    best
}
