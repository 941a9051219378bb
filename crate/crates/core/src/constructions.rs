//! Explicit optimal and equilibrium graphs.
//!
//! Stars are centred on node 0. Unless a construction says otherwise, the
//! satellites buy their edge to the centre, and clique edges are bought by the
//! endpoint with the lower id (so node 0 owns all of its `n - 1` edges).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameError, GameKind, StrategyProfile};
use crate::price::PriceFunction;
use crate::tolerance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("constructions need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("preconditions failed: {}", .failed.join(", "))]
    PreconditionFailed { failed: Vec<&'static str> },
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureFamily {
    StarSatellitesOwn,
    StarCenterOwns,
    Clique,
    CliqueOneOwner,
}

/// Which branch of a construction produced the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    /// n = 2: every construction is one edge.
    SingleEdge,
    OptStar,
    OptClique,
    /// SUM equilibrium, `x̄ < p(x*)`.
    SumStarCheapEdges,
    /// SUM equilibrium, clique of `x*` edges.
    SumClique,
    /// SUM equilibrium, remaining star case.
    SumStarFallback,
    /// Clique of `hi`-weight edges with a large anarchy ratio.
    SumWorstClique,
    MaxStarSatellitesOwn,
    MaxStarCenterOwns,
    MaxCliqueOneOwner,
    MaxOptStar,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionOutcome {
    pub profile: StrategyProfile,
    pub family: StructureFamily,
    /// Edge weight used throughout the graph.
    pub weight: f64,
    pub case: Case,
    /// Closed-form social cost of `profile`.
    pub predicted_cost: f64,
}

/// Result of [`sum_worst_clique`]: the clique plus the anarchy ratio it
/// certifies against a star of `lo`-weight edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstClique {
    pub outcome: ConstructionOutcome,
    pub ratio: f64,
}

fn check_n(n: usize) -> Result<(), ConstructionError> {
    if n < 2 {
        Err(ConstructionError::TooFewNodes(n))
    } else {
        Ok(())
    }
}

/// Star on node 0 with every edge of weight `x`.
pub fn star(
    kind: GameKind,
    price: &Arc<PriceFunction>,
    n: usize,
    x: f64,
    satellites_own: bool,
) -> Result<StrategyProfile, GameError> {
    let edges: Vec<_> = (1..n)
        .map(|s| if satellites_own { (s, 0, x) } else { (0, s, x) })
        .collect();
    StrategyProfile::from_edges(kind, Arc::clone(price), n, &edges)
}

/// Complete graph with every edge of weight `x`, lower id owns.
pub fn clique(
    kind: GameKind,
    price: &Arc<PriceFunction>,
    n: usize,
    x: f64,
) -> Result<StrategyProfile, GameError> {
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v, x));
        }
    }
    StrategyProfile::from_edges(kind, Arc::clone(price), n, &edges)
}

/// Closed-form social cost of a uniform-weight star or clique.
pub fn predicted_cost(
    kind: GameKind,
    family: StructureFamily,
    n: usize,
    x: f64,
    price: &PriceFunction,
) -> f64 {
    let nf = n as f64;
    let p = price.eval_raw(x);
    match family {
        StructureFamily::StarSatellitesOwn | StructureFamily::StarCenterOwns => {
            let distance = match kind {
                GameKind::Sum => 2.0 * (nf - 1.0) * (nf - 1.0) * x,
                GameKind::Max if n == 2 => 2.0 * x,
                // centre at x, every satellite at 2x
                GameKind::Max => (2.0 * nf - 1.0) * x,
            };
            (nf - 1.0) * p + distance
        }
        StructureFamily::Clique | StructureFamily::CliqueOneOwner => {
            let distance = match kind {
                GameKind::Sum => nf * (nf - 1.0) * x,
                GameKind::Max => nf * x,
            };
            nf * (nf - 1.0) / 2.0 * p + distance
        }
    }
}

fn outcome(
    kind: GameKind,
    price: &Arc<PriceFunction>,
    n: usize,
    x: f64,
    family: StructureFamily,
    case: Case,
) -> Result<ConstructionOutcome, ConstructionError> {
    let profile = match family {
        StructureFamily::StarSatellitesOwn => star(kind, price, n, x, true)?,
        StructureFamily::StarCenterOwns => star(kind, price, n, x, false)?,
        StructureFamily::Clique | StructureFamily::CliqueOneOwner => clique(kind, price, n, x)?,
    };
    Ok(ConstructionOutcome {
        profile,
        family,
        weight: x,
        case,
        predicted_cost: predicted_cost(kind, family, n, x, price),
    })
}

fn single_edge(
    kind: GameKind,
    price: &Arc<PriceFunction>,
    x: f64,
) -> Result<ConstructionOutcome, ConstructionError> {
    outcome(kind, price, 2, x, StructureFamily::StarSatellitesOwn, Case::SingleEdge)
}

/// Socially optimal SUM graph: the cheaper of a star at `argmin p + 2(n-1)x`
/// and a clique at `argmin p + 2x`; the star wins ties.
pub fn opt_sum(n: usize, price: &Arc<PriceFunction>) -> Result<ConstructionOutcome, ConstructionError> {
    check_n(n)?;
    let nf = n as f64;
    let chi_bar = price.argmin_tradeoff(2.0 * (nf - 1.0));
    let chi_star = price.argmin_tradeoff(2.0);
    if n == 2 {
        return single_edge(GameKind::Sum, price, chi_bar);
    }
    let star_cost = predicted_cost(GameKind::Sum, StructureFamily::StarSatellitesOwn, n, chi_bar, price);
    let clique_cost = predicted_cost(GameKind::Sum, StructureFamily::Clique, n, chi_star, price);
    if star_cost <= clique_cost {
        outcome(GameKind::Sum, price, n, chi_bar, StructureFamily::StarSatellitesOwn, Case::OptStar)
    } else {
        outcome(GameKind::Sum, price, n, chi_star, StructureFamily::Clique, Case::OptClique)
    }
}

/// A SUM equilibrium.
///
/// With `x* = argmin p + x` and `x̄ = argmin p + (n-1)x`: a star of `x̄`
/// edges when `x̄ < p(x*)`; otherwise a clique of `x*` edges when dropping
/// all edges for a single `x̄` edge does not pay, i.e.
/// `p(x̄) - x* + (n-1)(x̄ - p(x*)) >= 0`; otherwise the `x̄` star again.
pub fn sum_ne(n: usize, price: &Arc<PriceFunction>) -> Result<ConstructionOutcome, ConstructionError> {
    check_n(n)?;
    let tol = tolerance::COST;
    let x_star = price.argmin_tradeoff(1.0);
    if n == 2 {
        return single_edge(GameKind::Sum, price, x_star);
    }
    let x_bar = price.argmin_tradeoff((n - 1) as f64);
    let p_star = price.eval_raw(x_star);
    let p_bar = price.eval_raw(x_bar);
    let kind = GameKind::Sum;
    if tolerance::lt(x_bar, p_star, tol) {
        return outcome(kind, price, n, x_bar, StructureFamily::StarSatellitesOwn, Case::SumStarCheapEdges);
    }
    let collapse_change = p_bar - x_star + (n - 1) as f64 * (x_bar - p_star);
    if tolerance::ge(collapse_change, 0.0, tol) {
        outcome(kind, price, n, x_star, StructureFamily::Clique, Case::SumClique)
    } else {
        outcome(kind, price, n, x_bar, StructureFamily::StarSatellitesOwn, Case::SumStarFallback)
    }
}

/// Clique of `hi`-weight edges, stable when `p(hi) <= lo`, `p(lo) <= hi`
/// and `hi` minimises `p(x) + x`.
pub fn sum_worst_clique(n: usize, price: &Arc<PriceFunction>) -> Result<WorstClique, ConstructionError> {
    check_n(n)?;
    let tol = tolerance::COST;
    let (lo, hi) = (price.lo(), price.hi());
    let (p_lo, p_hi) = (price.eval_raw(lo), price.eval_raw(hi));
    let mut failed = Vec::new();
    if !tolerance::le(p_hi, lo, tol) {
        failed.push("p(hi) <= lo");
    }
    if !tolerance::le(p_lo, hi, tol) {
        failed.push("p(lo) <= hi");
    }
    if (price.argmin_tradeoff(1.0) - hi).abs() > tol {
        failed.push("hi = argmin p(x) + x");
    }
    if !failed.is_empty() {
        return Err(ConstructionError::PreconditionFailed { failed });
    }
    let outcome = outcome(GameKind::Sum, price, n, hi, StructureFamily::Clique, Case::SumWorstClique)?;
    Ok(WorstClique {
        outcome,
        ratio: worst_clique_ratio(n, price),
    })
}

/// `n (p(hi) + hi) / (p(lo) + 2 lo (n - 1))`.
pub fn worst_clique_ratio(n: usize, price: &PriceFunction) -> f64 {
    let nf = n as f64;
    let (lo, hi) = (price.lo(), price.hi());
    nf * (price.eval_raw(hi) + hi) / (price.eval_raw(lo) + 2.0 * lo * (nf - 1.0))
}

/// A MAX equilibrium.
///
/// With `chi* = argmin (n-1)p(x) + x` and `chi_bar = argmin p(x) + x`:
/// a satellite-owned star of `chi_bar` edges when
/// `(n-1)p(chi*) + chi* >= p(chi_bar) + 2 chi_bar`; otherwise a centre-owned
/// star of `chi*` edges when `chi* <= (n-2)p(chi*)`; otherwise a clique of
/// `chi*` edges in which node 0 owns all of its edges.
pub fn max_ne(n: usize, price: &Arc<PriceFunction>) -> Result<ConstructionOutcome, ConstructionError> {
    check_n(n)?;
    let tol = tolerance::COST;
    let chi_bar = price.argmin_tradeoff(1.0);
    if n == 2 {
        return single_edge(GameKind::Max, price, chi_bar);
    }
    let nf = n as f64;
    let chi_star = price.argmin_scaled(nf - 1.0);
    let p_star = price.eval_raw(chi_star);
    let p_bar = price.eval_raw(chi_bar);
    let kind = GameKind::Max;
    if tolerance::ge((nf - 1.0) * p_star + chi_star, p_bar + 2.0 * chi_bar, tol) {
        outcome(kind, price, n, chi_bar, StructureFamily::StarSatellitesOwn, Case::MaxStarSatellitesOwn)
    } else if tolerance::le(chi_star, (nf - 2.0) * p_star, tol) {
        outcome(kind, price, n, chi_star, StructureFamily::StarCenterOwns, Case::MaxStarCenterOwns)
    } else {
        outcome(kind, price, n, chi_star, StructureFamily::CliqueOneOwner, Case::MaxCliqueOneOwner)
    }
}

/// Reference optimum for MAX ratios: satellite-owned star at `argmin p(x) + 2x`.
pub fn max_opt_star(n: usize, price: &Arc<PriceFunction>) -> Result<ConstructionOutcome, ConstructionError> {
    check_n(n)?;
    let x = price.argmin_tradeoff(2.0);
    if n == 2 {
        return single_edge(GameKind::Max, price, x);
    }
    outcome(GameKind::Max, price, n, x, StructureFamily::StarSatellitesOwn, Case::MaxOptStar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(p: PriceFunction) -> Arc<PriceFunction> {
        Arc::new(p)
    }

    fn unit(alpha: f64) -> Arc<PriceFunction> {
        arc(PriceFunction::constant(alpha, 1.0, 1.0).unwrap())
    }

    fn assert_prediction(o: &ConstructionOutcome) {
        let actual = o.profile.realize().social_cost();
        assert!(
            (actual - o.predicted_cost).abs() <= 1e-9 * actual.max(1.0),
            "{:?}: predicted {} actual {}",
            o.case,
            o.predicted_cost,
            actual
        );
    }

    #[test]
    fn opt_sum_examples() {
        let o = opt_sum(3, &unit(1.0)).unwrap();
        assert_eq!(o.case, Case::OptClique);
        assert_eq!(o.predicted_cost, 9.0);
        assert_prediction(&o);

        let p = arc(PriceFunction::reciprocal(3.0, 1.0, 5.0).unwrap());
        let o = opt_sum(2, &p).unwrap();
        assert_eq!(o.case, Case::SingleEdge);
        assert_eq!(o.weight, p.minimize_tradeoff(2.0).unwrap().argmin);
        assert_eq!(o.profile.bought_edge_count(), 1);

        let p = arc(PriceFunction::reciprocal(100.0, 1.0, 10.0).unwrap());
        let o = opt_sum(4, &p).unwrap();
        assert_eq!(o.case, Case::OptStar);
        let chi = (100.0f64 / 6.0).sqrt();
        assert!((o.weight - chi).abs() < 1e-12);
        let expected = 3.0 * (6.0 * chi + 100.0 / chi);
        assert!((o.predicted_cost - expected).abs() < 1e-9);
        assert_prediction(&o);
    }

    #[test]
    fn sum_ne_examples() {
        let o = sum_ne(3, &unit(1.0)).unwrap();
        assert_eq!((o.case, o.weight), (Case::SumClique, 1.0));

        let p = arc(PriceFunction::reciprocal(1e6, 1.0, 2.0).unwrap());
        let o = sum_ne(4, &p).unwrap();
        assert_eq!((o.case, o.weight), (Case::SumStarCheapEdges, 2.0));

        let p = arc(PriceFunction::reciprocal(4.0, 1.0, 10.0).unwrap());
        let o = sum_ne(2, &p).unwrap();
        assert_eq!((o.case, o.weight), (Case::SingleEdge, 2.0));
    }

    #[test]
    fn sum_ne_cheap_constant_price_is_clique() {
        // p = 0.5 on [1,1]: p(x̄) < x* but collapsing to one edge still loses
        let o = sum_ne(5, &unit(0.5)).unwrap();
        assert_eq!(o.case, Case::SumClique);
    }

    #[test]
    fn worst_clique_examples() {
        let p = arc(PriceFunction::linear(3.0, 0.25, 1.0, 2.2).unwrap());
        let w = sum_worst_clique(5, &p).unwrap();
        assert_eq!(w.outcome.family, StructureFamily::Clique);
        assert_eq!(w.outcome.weight, 2.2);
        assert_prediction(&w.outcome);
        let p6 = worst_clique_ratio(6, &p);
        assert!((p6 - 6.0 * 2.45 / 11.75).abs() < 1e-12);

        let p = arc(PriceFunction::reciprocal(4.0, 1.0, 10.0).unwrap());
        match sum_worst_clique(4, &p) {
            Err(ConstructionError::PreconditionFailed { failed }) => {
                assert!(failed.contains(&"hi = argmin p(x) + x"));
            }
            other => panic!("{other:?}"),
        }

        for alpha in [0.25, 1.0] {
            let w = sum_worst_clique(3, &unit(alpha)).unwrap();
            assert_eq!(w.outcome.weight, 1.0);
        }
        assert!(sum_worst_clique(3, &unit(1.5)).is_err());
    }

    #[test]
    fn max_ne_examples() {
        let o = max_ne(3, &unit(1.0)).unwrap();
        assert_eq!((o.case, o.weight), (Case::MaxStarSatellitesOwn, 1.0));
        assert_eq!(o.predicted_cost, 7.0);

        let o = max_ne(4, &unit(1e-3)).unwrap();
        assert_eq!(o.case, Case::MaxCliqueOneOwner);
        assert_eq!(o.profile.strategy(0).len(), 3);
        assert_prediction(&o);

        let p = arc(PriceFunction::reciprocal(0.01, 1.0, 2.0).unwrap());
        let o = max_ne(3, &p).unwrap();
        // 2 p(1) + 1 = 1.02 < p(1) + 2 = 2.01, and 1 > 0.01
        assert_eq!((o.case, o.weight), (Case::MaxCliqueOneOwner, 1.0));
    }

    #[test]
    fn max_ne_center_owned_case_is_unreachable() {
        // chi_bar <= chi* gives p(chi_bar) + 2 chi_bar <= p(chi*) + 2 chi*, so
        // failing the first test forces (n-2) p(chi*) < chi*.
        let prices = [
            PriceFunction::reciprocal(1.0, 0.1, 10.0).unwrap(),
            PriceFunction::reciprocal(50.0, 1.0, 3.0).unwrap(),
            PriceFunction::linear(2.0, -0.5, 0.1, 1.0).unwrap(),
            PriceFunction::constant(0.3, 1.0, 1.0).unwrap(),
        ];
        for p in prices.into_iter().map(arc) {
            for n in 3..30 {
                assert_ne!(max_ne(n, &p).unwrap().case, Case::MaxStarCenterOwns);
            }
        }
        let p = unit(0.6);
        let o = outcome(GameKind::Max, &p, 4, 1.0, StructureFamily::StarCenterOwns, Case::MaxStarCenterOwns)
            .unwrap();
        assert_eq!(o.profile.strategy(0).len(), 3);
        assert_prediction(&o);
    }

    #[test]
    fn max_opt_star_examples() {
        let o = max_opt_star(3, &unit(1.0)).unwrap();
        assert_eq!(o.predicted_cost, 7.0);
        let p = arc(PriceFunction::reciprocal(16.0, 1.0, 10.0).unwrap());
        let o = max_opt_star(5, &p).unwrap();
        assert!((o.weight - 8.0f64.sqrt()).abs() < 1e-12);
        assert_prediction(&o);
        let o = max_opt_star(2, &p).unwrap();
        assert_eq!(o.case, Case::SingleEdge);
        assert_prediction(&o);
    }

    #[test]
    fn predictions_match_realized_costs() {
        let prices = [
            PriceFunction::reciprocal(4.0, 1.0, 10.0).unwrap(),
            PriceFunction::reciprocal(0.3, 0.5, 3.0).unwrap(),
            PriceFunction::linear(3.0, 0.25, 1.0, 2.2).unwrap(),
            PriceFunction::constant(2.0, 1.0, 1.0).unwrap(),
            PriceFunction::constant(0.2, 1.0, 4.0).unwrap(),
        ];
        for p in prices.into_iter().map(arc) {
            for n in 2..=9 {
                for o in [
                    opt_sum(n, &p).unwrap(),
                    sum_ne(n, &p).unwrap(),
                    max_ne(n, &p).unwrap(),
                    max_opt_star(n, &p).unwrap(),
                ] {
                    assert_prediction(&o);
                }
                if let Ok(w) = sum_worst_clique(n, &p) {
                    assert_prediction(&w.outcome);
                }
            }
        }
    }

    #[test]
    fn too_few_nodes() {
        assert!(matches!(opt_sum(1, &unit(1.0)), Err(ConstructionError::TooFewNodes(1))));
    }
}
