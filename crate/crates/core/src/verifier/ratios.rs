use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{max_lower_bound, max_x_star, StabilityReport, VerifierError};
use crate::constructions::{self, Case};
use crate::dynamics::float;
use crate::game::{GameKind, StrategyProfile};
use crate::price::PriceFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub kind: GameKind,
    pub n: usize,
    #[serde(with = "float")]
    pub ne_cost: f64,
    #[serde(with = "float")]
    pub opt_cost: f64,
    /// `ne_cost / opt_cost`, infinite unless both are finite.
    #[serde(with = "float")]
    pub ratio: f64,
    /// Closed-form bound values relevant to the instance.
    pub bounds: BTreeMap<String, f64>,
}

fn ratio(ne: f64, opt: f64) -> f64 {
    if ne.is_finite() && opt.is_finite() {
        ne / opt
    } else {
        f64::INFINITY
    }
}

/// Reference cost the ratios divide by: the optimal SUM construction, or
/// the MAX social-cost lower bound.
pub fn opt_reference(kind: GameKind, n: usize, price: &Arc<PriceFunction>) -> Result<f64, VerifierError> {
    Ok(match kind {
        GameKind::Sum => constructions::opt_sum(n, price)?.predicted_cost,
        GameKind::Max => max_lower_bound(n, price),
    })
}

/// Bound values reported alongside anarchy ratios.
fn anarchy_bounds(kind: GameKind, n: usize, price: &Arc<PriceFunction>) -> Result<BTreeMap<String, f64>, VerifierError> {
    let mut b = BTreeMap::new();
    let nf = n as f64;
    b.insert("n".to_string(), nf);
    match kind {
        GameKind::Sum => {
            let x = price.argmin_tradeoff(1.0);
            b.insert("tradeoff-over-lo".into(), (price.eval_raw(x) + x) / price.lo());
            if constructions::sum_worst_clique(n, price).is_ok() {
                b.insert("clique-ratio".into(), constructions::worst_clique_ratio(n, price));
            }
        }
        GameKind::Max => {
            b.insert("opt-star".into(), constructions::max_opt_star(n, price)?.predicted_cost);
            b.insert("cube-root".into(), 1.0 + nf.cbrt());
            // argmin x + p(x)/2 and argmin p(x) + x/2
            for (name, x) in [
                ("upper-over-lower", max_x_star(price)),
                ("upper-over-lower-alt", price.argmin_scaled(2.0)),
            ] {
                let p = price.eval_raw(x);
                let upper = p + 2.0 * x + (p * p * x * nf).cbrt();
                b.insert(name.into(), upper / (x + p));
            }
        }
    }
    Ok(b)
}

/// Worst certified equilibrium against the reference optimum.
pub fn poa_report(
    kind: GameKind,
    n: usize,
    price: &Arc<PriceFunction>,
    equilibria: &[(&StrategyProfile, &StabilityReport)],
) -> Result<RatioReport, VerifierError> {
    if equilibria.is_empty() {
        return Err(VerifierError::InvalidArgument("no equilibria given".into()));
    }
    let mut ne_cost = f64::NEG_INFINITY;
    for (profile, report) in equilibria {
        report.require_stable_for(profile)?;
        if profile.kind() != kind || profile.n() != n {
            return Err(VerifierError::InvalidArgument(format!(
                "profile is a {} game on {} nodes, expected {kind} on {n}",
                profile.kind(),
                profile.n()
            )));
        }
        ne_cost = ne_cost.max(profile.realize().social_cost());
    }
    let opt_cost = opt_reference(kind, n, price)?;
    Ok(RatioReport {
        kind,
        n,
        ne_cost,
        opt_cost,
        ratio: ratio(ne_cost, opt_cost),
        bounds: anarchy_bounds(kind, n, price)?,
    })
}

/// The constructed equilibrium against the reference optimum. `bounds`
/// carries the `ceiling` for the construction's case.
pub fn pos_report(kind: GameKind, n: usize, price: &Arc<PriceFunction>) -> Result<RatioReport, VerifierError> {
    let ne = match kind {
        GameKind::Sum => constructions::sum_ne(n, price)?,
        GameKind::Max => constructions::max_ne(n, price)?,
    };
    let ne_cost = ne.profile.realize().social_cost();
    let opt_cost = opt_reference(kind, n, price)?;
    let ceiling = match ne.case {
        Case::SumStarCheapEdges | Case::SumStarFallback => 6.0,
        Case::SumClique => {
            let x_star = price.argmin_tradeoff(1.0);
            let x_bar = price.argmin_tradeoff((n - 1) as f64);
            2.0 + 2.0 * x_star / x_bar
        }
        Case::MaxStarCenterOwns => 8.0,
        Case::MaxStarSatellitesOwn | Case::MaxCliqueOneOwner => 4.0,
        Case::SingleEdge => match kind {
            GameKind::Sum => 2.0,
            GameKind::Max => 4.0,
        },
        other => unreachable!("{other} is not an equilibrium construction"),
    };
    let mut bounds = BTreeMap::new();
    bounds.insert("ceiling".to_string(), ceiling);
    Ok(RatioReport {
        kind,
        n,
        ne_cost,
        opt_cost,
        ratio: ratio(ne_cost, opt_cost),
        bounds,
    })
}

/// Social cost of the `hi`-weight clique over that of the `lo`-weight star,
/// both realised. `bounds["clique-ratio"]` holds the closed form.
pub fn worst_clique_report(
    n: usize,
    price: &Arc<PriceFunction>,
    report: &StabilityReport,
) -> Result<RatioReport, VerifierError> {
    let clique = constructions::sum_worst_clique(n, price)?;
    report.require_stable_for(&clique.outcome.profile)?;
    let ne_cost = clique.outcome.profile.realize().social_cost();
    let star = constructions::star(GameKind::Sum, price, n, price.lo(), true)?;
    let opt_cost = star.realize().social_cost();
    let mut bounds = BTreeMap::new();
    bounds.insert("clique-ratio".to_string(), clique.ratio);
    Ok(RatioReport {
        kind: GameKind::Sum,
        n,
        ne_cost,
        opt_cost,
        ratio: ratio(ne_cost, opt_cost),
        bounds,
    })
}
