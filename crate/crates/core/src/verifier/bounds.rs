use serde::{Deserialize, Serialize};

use super::{require_kind, StabilityReport, VerifierError};
use crate::dynamics::float;
use crate::game::{GameKind, RealizedGame};
use crate::price::PriceFunction;
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `lhs <= rhs`
    AtMost,
    /// `lhs >= rhs`
    AtLeast,
    /// `lhs == rhs`
    Equal,
}

/// One inequality evaluated on one instance. `slack` is positive when the
/// inequality holds with room to spare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub direction: Direction,
    #[serde(with = "float")]
    pub lhs: f64,
    #[serde(with = "float")]
    pub rhs: f64,
    pub satisfied: bool,
    #[serde(with = "float")]
    pub slack: f64,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, direction: Direction, lhs: f64, rhs: f64) -> Self {
        let tol = tolerance::COST;
        let (satisfied, slack) = match direction {
            Direction::AtMost => (tolerance::le(lhs, rhs, tol), rhs - lhs),
            Direction::AtLeast => (tolerance::ge(lhs, rhs, tol), lhs - rhs),
            Direction::Equal => ((lhs - rhs).abs() <= tol, -(lhs - rhs).abs()),
        };
        Self {
            name: name.into(),
            direction,
            lhs,
            rhs,
            satisfied,
            slack,
        }
    }
}

fn certified(game: &RealizedGame, report: &StabilityReport) -> Result<(), VerifierError> {
    report.require_stable_for(game.profile())
}

/// `c(S) >= 2 x̌ n (n-1) + m (p(x*) + x* - 4 x̌)` with `x̌` the lightest edge,
/// `m` the number of bought edges and `x* = argmin p(x) + x`.
pub fn sum_lower_bound(game: &RealizedGame) -> Result<BoundCheck, VerifierError> {
    require_kind(game, "sum-cost-lower", GameKind::Sum)?;
    if !game.is_connected() {
        return Err(VerifierError::Disconnected);
    }
    let p = game.price();
    let n = game.n() as f64;
    let x_min = game.min_edge_weight().ok_or(VerifierError::Disconnected)?;
    let m = game.profile().bought_edge_count() as f64;
    let x_star = p.argmin_tradeoff(1.0);
    let rhs = 2.0 * x_min * n * (n - 1.0) + m * (p.eval_raw(x_star) + x_star - 4.0 * x_min);
    Ok(BoundCheck::new("sum-cost-lower", Direction::AtLeast, game.social_cost(), rhs))
}

/// `c(S) <= n δ(v) + x* (n-1)^2 + 2 (p(x*) + x*) n (n-1)` with `v` the node
/// of least distance cost.
pub fn sum_cost_upper_check(game: &RealizedGame, report: &StabilityReport) -> Result<BoundCheck, VerifierError> {
    require_kind(game, "sum-cost-upper", GameKind::Sum)?;
    certified(game, report)?;
    let p = game.price();
    let n = game.n() as f64;
    let delta = game.distance_cost(game.min_distance_cost_node());
    let x_star = p.argmin_tradeoff(1.0);
    let rhs = n * delta + x_star * (n - 1.0).powi(2) + 2.0 * (p.eval_raw(x_star) + x_star) * n * (n - 1.0);
    Ok(BoundCheck::new("sum-cost-upper", Direction::AtMost, game.social_cost(), rhs))
}

/// Diameter and heaviest-edge bounds of a SUM equilibrium.
///
/// Every edge weighs at most `s = p(x*) + x*`. If `hi <= s` the diameter is
/// at most `2 (p(hi) + hi)`; otherwise at most `s p(x) / x + x` with `x = x*`
/// when `p(x*) <= x*` and `x = p(x*)` (clamped) otherwise.
pub fn sum_diameter_check(game: &RealizedGame, report: &StabilityReport) -> Result<Vec<BoundCheck>, VerifierError> {
    require_kind(game, "sum-diameter", GameKind::Sum)?;
    certified(game, report)?;
    let p = game.price();
    let x_star = p.argmin_tradeoff(1.0);
    let p_star = p.eval_raw(x_star);
    let s = p_star + x_star;
    let hi = p.hi();
    let rhs = if hi <= s {
        2.0 * (p.eval_raw(hi) + hi)
    } else {
        let x = if p_star <= x_star { x_star } else { p.interval().clamp(p_star) };
        s * p.eval_raw(x) / x + x
    };
    let heaviest = game.max_edge_weight().unwrap_or(0.0);
    Ok(vec![
        BoundCheck::new("sum-diameter", Direction::AtMost, game.diameter(), rhs),
        BoundCheck::new("sum-edge-weight", Direction::AtMost, heaviest, s),
    ])
}

/// Minimiser of `x + p(x)/2`, used by the MAX bounds.
pub fn max_x_star(price: &PriceFunction) -> f64 {
    price.argmin_tradeoff(2.0)
}

/// `(x* + p(x*)/2) n` with `x* = argmin x + p(x)/2`.
pub fn max_lower_bound(n: usize, price: &PriceFunction) -> f64 {
    let x = max_x_star(price);
    (x + price.eval_raw(x) / 2.0) * n as f64
}

pub fn max_lower_check(game: &RealizedGame) -> Result<BoundCheck, VerifierError> {
    require_kind(game, "max-cost-lower", GameKind::Max)?;
    let rhs = max_lower_bound(game.n(), game.price());
    Ok(BoundCheck::new("max-cost-lower", Direction::AtLeast, game.social_cost(), rhs))
}

/// `c(S) <= n δ(v) + x* (n-1) + 2 (p(x*) + x*) (n-1)` with `δ` the MAX
/// distance cost of the least eccentric node and `x* = argmin x + p(x)/2`.
pub fn max_cost_upper_check(game: &RealizedGame, report: &StabilityReport) -> Result<BoundCheck, VerifierError> {
    require_kind(game, "max-cost-upper", GameKind::Max)?;
    certified(game, report)?;
    let p = game.price();
    let n = game.n() as f64;
    let delta = game.distance_cost(game.min_distance_cost_node());
    let x = max_x_star(p);
    let rhs = n * delta + x * (n - 1.0) + 2.0 * (p.eval_raw(x) + x) * (n - 1.0);
    Ok(BoundCheck::new("max-cost-upper", Direction::AtMost, game.social_cost(), rhs))
}

/// `k^3 - 3k^2 + 2k <= p(x)^2 n / x^2` at `k = (diam - x) / (4x)`.
pub fn max_diameter_check(game: &RealizedGame, report: &StabilityReport, x: f64) -> Result<BoundCheck, VerifierError> {
    require_kind(game, "max-diameter", GameKind::Max)?;
    certified(game, report)?;
    let p = game.price();
    if !p.interval().contains(x) {
        return Err(VerifierError::OutOfDomain {
            x,
            lo: p.lo(),
            hi: p.hi(),
        });
    }
    let k = (game.diameter() - x) / (4.0 * x);
    let lhs = k * k * k - 3.0 * k * k + 2.0 * k;
    let rhs = p.eval_raw(x).powi(2) * game.n() as f64 / (x * x);
    Ok(BoundCheck::new("max-diameter", Direction::AtMost, lhs, rhs))
}
