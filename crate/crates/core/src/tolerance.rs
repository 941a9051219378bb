//! Shared numeric tolerances and the cost comparator.

/// Absolute slack for membership of a weight in the price interval.
pub const DOMAIN: f64 = 1e-12;

/// Default improvement threshold for deviations and the absolute tolerance of
/// every cost comparison and bound check.
pub const COST: f64 = 1e-9;

/// Agreement required between an exact minimiser and a grid search.
pub const MINIMIZER: f64 = 1e-6;

/// Cost ties inside a best-response search.
pub const TIE: f64 = 1e-12;

/// `a < b` by more than `tol`.
#[inline]
pub fn lt(a: f64, b: f64, tol: f64) -> bool {
    a < b - tol
}

/// `a >= b` up to `tol`.
#[inline]
pub fn ge(a: f64, b: f64, tol: f64) -> bool {
    a >= b - tol
}

/// `a <= b` up to `tol`.
#[inline]
pub fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol
}

/// Improvement of `new` over `old`, treating an escape from an infinite cost
/// as an infinite gain and two infinite costs as no gain.
#[inline]
pub fn gain(old: f64, new: f64) -> f64 {
    if old.is_infinite() && new.is_infinite() {
        0.0
    } else {
        old - new
    }
}
