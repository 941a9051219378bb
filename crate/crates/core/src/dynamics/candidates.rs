use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::price::PriceFunction;

/// Finite set of weights that deviations may use.
///
/// Built from the interval endpoints, every tradeoff minimiser
/// `argmin p(x) + k x` and `argmin k p(x) + x` for `k = 1..max(n-1, 2)`, the clamped
/// price `p(argmin p(x) + x)`, and a uniform grid of `grid` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateWeights {
    weights: Vec<f64>,
}

impl CandidateWeights {
    pub fn new(price: &PriceFunction, n: usize, grid: usize) -> Result<Self, DynamicsError> {
        if n < 2 {
            return Err(DynamicsError::InvalidArgument(format!("need n >= 2, got {n}")));
        }
        if grid < 2 {
            return Err(DynamicsError::InvalidArgument(format!("need grid >= 2, got {grid}")));
        }
        let (lo, hi) = (price.lo(), price.hi());
        let mut weights = Vec::with_capacity(2 * n + grid);
        for i in 0..grid {
            weights.push(lo + (hi - lo) * i as f64 / (grid - 1) as f64);
        }
        weights.push(lo);
        weights.push(hi);
        // k = 2 even for n = 2: the MAX bounds use argmin p(x) + 2x and 2p(x) + x
        for k in 1..n.max(3) {
            weights.push(price.argmin_tradeoff(k as f64));
            weights.push(price.argmin_scaled(k as f64));
        }
        let x_star = price.argmin_tradeoff(1.0);
        weights.push(price.interval().clamp(price.eval_raw(x_star)));
        Ok(Self::normalized(price, weights))
    }

    /// An explicit candidate list; every weight must lie in the interval.
    pub fn from_weights(price: &PriceFunction, weights: Vec<f64>) -> Result<Self, DynamicsError> {
        if weights.is_empty() {
            return Err(DynamicsError::InvalidArgument("empty candidate list".into()));
        }
        if let Some(&x) = weights.iter().find(|&&x| !price.interval().contains(x)) {
            return Err(DynamicsError::InvalidArgument(format!(
                "candidate {x} outside [{}, {}]",
                price.lo(),
                price.hi()
            )));
        }
        Ok(Self::normalized(price, weights))
    }

    fn normalized(price: &PriceFunction, mut weights: Vec<f64>) -> Self {
        for w in &mut weights {
            *w = price.interval().clamp(*w);
        }
        weights.sort_by(f64::total_cmp);
        weights.dedup_by(|b, a| (*b - *a).abs() <= 1e-12);
        if let Some(last) = weights.last_mut() {
            // the grid can land a rounding error below hi
            if (*last - price.hi()).abs() <= 1e-12 {
                *last = price.hi();
            }
        }
        Self { weights }
    }

    /// Ascending.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.weights.iter().any(|&w| (w - x).abs() <= 1e-12)
    }
}
