//! Cost of a single node's alternative strategies without re-realising the
//! whole graph.
//!
//! Any shortest path from `v` leaves through one of `v`'s incident edges and
//! never returns to `v`. So with `base` the all-pairs distances of the graph
//! with `v` deleted, `d(v, u) = min_w (len(v, w) + base[w][u])`, where
//! `len(v, w)` is the cheaper of the edge others bought to `v` and the edge
//! `v` buys itself. `base` does not depend on `v`'s strategy.

use crate::game::{dijkstra_dense, GameKind, StrategyProfile};
#[cfg(test)]
use crate::game::Strategy;
use crate::price::PriceFunction;
use crate::NodeId;

pub(crate) struct DeviationContext<'a> {
    pub n: usize,
    pub kind: GameKind,
    pub price: &'a PriceFunction,
    /// n*n distances avoiding `v`.
    base: Vec<f64>,
    /// Cheapest edge bought towards `v` by each other node.
    fixed: Vec<f64>,
    /// Distances from `v` using only the edges in `fixed`.
    reach: Vec<f64>,
}

impl<'a> DeviationContext<'a> {
    pub fn new(profile: &'a StrategyProfile, v: NodeId) -> Self {
        let n = profile.n();
        let mut adj = vec![f64::INFINITY; n * n];
        let mut fixed = vec![f64::INFINITY; n];
        for (owner, target, w) in profile.edges() {
            if owner == v {
                continue;
            }
            if target == v {
                fixed[owner] = fixed[owner].min(w);
                continue;
            }
            let cell = &mut adj[owner * n + target];
            *cell = cell.min(w);
            adj[target * n + owner] = adj[owner * n + target];
        }
        let mut base = vec![f64::INFINITY; n * n];
        for s in 0..n {
            if s != v {
                let row = dijkstra_dense(n, &adj, s, Some(v));
                base[s * n..(s + 1) * n].copy_from_slice(&row);
            }
        }
        let mut reach = vec![f64::INFINITY; n];
        for w in 0..n {
            if fixed[w].is_finite() {
                relax(&mut reach, fixed[w], &base[w * n..(w + 1) * n]);
            }
        }
        reach[v] = 0.0;
        Self {
            n,
            kind: profile.kind(),
            price: profile.price(),
            base,
            fixed,
            reach,
        }
    }

    #[inline]
    pub fn base_row(&self, w: NodeId) -> &[f64] {
        &self.base[w * self.n..(w + 1) * self.n]
    }

    /// Distances from `v` using only edges bought by others.
    pub fn reach(&self) -> &[f64] {
        &self.reach
    }

    /// Lowers `dist` by the paths through an own edge `(w, x)`.
    #[inline]
    pub fn add_edge(&self, dist: &mut [f64], w: NodeId, x: f64) {
        if x < self.fixed[w] {
            relax(dist, x, self.base_row(w));
        }
    }

    #[inline]
    pub fn aggregate(&self, dist: &[f64]) -> f64 {
        self.kind.aggregate(dist.iter().copied())
    }

    pub fn distance_cost(&self, edges: &[(NodeId, f64)]) -> f64 {
        let mut dist = self.reach.clone();
        for &(w, x) in edges {
            self.add_edge(&mut dist, w, x);
        }
        self.aggregate(&dist)
    }

    /// Private cost of `v` when it plays `edges`.
    pub fn cost(&self, edges: &[(NodeId, f64)]) -> f64 {
        let edge_cost: f64 = edges.iter().map(|&(_, x)| self.price.eval_raw(x)).sum();
        edge_cost + self.distance_cost(edges)
    }

    #[cfg(test)]
    pub fn cost_of(&self, s: &Strategy) -> f64 {
        let edges: Vec<_> = s.edges().iter().map(|e| (e.target, e.weight)).collect();
        self.cost(&edges)
    }
}

#[inline]
fn relax(dist: &mut [f64], offset: f64, row: &[f64]) {
    for (d, &b) in dist.iter_mut().zip(row) {
        let cand = offset + b;
        if cand < *d {
            *d = cand;
        }
    }
}
