//! Strategies, profiles, realised graphs and the SUM / MAX cost functions.
//!
//! A profile is serialised as plain text:
//!
//! ```text
//! ncg <n> <sum|max> <price-spec>
//! <owner> <target> <weight>
//! ...
//! ```
//!
//! Weights are printed in shortest round-trip form, so parsing the output
//! reproduces the profile exactly.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::price::{PriceError, PriceFunction};
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid profile at node {node}: {reason}")]
    InvalidProfile { node: NodeId, reason: String },
    #[error("profile text, line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Price(#[from] PriceError),
}

fn invalid(node: NodeId, reason: impl Into<String>) -> GameError {
    GameError::InvalidProfile {
        node,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Sum,
    Max,
}

impl GameKind {
    /// Distance cost from a row of distances: sum or maximum.
    #[inline]
    pub fn aggregate(self, distances: impl Iterator<Item = f64>) -> f64 {
        match self {
            GameKind::Sum => distances.sum(),
            GameKind::Max => distances.fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameKind::Sum => "sum",
            GameKind::Max => "max",
        })
    }
}

impl FromStr for GameKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(GameKind::Sum),
            "max" => Ok(GameKind::Max),
            other => Err(format!("unknown game kind `{other}` (expected sum or max)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OwnedEdge {
    pub target: NodeId,
    pub weight: f64,
}

/// The edges bought by one node, sorted by target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    owner: NodeId,
    edges: Vec<OwnedEdge>,
}

impl Strategy {
    /// Rejects self-loops and repeated targets. Range and weight checks
    /// happen when the strategy joins a profile.
    pub fn new(
        owner: NodeId,
        edges: impl IntoIterator<Item = (NodeId, f64)>,
    ) -> Result<Self, GameError> {
        let mut edges: Vec<OwnedEdge> = edges
            .into_iter()
            .map(|(target, weight)| OwnedEdge { target, weight })
            .collect();
        edges.sort_by_key(|e| e.target);
        for pair in edges.windows(2) {
            if pair[0].target == pair[1].target {
                return Err(invalid(owner, format!("buys two edges to node {}", pair[0].target)));
            }
        }
        if edges.iter().any(|e| e.target == owner) {
            return Err(invalid(owner, "self-loop"));
        }
        Ok(Self { owner, edges })
    }

    pub fn empty(owner: NodeId) -> Self {
        Self {
            owner,
            edges: Vec::new(),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn edges(&self) -> &[OwnedEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn weight_to(&self, target: NodeId) -> Option<f64> {
        self.edges
            .binary_search_by_key(&target, |e| e.target)
            .ok()
            .map(|i| self.edges[i].weight)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn edge_cost(&self, price: &PriceFunction) -> f64 {
        self.edges.iter().map(|e| price.eval_raw(e.weight)).sum()
    }
}

/// One strategy per node plus the game parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    kind: GameKind,
    price: Arc<PriceFunction>,
    strategies: Vec<Strategy>,
}

impl StrategyProfile {
    pub fn new(
        kind: GameKind,
        price: Arc<PriceFunction>,
        strategies: Vec<Strategy>,
    ) -> Result<Self, GameError> {
        let n = strategies.len();
        if n < 2 {
            return Err(invalid(0, format!("need at least 2 nodes, got {n}")));
        }
        for (v, s) in strategies.iter().enumerate() {
            check_strategy(n, &price, v, s)?;
        }
        Ok(Self {
            kind,
            price,
            strategies,
        })
    }

    pub fn empty(kind: GameKind, price: Arc<PriceFunction>, n: usize) -> Result<Self, GameError> {
        Self::new(kind, price, (0..n).map(Strategy::empty).collect())
    }

    /// Builds a profile from `(owner, target, weight)` triples.
    pub fn from_edges(
        kind: GameKind,
        price: Arc<PriceFunction>,
        n: usize,
        edges: &[(NodeId, NodeId, f64)],
    ) -> Result<Self, GameError> {
        let mut per_owner: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for &(owner, target, weight) in edges {
            per_owner
                .get_mut(owner)
                .ok_or_else(|| invalid(owner, format!("owner out of range for n = {n}")))?
                .push((target, weight));
        }
        let strategies = per_owner
            .into_iter()
            .enumerate()
            .map(|(v, e)| Strategy::new(v, e))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(kind, price, strategies)
    }

    pub fn n(&self) -> usize {
        self.strategies.len()
    }

    pub fn kind(&self) -> GameKind {
        self.kind
    }

    pub fn price(&self) -> &PriceFunction {
        &self.price
    }

    pub fn shared_price(&self) -> Arc<PriceFunction> {
        Arc::clone(&self.price)
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn strategy(&self, v: NodeId) -> &Strategy {
        &self.strategies[v]
    }

    /// All bought edges as `(owner, target, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.strategies
            .iter()
            .flat_map(|s| s.edges.iter().map(move |e| (s.owner, e.target, e.weight)))
    }

    pub fn bought_edge_count(&self) -> usize {
        self.strategies.iter().map(Strategy::len).sum()
    }

    /// Replaces the strategy of `v`, leaving `self` untouched.
    pub fn apply_deviation(&self, v: NodeId, strategy: Strategy) -> Result<Self, GameError> {
        if v >= self.n() {
            return Err(invalid(v, format!("node out of range for n = {}", self.n())));
        }
        if strategy.owner != v {
            return Err(invalid(v, format!("strategy is owned by node {}", strategy.owner)));
        }
        check_strategy(self.n(), &self.price, v, &strategy)?;
        let mut next = self.clone();
        next.strategies[v] = strategy;
        Ok(next)
    }

    /// Hex SHA-256 of the text serialisation.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_string().as_bytes()))
    }

    pub fn realize(&self) -> RealizedGame {
        RealizedGame::new(self.clone())
    }
}

fn check_strategy(n: usize, price: &PriceFunction, v: NodeId, s: &Strategy) -> Result<(), GameError> {
    if s.owner != v {
        return Err(invalid(v, format!("strategy at index {v} is owned by {}", s.owner)));
    }
    for e in &s.edges {
        if e.target >= n {
            return Err(invalid(v, format!("target {} out of range for n = {n}", e.target)));
        }
        if e.target == v {
            return Err(invalid(v, "self-loop"));
        }
        if !price.interval().contains(e.weight) || !e.weight.is_finite() {
            return Err(invalid(
                v,
                format!("weight {} outside [{}, {}]", e.weight, price.lo(), price.hi()),
            ));
        }
    }
    for pair in s.edges.windows(2) {
        if pair[0].target >= pair[1].target {
            return Err(invalid(v, format!("duplicate or unsorted target {}", pair[1].target)));
        }
    }
    Ok(())
}

impl fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ncg {} {} {}", self.n(), self.kind, self.price)?;
        for (owner, target, weight) in self.edges() {
            writeln!(f, "{owner} {target} {weight}")?;
        }
        Ok(())
    }
}

impl FromStr for StrategyProfile {
    type Err = GameError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parse_err = |line: usize, reason: String| GameError::Parse { line, reason };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty profile".into()))?;
        let mut parts = header.splitn(4, char::is_whitespace);
        if parts.next() != Some("ncg") {
            return Err(parse_err(hline, "header must start with `ncg`".into()));
        }
        let n: usize = parts
            .next()
            .ok_or_else(|| parse_err(hline, "missing node count".into()))?
            .parse()
            .map_err(|e| parse_err(hline, format!("node count: {e}")))?;
        let kind: GameKind = parts
            .next()
            .ok_or_else(|| parse_err(hline, "missing game kind".into()))?
            .parse()
            .map_err(|e| parse_err(hline, e))?;
        let price: PriceFunction = parts
            .next()
            .ok_or_else(|| parse_err(hline, "missing price spec".into()))?
            .trim()
            .parse()?;
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(lineno, "expected `<owner> <target> <weight>`".into()));
            }
            let owner: usize = fields[0].parse().map_err(|e| parse_err(lineno, format!("owner: {e}")))?;
            let target: usize = fields[1].parse().map_err(|e| parse_err(lineno, format!("target: {e}")))?;
            let weight: f64 = fields[2].parse().map_err(|e| parse_err(lineno, format!("weight: {e}")))?;
            edges.push((owner, target, weight));
        }
        StrategyProfile::from_edges(kind, Arc::new(price), n, &edges)
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    n: usize,
    kind: GameKind,
    price: PriceFunction,
    edges: Vec<(NodeId, NodeId, f64)>,
}

impl Serialize for StrategyProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ProfileRepr {
            n: self.n(),
            kind: self.kind,
            price: (*self.price).clone(),
            edges: self.edges().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StrategyProfile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = ProfileRepr::deserialize(deserializer)?;
        StrategyProfile::from_edges(r.kind, Arc::new(r.price), r.n, &r.edges)
            .map_err(serde::de::Error::custom)
    }
}

/// Per-node cost split into its edge and distance parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub node: NodeId,
    pub edge_cost: f64,
    pub distance_cost: f64,
    pub total: f64,
}

/// The weighted graph `G[S]` with all-pairs distances.
#[derive(Debug, Clone)]
pub struct RealizedGame {
    profile: StrategyProfile,
    /// n*n, `INFINITY` where no edge was bought.
    effective: Vec<f64>,
    /// n*n shortest-path distances, `INFINITY` when unreachable.
    dist: Vec<f64>,
    distance_cost: Vec<f64>,
    diameter: f64,
}

impl RealizedGame {
    pub fn new(profile: StrategyProfile) -> Self {
        let n = profile.n();
        let mut effective = vec![f64::INFINITY; n * n];
        for (u, v, w) in profile.edges() {
            let cell = &mut effective[u * n + v];
            *cell = cell.min(w);
            effective[v * n + u] = effective[u * n + v];
        }
        let mut dist = vec![0.0; n * n];
        for s in 0..n {
            let row = dijkstra_dense(n, &effective, s, None);
            dist[s * n..(s + 1) * n].copy_from_slice(&row);
        }
        for u in 0..n {
            for v in u + 1..n {
                let d = dist[u * n + v].min(dist[v * n + u]);
                dist[u * n + v] = d;
                dist[v * n + u] = d;
            }
        }
        let kind = profile.kind();
        let distance_cost: Vec<f64> = (0..n)
            .map(|v| kind.aggregate(dist[v * n..(v + 1) * n].iter().copied()))
            .collect();
        let diameter = dist.iter().copied().fold(0.0, f64::max);
        Self {
            profile,
            effective,
            dist,
            distance_cost,
            diameter,
        }
    }

    pub fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    pub fn kind(&self) -> GameKind {
        self.profile.kind()
    }

    pub fn price(&self) -> &PriceFunction {
        self.profile.price()
    }

    pub fn distance(&self, u: NodeId, v: NodeId) -> f64 {
        self.dist[u * self.n() + v]
    }

    pub fn distances_from(&self, v: NodeId) -> &[f64] {
        let n = self.n();
        &self.dist[v * n..(v + 1) * n]
    }

    pub fn distance_matrix(&self) -> &[f64] {
        &self.dist
    }

    /// Minimum weight among the edges bought between `u` and `v`.
    pub fn effective_weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let w = self.effective[u * self.n() + v];
        w.is_finite().then_some(w)
    }

    /// Distinct node pairs joined by at least one edge.
    pub fn edge_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |u| {
            (u + 1..n).filter_map(move |v| self.effective_weight(u, v).map(|w| (u, v, w)))
        })
    }

    pub fn edge_pair_count(&self) -> usize {
        self.edge_pairs().count()
    }

    pub fn min_edge_weight(&self) -> Option<f64> {
        self.edge_pairs().map(|e| e.2).reduce(f64::min)
    }

    pub fn max_edge_weight(&self) -> Option<f64> {
        self.edge_pairs().map(|e| e.2).reduce(f64::max)
    }

    /// Distance cost of `v`: sum (SUM) or maximum (MAX) of its distances.
    pub fn distance_cost(&self, v: NodeId) -> f64 {
        self.distance_cost[v]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn is_connected(&self) -> bool {
        self.diameter.is_finite()
    }

    pub fn private_cost(&self, v: NodeId) -> CostBreakdown {
        let edge_cost = self.profile.strategy(v).edge_cost(self.price());
        let distance_cost = self.distance_cost[v];
        CostBreakdown {
            node: v,
            edge_cost,
            distance_cost,
            total: edge_cost + distance_cost,
        }
    }

    pub fn social_cost(&self) -> f64 {
        (0..self.n()).map(|v| self.private_cost(v).total).sum()
    }

    /// Node with the smallest distance cost; lowest id on ties.
    pub fn min_distance_cost_node(&self) -> NodeId {
        (0..self.n())
            .min_by(|&a, &b| self.distance_cost[a].total_cmp(&self.distance_cost[b]))
            .unwrap_or(0)
    }
}

/// Dense O(n^2) Dijkstra over an n*n weight matrix (`INFINITY` = no edge).
/// A `blocked` node is treated as removed from the graph.
pub(crate) fn dijkstra_dense(n: usize, adj: &[f64], src: NodeId, blocked: Option<NodeId>) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    if Some(src) == blocked {
        return dist;
    }
    dist[src] = 0.0;
    if let Some(b) = blocked {
        done[b] = true;
    }
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for (i, &d) in dist.iter().enumerate() {
            if !done[i] && d < best {
                best = d;
                u = i;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        let row = &adj[u * n..(u + 1) * n];
        for (v, &w) in row.iter().enumerate() {
            if !done[v] && w.is_finite() {
                let cand = best + w;
                if cand < dist[v] {
                    dist[v] = cand;
                }
            }
        }
    }
    dist
}
