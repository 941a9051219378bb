use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExperimentError, Instance};
use crate::dynamics::{DeviationFamily, Scheduler, SearchOptions};
use crate::game::GameKind;
use crate::price::{split_spec, PriceForm, PriceFunction};

/// A price form with its interval; `alpha` (and `eps` for linear prices)
/// are swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTemplate {
    /// `reciprocal`, `linear` or `constant`.
    pub form: String,
    pub lo: f64,
    pub hi: f64,
}

impl PriceTemplate {
    /// Parses `form:lo=..,hi=..`; `alpha` and `eps` keys are not allowed
    /// here since they are swept.
    pub fn parse(spec: &str) -> Result<Self, ExperimentError> {
        let bad = |r: String| ExperimentError::InvalidConfig(format!("price template `{spec}`: {r}"));
        let (form, pairs) = split_spec(spec).map_err(|e| bad(e.to_string()))?;
        if !matches!(form, "reciprocal" | "linear" | "constant") {
            return Err(bad(format!("cannot sweep `{form}` prices")));
        }
        let mut lo = None;
        let mut hi = None;
        for (k, v) in pairs {
            let x: f64 = v.parse().map_err(|_| bad(format!("bad number `{v}`")))?;
            match k {
                "lo" => lo = Some(x),
                "hi" => hi = Some(x),
                other => return Err(bad(format!("unexpected key `{other}`"))),
            }
        }
        Ok(Self {
            form: form.to_string(),
            lo: lo.ok_or_else(|| bad("missing lo".into()))?,
            hi: hi.ok_or_else(|| bad("missing hi".into()))?,
        })
    }

    pub fn build(&self, alpha: f64, eps: Option<f64>) -> Result<PriceFunction, ExperimentError> {
        let form = match (self.form.as_str(), eps) {
            ("reciprocal", None) => PriceForm::Reciprocal { alpha },
            ("constant", None) => PriceForm::Constant { alpha },
            ("linear", Some(eps)) => PriceForm::Linear { alpha, eps },
            (f, _) => {
                return Err(ExperimentError::InvalidConfig(format!(
                    "`{f}` prices {} eps",
                    if eps.is_some() { "take no" } else { "need" }
                )))
            }
        };
        PriceFunction::new(self.lo, self.hi, form).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: GameKind,
    pub price: PriceTemplate,
    pub alpha: Vec<f64>,
    /// Linear prices only.
    pub eps: Vec<f64>,
    pub n: Vec<usize>,
    pub grid: usize,
    /// `exhaustive` falls back to the restricted families above the
    /// exhaustive limit.
    pub family: DeviationFamily,
    pub scheduler: Scheduler,
    pub seed: Option<u64>,
    pub dynamics_runs: usize,
    pub max_rounds: usize,
    pub density: f64,
    pub epsilon: f64,
    pub exhaustive_limit: usize,
    /// Not part of the fingerprint.
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: GameKind, price: PriceTemplate, alpha: Vec<f64>, n: Vec<usize>) -> Self {
        let opts = SearchOptions::default();
        Self {
            kind,
            price,
            alpha,
            eps: Vec::new(),
            n,
            grid: 64,
            family: DeviationFamily::ExhaustiveSubset,
            scheduler: Scheduler::RoundRobin,
            seed: None,
            dynamics_runs: 0,
            max_rounds: 50,
            density: 0.3,
            epsilon: opts.epsilon,
            exhaustive_limit: opts.exhaustive_limit,
            out: None,
        }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            epsilon: self.epsilon,
            exhaustive_limit: self.exhaustive_limit,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(super::io_err(path))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let bad = |line: usize, r: String| ExperimentError::InvalidConfig(format!("line {line}: {r}"));
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(i + 1, format!("expected key = value, got `{line}`")))?;
            if map.insert(k.trim().to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(bad(i + 1, format!("duplicate key `{}`", k.trim())));
            }
        }
        let mut take = |k: &str| map.remove(k);
        let req = |k: &str, v: Option<(usize, String)>| {
            v.ok_or_else(|| ExperimentError::InvalidConfig(format!("missing key `{k}`")))
        };

        let (l, game) = req("game", take("game"))?;
        let kind: GameKind = game.parse::<GameKind>().map_err(|e| bad(l, e.to_string()))?;
        let (l, p) = req("price", take("price"))?;
        let lo = take("lo");
        let hi = take("hi");
        let price = match (lo, hi) {
            (Some((_, lo)), Some((_, hi))) => PriceTemplate::parse(&format!("{p}:lo={lo},hi={hi}")),
            _ => PriceTemplate::parse(&p),
        }
        .map_err(|e| bad(l, e.to_string()))?;
        let (l, a) = req("alpha", take("alpha"))?;
        let alpha = parse_floats(&a).map_err(|e| bad(l, e))?;
        let (l, ns) = req("n", take("n"))?;
        let n = parse_counts(&ns).map_err(|e| bad(l, e))?;

        let mut cfg = Self::new(kind, price, alpha, n);
        if let Some((l, v)) = take("eps") {
            cfg.eps = parse_floats(&v).map_err(|e| bad(l, e))?;
        }
        if let Some((l, v)) = take("grid") {
            cfg.grid = parse_one(&v).map_err(|e| bad(l, e))?;
        }
        if let Some((l, v)) = take("family") {
            cfg.family = v.parse().map_err(|e| bad(l, format!("{e}")))?;
        }
        let seed = match take("seed") {
            Some((l, v)) => Some(parse_one::<u64>(&v).map_err(|e| bad(l, e))?),
            None => None,
        };
        cfg.seed = seed;
        if let Some((l, v)) = take("scheduler") {
            cfg.scheduler = match v.as_str() {
                "round-robin" => Scheduler::RoundRobin,
                "random" => Scheduler::RandomPermutation(seed.ok_or_else(|| bad(l, "random scheduler needs a seed".into()))?),
                other => return Err(bad(l, format!("unknown scheduler `{other}`"))),
            };
        }
        if let Some((l, v)) = take("dynamics_runs") {
            cfg.dynamics_runs = parse_one(&v).map_err(|e| bad(l, e))?;
        }
        if let Some((l, v)) = take("max_rounds") {
            cfg.max_rounds = parse_one(&v).map_err(|e| bad(l, e))?;
        }
        if let Some((l, v)) = take("density") {
            cfg.density = parse_one(&v).map_err(|e| bad(l, e))?;
        }
        if let Some((l, v)) = take("epsilon") {
            cfg.epsilon = parse_one(&v).map_err(|e| bad(l, e))?;
        }
        if let Some((l, v)) = take("exhaustive_limit") {
            cfg.exhaustive_limit = parse_one(&v).map_err(|e| bad(l, e))?;
        }
        if let Some((_, v)) = take("out") {
            cfg.out = Some(PathBuf::from(v));
        }
        if let Some((k, (l, _))) = map.into_iter().next() {
            return Err(bad(l, format!("unknown key `{k}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// One `key = value` line per field in a fixed order. Parsing it gives
    /// back an equal config.
    pub fn canonical(&self) -> String {
        let mut s = self.canonical_without_out();
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        s
    }

    fn canonical_without_out(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "game = {}", self.kind);
        let _ = writeln!(s, "price = {}", self.price.form);
        let _ = writeln!(s, "lo = {}", self.price.lo);
        let _ = writeln!(s, "hi = {}", self.price.hi);
        let _ = writeln!(s, "alpha = {}", join(&self.alpha));
        if !self.eps.is_empty() {
            let _ = writeln!(s, "eps = {}", join(&self.eps));
        }
        let ns: Vec<String> = self.n.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "n = {}", ns.join(", "));
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "family = {}", self.family);
        let scheduler = match self.scheduler {
            Scheduler::RoundRobin => "round-robin",
            Scheduler::RandomPermutation(_) => "random",
        };
        let _ = writeln!(s, "scheduler = {scheduler}");
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        let _ = writeln!(s, "dynamics_runs = {}", self.dynamics_runs);
        let _ = writeln!(s, "max_rounds = {}", self.max_rounds);
        let _ = writeln!(s, "density = {}", self.density);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "exhaustive_limit = {}", self.exhaustive_limit);
        s
    }

    /// Hex SHA-256 of the canonical form without the output directory.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_without_out().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |r: String| Err(ExperimentError::InvalidConfig(r));
        if self.alpha.is_empty() {
            return bad("empty alpha list".into());
        }
        if self.n.is_empty() {
            return bad("empty n list".into());
        }
        if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
            return bad(format!("n = {n} is below 2"));
        }
        if self.grid < 2 {
            return bad(format!("grid = {} is below 2", self.grid));
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.density) {
            return bad(format!("density {} not in [0, 1]", self.density));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon {} must be finite and non-negative", self.epsilon));
        }
        match (self.scheduler, self.seed) {
            (Scheduler::RandomPermutation(_), None) => return bad("random scheduler needs a seed".into()),
            (Scheduler::RoundRobin, Some(_)) if self.dynamics_runs == 0 => {
                return bad("seed given but nothing is randomised".into())
            }
            _ => {}
        }
        if self.price.form == "linear" && self.eps.is_empty() {
            return bad("linear prices need an eps list".into());
        }
        if self.price.form != "linear" && !self.eps.is_empty() {
            return bad(format!("`{}` prices take no eps", self.price.form));
        }
        self.instances().map(|_| ())
    }

    /// Every `(price, n)` pair in canonical order: alpha, then eps, then n.
    pub(super) fn instances(&self) -> Result<Vec<Instance>, ExperimentError> {
        let eps: Vec<Option<f64>> = if self.eps.is_empty() {
            vec![None]
        } else {
            self.eps.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &e in &eps {
                let price = Arc::new(self.price.build(alpha, e)?);
                for &n in &self.n {
                    out.push(Instance {
                        alpha,
                        eps: e,
                        n,
                        price: Arc::clone(&price),
                    });
                }
            }
        }
        let mut keys: Vec<_> = out.iter().map(|i| (i.price.to_string(), i.n)).collect();
        keys.sort();
        keys.dedup();
        if keys.len() != out.len() {
            return Err(ExperimentError::InvalidConfig("repeated instances".into()));
        }
        Ok(out)
    }
}

fn parse_one<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("bad value `{v}`"))
}

/// Comma-separated numbers.
pub fn parse_floats(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("bad number `{s}`"))
        })
        .collect()
}

/// Comma-separated counts and inclusive `a..b` ranges.
pub fn parse_counts(v: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: usize = parse_one(a)?;
                let b: usize = parse_one(b.trim_start_matches('='))?;
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_one(part)?),
        }
    }
    Ok(out)
}
