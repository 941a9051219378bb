//! Price functions `p : [lo, hi] -> R+` and their tradeoff minimisers.
//!
//! Only four forms are supported so that every minimiser query has an exact
//! answer: `alpha / x`, `alpha - (1 + eps) x`, a constant, and a
//! piecewise-linear table. All of them are validated to be positive and
//! non-increasing on their interval before use.
//!
//! Textual form, used by config files, CLI flags and profile headers:
//!
//! ```text
//! reciprocal:alpha=4,lo=1,hi=10
//! linear:alpha=3,eps=0.25,lo=1,hi=2.2
//! constant:alpha=1,lo=1,hi=1
//! table:file=prices.csv          (CSV lines `x,p(x)` sorted by x)
//! table:points=1/3;2/2.5;4/1     (inline breakpoints)
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::tolerance;

/// Validation grid size for tabulated prices.
const TABLE_GRID: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriceError {
    #[error("bad weight interval [{lo}, {hi}]: need 0 < lo <= hi")]
    BadInterval { lo: f64, hi: f64 },
    #[error("price is not positive at x = {x} (p = {value})")]
    NonPositivePrice { x: f64, value: f64 },
    #[error("price is not decreasing between x = {x0} and x = {x1}")]
    NotDecreasing { x0: f64, x1: f64 },
    #[error("weight {x} lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("tradeoff coefficients must be positive and finite (got {price_weight}, {weight_coeff})")]
    BadCoefficient { price_weight: f64, weight_coeff: f64 },
    #[error("cannot parse price spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
    #[error("cannot read price table {path}: {reason}")]
    Table { path: PathBuf, reason: String },
}

/// Closed interval of admissible edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightInterval {
    lo: f64,
    hi: f64,
}

impl WeightInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, PriceError> {
        if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(PriceError::BadInterval { lo, hi })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// Membership up to [`tolerance::DOMAIN`].
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - tolerance::DOMAIN && x <= self.hi + tolerance::DOMAIN
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Sorted breakpoints of a piecewise-linear price.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    points: Vec<(f64, f64)>,
    source: Option<PathBuf>,
}

impl PriceTable {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        Self { points, source: None }
    }

    /// Reads CSV lines `x,p(x)`; blank lines and `#` comments are skipped.
    pub fn from_csv(path: &Path) -> Result<Self, PriceError> {
        let err = |reason: String| PriceError::Table {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (x, y) = line
                .split_once(',')
                .ok_or_else(|| err(format!("line {}: expected `x,p(x)`", lineno + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("line {}: {e}", lineno + 1)))
            };
            points.push((parse(x)?, parse(y)?));
        }
        Ok(Self {
            points,
            source: Some(path.to_path_buf()),
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn eval(&self, x: f64) -> f64 {
        let pts = &self.points;
        let idx = pts.partition_point(|&(px, _)| px < x);
        if idx == 0 {
            return pts[0].1;
        }
        if idx == pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (x0, y0) = pts[idx - 1];
        let (x1, y1) = pts[idx];
        if x == x1 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriceForm {
    /// `alpha / x`
    Reciprocal { alpha: f64 },
    /// `alpha - (1 + eps) x`
    Linear { alpha: f64, eps: f64 },
    /// `alpha`
    Constant { alpha: f64 },
    /// Linear interpolation between breakpoints.
    Tabulated(PriceTable),
}

impl PriceForm {
    pub fn name(&self) -> &'static str {
        match self {
            PriceForm::Reciprocal { .. } => "reciprocal",
            PriceForm::Linear { .. } => "linear",
            PriceForm::Constant { .. } => "constant",
            PriceForm::Tabulated(_) => "table",
        }
    }
}

/// A validated, immutable price function.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceFunction {
    interval: WeightInterval,
    form: PriceForm,
}

/// Minimiser of `price_weight * p(x) + weight_coeff * x` over the interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffMinimizer {
    pub price_weight: f64,
    pub weight_coeff: f64,
    pub argmin: f64,
    pub value: f64,
}

impl PriceFunction {
    /// Builds and validates a price function.
    pub fn new(lo: f64, hi: f64, form: PriceForm) -> Result<Self, PriceError> {
        let interval = WeightInterval::new(lo, hi)?;
        let p = Self { interval, form };
        p.validate()?;
        Ok(p)
    }

    pub fn reciprocal(alpha: f64, lo: f64, hi: f64) -> Result<Self, PriceError> {
        Self::new(lo, hi, PriceForm::Reciprocal { alpha })
    }

    pub fn linear(alpha: f64, eps: f64, lo: f64, hi: f64) -> Result<Self, PriceError> {
        Self::new(lo, hi, PriceForm::Linear { alpha, eps })
    }

    pub fn constant(alpha: f64, lo: f64, hi: f64) -> Result<Self, PriceError> {
        Self::new(lo, hi, PriceForm::Constant { alpha })
    }

    /// The interval spans the first and last breakpoint.
    pub fn tabulated(table: PriceTable) -> Result<Self, PriceError> {
        let (lo, hi) = match (table.points.first(), table.points.last()) {
            (Some(first), Some(last)) => (first.0, last.0),
            _ => {
                return Err(PriceError::Parse {
                    spec: "table".into(),
                    reason: "no breakpoints".into(),
                })
            }
        };
        Self::new(lo, hi, PriceForm::Tabulated(table))
    }

    pub fn interval(&self) -> WeightInterval {
        self.interval
    }

    pub fn lo(&self) -> f64 {
        self.interval.lo
    }

    pub fn hi(&self) -> f64 {
        self.interval.hi
    }

    pub fn form(&self) -> &PriceForm {
        &self.form
    }

    /// Checks interval, positivity and monotonicity.
    pub fn validate(&self) -> Result<(), PriceError> {
        let WeightInterval { lo, hi } = self.interval;
        WeightInterval::new(lo, hi)?;
        let positive = |x: f64, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(PriceError::NonPositivePrice { x, value })
            }
        };
        match &self.form {
            PriceForm::Reciprocal { alpha } | PriceForm::Constant { alpha } => {
                positive(lo, *alpha)?;
                positive(hi, self.eval_raw(hi))?;
            }
            PriceForm::Linear { alpha: _, eps } => {
                if !eps.is_finite() || 1.0 + eps < 0.0 {
                    return Err(PriceError::NotDecreasing { x0: lo, x1: hi });
                }
                // decreasing, so the right endpoint is the binding one
                positive(lo, self.eval_raw(lo))?;
                positive(hi, self.eval_raw(hi))?;
            }
            PriceForm::Tabulated(table) => {
                for w in table.points.windows(2) {
                    if !(w[0].0 < w[1].0) {
                        return Err(PriceError::Parse {
                            spec: self.to_string(),
                            reason: format!("breakpoints not strictly increasing at x = {}", w[1].0),
                        });
                    }
                    if w[1].1 > w[0].1 {
                        return Err(PriceError::NotDecreasing { x0: w[0].0, x1: w[1].0 });
                    }
                }
                for &(x, y) in &table.points {
                    positive(x, y)?;
                }
                let mut prev = (lo, self.eval_raw(lo));
                for i in 1..TABLE_GRID {
                    let x = lo + (hi - lo) * i as f64 / (TABLE_GRID - 1) as f64;
                    let y = self.eval_raw(x);
                    positive(x, y)?;
                    if y > prev.1 {
                        return Err(PriceError::NotDecreasing { x0: prev.0, x1: x });
                    }
                    prev = (x, y);
                }
            }
        }
        Ok(())
    }

    /// `p(x)`, rejecting weights outside the interval beyond [`tolerance::DOMAIN`].
    pub fn evaluate(&self, x: f64) -> Result<f64, PriceError> {
        if !self.interval.contains(x) {
            return Err(PriceError::OutOfDomain {
                x,
                lo: self.lo(),
                hi: self.hi(),
            });
        }
        Ok(self.eval_raw(self.interval.clamp(x)))
    }

    /// `p(x)` for a weight already known to lie in the interval.
    pub(crate) fn eval_raw(&self, x: f64) -> f64 {
        match &self.form {
            PriceForm::Reciprocal { alpha } => alpha / x,
            PriceForm::Linear { alpha, eps } => alpha - (1.0 + eps) * x,
            PriceForm::Constant { alpha } => *alpha,
            PriceForm::Tabulated(table) => table.eval(x),
        }
    }

    /// Minimiser of `p(x) + c x`.
    pub fn minimize_tradeoff(&self, c: f64) -> Result<TradeoffMinimizer, PriceError> {
        self.minimize_combination(1.0, c)
    }

    /// Minimiser of `a p(x) + x`.
    pub fn minimize_scaled(&self, a: f64) -> Result<TradeoffMinimizer, PriceError> {
        self.minimize_combination(a, 1.0)
    }

    /// Exact global minimiser of `a p(x) + c x`; ties go to the smaller weight.
    pub fn minimize_combination(&self, a: f64, c: f64) -> Result<TradeoffMinimizer, PriceError> {
        if !(a > 0.0 && c > 0.0 && a.is_finite() && c.is_finite()) {
            return Err(PriceError::BadCoefficient {
                price_weight: a,
                weight_coeff: c,
            });
        }
        let WeightInterval { lo, hi } = self.interval;
        let argmin = match &self.form {
            PriceForm::Reciprocal { alpha } => self.interval.clamp((a * alpha / c).sqrt()),
            PriceForm::Linear { eps, .. } => {
                let slope = c - a * (1.0 + eps);
                if slope < 0.0 {
                    hi
                } else {
                    lo
                }
            }
            PriceForm::Constant { .. } => lo,
            PriceForm::Tabulated(table) => {
                // piecewise linear objective: the minimum sits on a breakpoint
                let mut best = (lo, f64::INFINITY);
                for &(x, y) in &table.points {
                    let v = a * y + c * x;
                    if best.1.is_infinite() || v < best.1 - 1e-12 * best.1.abs().max(1.0) {
                        best = (x, v);
                    }
                }
                best.0
            }
        };
        Ok(TradeoffMinimizer {
            price_weight: a,
            weight_coeff: c,
            argmin,
            value: a * self.eval_raw(argmin) + c * argmin,
        })
    }

    /// `argmin p(x) + c x`; the coefficient is always valid for callers in
    /// this crate (positive counts).
    pub(crate) fn argmin_tradeoff(&self, c: f64) -> f64 {
        self.minimize_tradeoff(c).expect("positive coefficient").argmin
    }

    pub(crate) fn argmin_scaled(&self, a: f64) -> f64 {
        self.minimize_scaled(a).expect("positive coefficient").argmin
    }
}

impl fmt::Display for PriceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let WeightInterval { lo, hi } = self.interval;
        match &self.form {
            PriceForm::Reciprocal { alpha } => write!(f, "reciprocal:alpha={alpha},lo={lo},hi={hi}"),
            PriceForm::Linear { alpha, eps } => {
                write!(f, "linear:alpha={alpha},eps={eps},lo={lo},hi={hi}")
            }
            PriceForm::Constant { alpha } => write!(f, "constant:alpha={alpha},lo={lo},hi={hi}"),
            PriceForm::Tabulated(table) => match &table.source {
                Some(path) => write!(f, "table:file={}", path.display()),
                None => {
                    write!(f, "table:points=")?;
                    for (i, (x, y)) in table.points.iter().enumerate() {
                        if i > 0 {
                            write!(f, ";")?;
                        }
                        write!(f, "{x}/{y}")?;
                    }
                    Ok(())
                }
            },
        }
    }
}

/// `kind:key=value,...` split into its parts.
pub(crate) fn split_spec(spec: &str) -> Result<(&str, Vec<(&str, &str)>), PriceError> {
    let bad = |reason: &str| PriceError::Parse {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let (kind, rest) = spec.trim().split_once(':').ok_or_else(|| bad("missing `kind:`"))?;
    let mut params = Vec::new();
    for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        params.push((k.trim(), v.trim()));
    }
    Ok((kind.trim(), params))
}

impl FromStr for PriceFunction {
    type Err = PriceError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let bad = |reason: String| PriceError::Parse {
            spec: spec.to_string(),
            reason,
        };
        let (kind, params) = split_spec(spec)?;
        let get = |key: &str| -> Result<f64, PriceError> {
            let raw = params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(format!("missing `{key}`")))?;
            raw.parse::<f64>().map_err(|e| bad(format!("`{key}`: {e}")))
        };
        let known: &[&str] = match kind {
            "reciprocal" | "constant" => &["alpha", "lo", "hi"],
            "linear" => &["alpha", "eps", "lo", "hi"],
            "table" => &["file", "points"],
            other => return Err(bad(format!("unknown price kind `{other}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !known.contains(k)) {
            return Err(bad(format!("unexpected key `{k}`")));
        }
        match kind {
            "reciprocal" => Self::reciprocal(get("alpha")?, get("lo")?, get("hi")?),
            "constant" => Self::constant(get("alpha")?, get("lo")?, get("hi")?),
            "linear" => Self::linear(get("alpha")?, get("eps")?, get("lo")?, get("hi")?),
            _ => {
                if let Some((_, path)) = params.iter().find(|(k, _)| *k == "file") {
                    Self::tabulated(PriceTable::from_csv(Path::new(path))?)
                } else if let Some((_, pts)) = params.iter().find(|(k, _)| *k == "points") {
                    let mut points = Vec::new();
                    for pair in pts.split(';').filter(|s| !s.is_empty()) {
                        let (x, y) = pair
                            .split_once('/')
                            .ok_or_else(|| bad(format!("breakpoint `{pair}` is not x/y")))?;
                        let x = x.parse::<f64>().map_err(|e| bad(e.to_string()))?;
                        let y = y.parse::<f64>().map_err(|e| bad(e.to_string()))?;
                        points.push((x, y));
                    }
                    Self::tabulated(PriceTable::new(points))
                } else {
                    Err(bad("table needs `file` or `points`".into()))
                }
            }
        }
    }
}

impl Serialize for PriceFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PriceFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let spec = String::deserialize(deserializer)?;
        spec.parse().map_err(serde::de::Error::custom)
    }
}
