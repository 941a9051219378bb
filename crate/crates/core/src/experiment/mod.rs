//! Reproducible parameter sweeps.
//!
//! A config is a flat `key = value` text file; list values are comma
//! separated and `a..b` expands to an inclusive integer range:
//!
//! ```text
//! game = sum
//! price = reciprocal
//! alpha = 1, 4, 16, 64
//! lo = 1
//! hi = 10
//! n = 4..10
//! grid = 64
//! family = exhaustive
//! scheduler = random
//! seed = 7
//! dynamics_runs = 2
//! out = results/reciprocal
//! ```

mod config;
pub mod report;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{parse_counts, parse_floats, ExperimentConfig, PriceTemplate};

use crate::constructions::{self, ConstructionOutcome};
use crate::dynamics::{float, random_profile, run_dynamics, CandidateWeights, DeviationFamily, Scheduler};
use crate::game::{GameKind, StrategyProfile};
use crate::price::PriceFunction;
use crate::verifier::{self, BoundCheck, StabilityReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Outcome for one `(price, n)` instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub kind: GameKind,
    /// Price spec; together with `n` it keys the row.
    pub price: String,
    pub alpha: f64,
    pub eps: Option<f64>,
    pub n: usize,
    pub family: Option<DeviationFamily>,
    pub case: Option<String>,
    pub stable: Option<bool>,
    #[serde(with = "float")]
    pub ne_cost: f64,
    #[serde(with = "float")]
    pub opt_cost: f64,
    /// Constructed equilibrium over the reference optimum.
    #[serde(with = "float")]
    pub ratio: f64,
    #[serde(with = "float")]
    pub ceiling: f64,
    /// Worst certified equilibrium (construction and dynamics) over the
    /// reference optimum.
    #[serde(with = "float")]
    pub poa_ratio: f64,
    pub bounds: Vec<BoundCheck>,
    /// Clique of `hi` edges, when its preconditions hold: certified flag,
    /// realised ratio against the `lo` star and the closed-form ratio, which
    /// lies between one and two times the realised one.
    pub worst_clique: Option<(bool, f64, f64)>,
    pub dynamics_runs: usize,
    pub dynamics_converged: usize,
    pub dynamics_certified: usize,
    /// Failed bound checks over every certified equilibrium.
    pub violations: usize,
    pub error: Option<String>,
}

impl ExperimentRow {
    pub fn key(&self) -> (String, usize) {
        (self.price.clone(), self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub fingerprint: String,
    pub rows: Vec<ExperimentRow>,
    pub wall_time_secs: f64,
    pub tool_version: String,
}

impl ExperimentRecord {
    /// Hex SHA-256 over the config fingerprint and the rows, excluding
    /// timing. Equal for reruns of the same config.
    pub fn digest(&self) -> String {
        let rows = serde_json::to_string(&self.rows).expect("rows serialise");
        let mut h = Sha256::new();
        h.update(self.fingerprint.as_bytes());
        h.update(rows.as_bytes());
        hex::encode(h.finalize())
    }
}

pub const ROWS_FILE: &str = "rows.jsonl";
pub const CONFIG_FILE: &str = "config.txt";
pub const RECORD_FILE: &str = "record.json";

struct Instance {
    alpha: f64,
    eps: Option<f64>,
    n: usize,
    price: Arc<PriceFunction>,
}

/// Runs every instance of `config`, in parallel on `workers` threads (all
/// cores when `None`). With an output directory, rows are appended to
/// `rows.jsonl` as they finish and rows already there are reused.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentRecord, ExperimentError> {
    config.validate()?;
    let start = Instant::now();
    let instances = config.instances()?;
    let fingerprint = config.fingerprint();

    let mut done: BTreeMap<(String, usize), ExperimentRow> = BTreeMap::new();
    let writer = match &config.out {
        Some(dir) => {
            let existing = prepare_out_dir(dir, config)?;
            for row in existing {
                done.insert(row.key(), row);
            }
            let path = dir.join(ROWS_FILE);
            let file = OpenOptions::new().append(true).create(true).open(&path).map_err(io_err(&path))?;
            Some((Mutex::new(file), path))
        }
        None => None,
    };

    let todo: Vec<&Instance> = instances
        .iter()
        .filter(|i| !done.contains_key(&(i.price.to_string(), i.n)))
        .collect();
    let run = || {
        todo.par_iter()
            .map(|inst| {
                let row = run_instance(config, inst);
                if let Some((file, path)) = &writer {
                    let line = serde_json::to_string(&row).expect("rows serialise");
                    let mut f = file.lock().expect("row writer poisoned");
                    writeln!(f, "{line}").and_then(|_| f.flush()).map_err(io_err(path))?;
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, ExperimentError>>()
    };
    let fresh = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| ExperimentError::InvalidConfig(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    for row in fresh {
        done.insert(row.key(), row);
    }
    let rows = instances
        .iter()
        .map(|i| done.remove(&(i.price.to_string(), i.n)).expect("every instance has a row"))
        .collect();
    let record = ExperimentRecord {
        fingerprint,
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if let Some(dir) = &config.out {
        report::write_json(&record, &dir.join(RECORD_FILE))?;
    }
    Ok(record)
}

/// Creates the directory or checks that it belongs to `config`, and returns
/// the rows already written. A torn final line is dropped.
fn prepare_out_dir(dir: &Path, config: &ExperimentConfig) -> Result<Vec<ExperimentRow>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg_path = dir.join(CONFIG_FILE);
    let canonical = config.canonical();
    match fs::read_to_string(&cfg_path) {
        Ok(text) => {
            let stored = ExperimentConfig::parse(&text)?;
            if stored.fingerprint() != config.fingerprint() {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{} holds a different experiment",
                    dir.display()
                )));
            }
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::write(&cfg_path, &canonical).map_err(io_err(&cfg_path))?;
        }
        Err(e) => return Err(io_err(&cfg_path)(e)),
    }
    let rows_path = dir.join(ROWS_FILE);
    let file = match File::open(&rows_path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(&rows_path)(e)),
    };
    let mut rows: Vec<ExperimentRow> = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(&rows_path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ExperimentRow>(&line) {
            Ok(row) if !rows.iter().any(|r| r.key() == row.key()) => rows.push(row),
            Ok(_) => {}
            Err(_) => break,
        }
    }
    let mut clean = String::new();
    for r in &rows {
        clean.push_str(&serde_json::to_string(r).expect("rows serialise"));
        clean.push('\n');
    }
    fs::write(&rows_path, clean).map_err(io_err(&rows_path))?;
    Ok(rows)
}

fn empty_row(config: &ExperimentConfig, inst: &Instance) -> ExperimentRow {
    ExperimentRow {
        kind: config.kind,
        price: inst.price.to_string(),
        alpha: inst.alpha,
        eps: inst.eps,
        n: inst.n,
        family: None,
        case: None,
        stable: None,
        ne_cost: f64::NAN,
        opt_cost: f64::NAN,
        ratio: f64::NAN,
        ceiling: f64::NAN,
        poa_ratio: f64::NAN,
        bounds: Vec::new(),
        worst_clique: None,
        dynamics_runs: 0,
        dynamics_converged: 0,
        dynamics_certified: 0,
        violations: 0,
        error: None,
    }
}

fn run_instance(config: &ExperimentConfig, inst: &Instance) -> ExperimentRow {
    let mut row = empty_row(config, inst);
    if let Err(e) = fill_row(config, inst, &mut row) {
        row.error = Some(e.to_string());
    }
    row
}

/// Bound checks that apply to a certified equilibrium of `kind`.
pub fn equilibrium_checks(profile: &StrategyProfile, report: &StabilityReport) -> Result<Vec<BoundCheck>, verifier::VerifierError> {
    let g = profile.realize();
    Ok(match profile.kind() {
        GameKind::Sum => {
            let mut v = vec![verifier::sum_lower_bound(&g)?, verifier::sum_cost_upper_check(&g, report)?];
            v.extend(verifier::sum_diameter_check(&g, report)?);
            v
        }
        GameKind::Max => vec![
            verifier::max_lower_check(&g)?,
            verifier::max_cost_upper_check(&g, report)?,
            verifier::max_diameter_check(&g, report, verifier::max_x_star(profile.price()))?,
        ],
    })
}

fn fill_row(config: &ExperimentConfig, inst: &Instance, row: &mut ExperimentRow) -> Result<(), Box<dyn std::error::Error>> {
    let opts = config.search_options();
    let n = inst.n;
    let price = &inst.price;
    let family = match config.family {
        DeviationFamily::ExhaustiveSubset => verifier::default_family(n, &opts),
        f => f,
    };
    row.family = Some(family);
    let cands = CandidateWeights::new(price, n, config.grid)?;

    let ne: ConstructionOutcome = match config.kind {
        GameKind::Sum => constructions::sum_ne(n, price)?,
        GameKind::Max => constructions::max_ne(n, price)?,
    };
    row.case = Some(ne.case.to_string());
    let report = verifier::certify_ne(&ne.profile, family, &cands, &opts)?;
    row.stable = Some(report.is_stable());
    let pos = verifier::pos_report(config.kind, n, price)?;
    row.ne_cost = pos.ne_cost;
    row.opt_cost = pos.opt_cost;
    row.ratio = pos.ratio;
    row.ceiling = pos.bounds["ceiling"];

    let mut equilibria: Vec<(StrategyProfile, StabilityReport)> = Vec::new();
    if report.is_stable() {
        row.bounds = equilibrium_checks(&ne.profile, &report)?;
        equilibria.push((ne.profile.clone(), report));
    }
    if config.kind == GameKind::Sum {
        if let Ok(w) = constructions::sum_worst_clique(n, price) {
            let r = verifier::certify_ne(&w.outcome.profile, family, &cands, &opts)?;
            let realized = if r.is_stable() {
                let rep = verifier::worst_clique_report(n, price, &r)?;
                row.bounds.push(BoundCheck::new("clique-ratio", verifier::Direction::AtMost, rep.ratio, w.ratio));
                row.bounds.push(BoundCheck::new(
                    "clique-ratio",
                    verifier::Direction::AtMost,
                    w.ratio,
                    2.0 * rep.ratio,
                ));
                row.bounds.extend(equilibrium_checks(&w.outcome.profile, &r)?);
                equilibria.push((w.outcome.profile.clone(), r.clone()));
                rep.ratio
            } else {
                f64::NAN
            };
            row.worst_clique = Some((r.is_stable(), realized, w.ratio));
        }
    }

    let dyn_family = match config.family {
        DeviationFamily::ExhaustiveSubset if n > opts.exhaustive_limit => None,
        f => Some(f),
    };
    if let Some(dyn_family) = dyn_family {
        for run in 0..config.dynamics_runs {
            let seed = instance_seed(config.seed.unwrap_or(0), &row.price, n, run);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = random_profile(config.kind, Arc::clone(price), n, &cands, config.density, &mut rng)?;
            let scheduler = match config.scheduler {
                Scheduler::RoundRobin => Scheduler::RoundRobin,
                Scheduler::RandomPermutation(_) => Scheduler::RandomPermutation(rng.gen()),
            };
            let trace = run_dynamics(&init, &cands, scheduler, dyn_family, config.max_rounds, &opts)?;
            row.dynamics_runs += 1;
            if !trace.converged {
                continue;
            }
            row.dynamics_converged += 1;
            let r = verifier::certify_ne(&trace.final_profile, dyn_family, &cands, &opts)?;
            if r.is_stable() {
                row.dynamics_certified += 1;
                let checks = equilibrium_checks(&trace.final_profile, &r)?;
                row.violations += checks.iter().filter(|c| !c.satisfied).count();
                equilibria.push((trace.final_profile, r));
            }
        }
    }
    row.violations += row.bounds.iter().filter(|c| !c.satisfied).count();
    if !equilibria.is_empty() {
        let refs: Vec<_> = equilibria.iter().map(|(p, r)| (p, r)).collect();
        row.poa_ratio = verifier::poa_report(config.kind, n, price, &refs)?.ratio;
    }
    Ok(())
}

/// Per-run seed derived from the config seed and the instance key.
pub fn instance_seed(seed: u64, price: &str, n: usize, run: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(price.as_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((run as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
