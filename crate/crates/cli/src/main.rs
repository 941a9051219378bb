use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use ncg_core::constructions::{self, ConstructionError, ConstructionOutcome};
use ncg_core::dynamics::{self, DynamicsError};
use ncg_core::experiment::{self, report, ExperimentConfig, ExperimentError, PriceTemplate};
use ncg_core::game::GameError;
use ncg_core::price::PriceError;
use ncg_core::verifier::{self, BoundCheck, VerifierError};
use ncg_core::{CandidateWeights, DeviationFamily, GameKind, PriceFunction, Scheduler, SearchOptions, StrategyProfile};

const EXIT_UNSTABLE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_IO: u8 = 4;

/// Quality-of-service network creation games: constructions, Nash
/// certification, best-response dynamics and bound sweeps.
#[derive(Parser)]
#[command(name = "ncg", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Improvement threshold for deviations, overriding 1e-9.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an optimum, equilibrium or worst-case clique.
    Construct(ConstructArgs),
    /// Certify a profile and check the bounds that apply to it.
    Verify(VerifyArgs),
    /// Run best-response dynamics.
    BrDynamics(DynamicsArgs),
    /// Sweep a price template over alpha and n.
    Sweep(SweepArgs),
    /// Social optimum, optionally cross-checked by enumeration.
    Opt(OptArgs),
    /// Render a stored sweep record.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Opt,
    Ne,
    Worst,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    game: String,
    #[arg(long)]
    n: usize,
    /// e.g. `reciprocal:alpha=4,lo=1,hi=10`
    #[arg(long)]
    price: String,
    #[arg(long, value_enum)]
    which: Which,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    profile: PathBuf,
    /// Deviation family (default: exhaustive up to 8 nodes, restricted above).
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Also run every bound check for the game.
    #[arg(long)]
    all_bounds: bool,
    /// Weight at which the MAX diameter check is evaluated (default: argmin p(x) + 2x).
    #[arg(long)]
    x: Option<f64>,
}

#[derive(Args)]
struct DynamicsArgs {
    /// Profile file, `empty` or `random:SEED`.
    #[arg(long)]
    init: String,
    /// Needed unless `--init` is a file.
    #[arg(long)]
    game: Option<String>,
    #[arg(long)]
    price: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "exhaustive")]
    family: String,
    /// `round-robin` or `random:SEED`.
    #[arg(long, default_value = "round-robin")]
    scheduler: String,
    #[arg(long, default_value_t = 100)]
    max_rounds: usize,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Edge probability for `random:SEED` initial profiles.
    #[arg(long, default_value_t = 0.3)]
    density: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Config file; the other sweep flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<String>,
    /// Template without alpha, e.g. `reciprocal:lo=1,hi=10`.
    #[arg(long)]
    price: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    alpha: Option<String>,
    /// Linear prices only; comma-separated list.
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated counts and `a..b` ranges.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dynamics runs per instance (needs `--seed`).
    #[arg(long)]
    dynamics_runs: Option<usize>,
    /// Write a ratio-vs-alpha chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long)]
    game: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    price: String,
    /// Compare against every profile over the candidate weights (n <= 4).
    #[arg(long)]
    brute_force: bool,
    #[arg(long, default_value_t = 4)]
    grid: usize,
    /// Largest number of profiles to enumerate.
    #[arg(long, default_value_t = 50_000_000)]
    cap: u128,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args)]
struct ReportArgs {
    /// `record.json` written by `sweep`.
    #[arg(long)]
    record: PathBuf,
    #[arg(long, value_enum)]
    format: Format,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if let Some(ExperimentError::Io { .. }) = cause.downcast_ref::<ExperimentError>() {
            return EXIT_IO;
        }
    }
    EXIT_INVALID
}

fn run(cli: Cli) -> Result<u8> {
    let mut opts = SearchOptions::default();
    if let Some(t) = cli.tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            bail!("--tolerance must be finite and non-negative");
        }
        opts.epsilon = t;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        if !matches!(cli.command, Command::Sweep(_)) {
            rayon_pool(w)?;
        }
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Construct(a) => construct(a, &out),
        Command::Verify(a) => verify(a, &opts),
        Command::BrDynamics(a) => br_dynamics(a, &opts, &out),
        Command::Sweep(a) => sweep(a, cli.tolerance, cli.out, cli.workers),
        Command::Opt(a) => opt(a, &out),
        Command::Report(a) => render(a),
    }
}

fn rayon_pool(workers: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| anyhow!("worker pool: {e}"))
}

fn parse_kind(s: &str) -> Result<GameKind> {
    s.parse().map_err(|e: String| anyhow!(e))
}

fn parse_price(s: &str) -> Result<Arc<PriceFunction>> {
    let p: PriceFunction = s.parse().map_err(|e: PriceError| anyhow!("price `{s}`: {e}"))?;
    Ok(Arc::new(p))
}

fn parse_family(s: &str) -> Result<DeviationFamily> {
    s.parse().map_err(|e: DynamicsError| anyhow!(e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_profile(path: &Path) -> Result<StrategyProfile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse()
        .map_err(|e: GameError| anyhow!("{}: {e}", path.display()))
}

fn construct(a: ConstructArgs, out: &Path) -> Result<u8> {
    let kind = parse_kind(&a.game)?;
    let price = parse_price(&a.price)?;
    let n = a.n;
    let (outcome, ratio): (ConstructionOutcome, Option<f64>) = match (a.which, kind) {
        (Which::Opt, GameKind::Sum) => (constructions::opt_sum(n, &price)?, None),
        (Which::Opt, GameKind::Max) => (constructions::max_opt_star(n, &price)?, None),
        (Which::Ne, GameKind::Sum) => (constructions::sum_ne(n, &price)?, None),
        (Which::Ne, GameKind::Max) => (constructions::max_ne(n, &price)?, None),
        (Which::Worst, GameKind::Sum) => {
            let w = constructions::sum_worst_clique(n, &price).map_err(|e| match e {
                ConstructionError::PreconditionFailed { .. } => anyhow!("worst clique: {e}"),
                e => e.into(),
            })?;
            (w.outcome, Some(w.ratio))
        }
        (Which::Worst, GameKind::Max) => bail!("the worst-case clique is a SUM construction"),
    };
    let stem = format!(
        "{}-{}-n{n}",
        match a.which {
            Which::Opt => "opt",
            Which::Ne => "ne",
            Which::Worst => "worst",
        },
        kind
    );
    create_dir(out)?;
    let profile_path = out.join(format!("{stem}.ncg"));
    write_file(&profile_path, &outcome.profile.to_string())?;
    let sidecar = json!({
        "game": kind,
        "n": n,
        "price": price.to_string(),
        "case": outcome.case,
        "family": outcome.family,
        "weight": outcome.weight,
        "predicted_cost": outcome.predicted_cost,
        "realized_cost": outcome.profile.realize().social_cost(),
        "closed_form_ratio": ratio,
    });
    let sidecar_path = out.join(format!("{stem}.json"));
    write_file(&sidecar_path, &serde_json::to_string_pretty(&sidecar)?)?;
    println!("{}", serde_json::to_string(&json!({"profile": profile_path, "sidecar": sidecar_path, "case": outcome.case}))?);
    Ok(0)
}

fn verify(a: VerifyArgs, opts: &SearchOptions) -> Result<u8> {
    let profile = read_profile(&a.profile)?;
    let n = profile.n();
    let family = match &a.family {
        Some(f) => parse_family(f)?,
        None => verifier::default_family(n, opts),
    };
    let cands = CandidateWeights::new(profile.price(), n, a.grid)?;
    let report = verifier::certify_ne(&profile, family, &cands, opts)?;
    if !report.is_stable() {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(EXIT_UNSTABLE);
    }
    if !a.all_bounds {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(0);
    }
    let checks = bound_checks(&profile, &report, a.x)?;
    let violated = checks.iter().any(|c| !c.satisfied);
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({"stability": report, "bounds": checks}))?
    );
    Ok(if violated { EXIT_VIOLATION } else { 0 })
}

fn bound_checks(
    profile: &StrategyProfile,
    report: &ncg_core::StabilityReport,
    x: Option<f64>,
) -> Result<Vec<BoundCheck>, VerifierError> {
    let x = match (profile.kind(), x) {
        (GameKind::Max, Some(x)) => x,
        _ => return experiment::equilibrium_checks(profile, report),
    };
    let g = profile.realize();
    Ok(vec![
        verifier::max_lower_check(&g)?,
        verifier::max_cost_upper_check(&g, report)?,
        verifier::max_diameter_check(&g, report, x)?,
    ])
}

fn br_dynamics(a: DynamicsArgs, opts: &SearchOptions, out: &Path) -> Result<u8> {
    let family = parse_family(&a.family)?;
    let scheduler: Scheduler = a.scheduler.parse().map_err(|e: DynamicsError| anyhow!(e))?;
    let spec = || -> Result<(GameKind, Arc<PriceFunction>, usize)> {
        let kind = parse_kind(a.game.as_deref().ok_or_else(|| anyhow!("--game is required"))?)?;
        let price = parse_price(a.price.as_deref().ok_or_else(|| anyhow!("--price is required"))?)?;
        let n = a.n.ok_or_else(|| anyhow!("--n is required"))?;
        Ok((kind, price, n))
    };
    let initial = if a.init == "empty" {
        let (kind, price, n) = spec()?;
        StrategyProfile::empty(kind, price, n)?
    } else if let Some(seed) = a.init.strip_prefix("random:") {
        let seed: u64 = seed.parse().map_err(|_| anyhow!("bad seed in `{}`", a.init))?;
        let (kind, price, n) = spec()?;
        let cands = CandidateWeights::new(&price, n, a.grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        dynamics::random_profile(kind, price, n, &cands, a.density, &mut rng)?
    } else {
        read_profile(Path::new(&a.init))?
    };
    let cands = CandidateWeights::new(initial.price(), initial.n(), a.grid)?;
    let trace = dynamics::run_dynamics(&initial, &cands, scheduler, family, a.max_rounds, opts)?;

    create_dir(out)?;
    let trace_path = out.join("trace.jsonl");
    let mut file = fs::File::create(&trace_path).with_context(|| format!("writing {}", trace_path.display()))?;
    for step in &trace.steps {
        writeln!(file, "{}", serde_json::to_string(step)?).with_context(|| format!("writing {}", trace_path.display()))?;
    }
    let final_path = out.join("final.ncg");
    write_file(&final_path, &trace.final_profile.to_string())?;
    println!(
        "{}",
        serde_json::to_string(&json!({
            "converged": trace.converged,
            "rounds": trace.rounds,
            "moves": trace.steps.len(),
            "scheduler": trace.scheduler,
            "family": trace.family,
            "social_cost": trace.final_profile.realize().social_cost(),
            "trace": trace_path,
            "final_profile": final_path,
        }))?
    );
    Ok(0)
}

fn sweep(a: SweepArgs, tolerance: Option<f64>, out: Option<PathBuf>, workers: Option<usize>) -> Result<u8> {
    let mut config = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let need = |v: &Option<String>, flag: &str| v.clone().ok_or_else(|| anyhow!("{flag} is required without --config"));
            let kind = parse_kind(&need(&a.game, "--game")?)?;
            let template = PriceTemplate::parse(&need(&a.price, "--price")?)?;
            let alpha = experiment::parse_floats(&need(&a.alpha, "--alpha")?).map_err(|e| anyhow!("--alpha: {e}"))?;
            let n = experiment::parse_counts(&need(&a.n, "--n")?).map_err(|e| anyhow!("--n: {e}"))?;
            let mut c = ExperimentConfig::new(kind, template, alpha, n);
            if let Some(eps) = &a.eps {
                c.eps = experiment::parse_floats(eps).map_err(|e| anyhow!("--eps: {e}"))?;
            }
            if let Some(g) = a.grid {
                c.grid = g;
            }
            if let Some(f) = &a.family {
                c.family = parse_family(f)?;
            }
            c.seed = a.seed;
            if let Some(r) = a.dynamics_runs {
                c.dynamics_runs = r;
            }
            if let Some(seed) = a.seed {
                c.scheduler = Scheduler::RandomPermutation(seed);
            }
            c
        }
    };
    if out.is_some() {
        config.out = out;
    }
    if let Some(t) = tolerance {
        config.epsilon = t;
    }
    config.validate()?;
    let record = experiment::run_experiment(&config, workers)?;
    let csv = report::to_csv(&record);
    match &config.out {
        Some(dir) => {
            let path = dir.join("sweep.csv");
            write_file(&path, &csv)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    if let Some(svg) = &a.svg {
        report::write_svg(&record, svg)?;
    }
    for row in &record.rows {
        if let Some(e) = &row.error {
            eprintln!("warning: {} n={}: {e}", row.price, row.n);
        }
    }
    if record.rows.iter().any(|r| r.stable == Some(false)) {
        return Ok(EXIT_UNSTABLE);
    }
    if record.rows.iter().any(|r| r.violations > 0) {
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn opt(a: OptArgs, out: &Path) -> Result<u8> {
    let kind = parse_kind(&a.game)?;
    let price = parse_price(&a.price)?;
    let n = a.n;
    let outcome = match kind {
        GameKind::Sum => constructions::opt_sum(n, &price)?,
        GameKind::Max => constructions::max_opt_star(n, &price)?,
    };
    let lower = match kind {
        GameKind::Sum => None,
        GameKind::Max => Some(verifier::max_lower_bound(n, &price)),
    };
    let brute = if a.brute_force {
        let cands = CandidateWeights::new(&price, n.max(2), a.grid)?;
        let (cost, best) = verifier::brute_force_opt(kind, &price, n, &cands, a.cap)?;
        Some(json!({"cost": cost, "profile": best.to_string(), "candidates": cands.weights()}))
    } else {
        None
    };
    create_dir(out)?;
    let path = out.join(format!("opt-{kind}-n{n}.ncg"));
    write_file(&path, &outcome.profile.to_string())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "game": kind,
            "n": n,
            "price": price.to_string(),
            "case": outcome.case,
            "weight": outcome.weight,
            "cost": outcome.profile.realize().social_cost(),
            "predicted_cost": outcome.predicted_cost,
            "lower_bound": lower,
            "brute_force": brute,
            "profile": path,
        }))?
    );
    Ok(0)
}

fn render(a: ReportArgs) -> Result<u8> {
    let record = report::read_json(&a.record)?;
    let text = match a.format {
        Format::Csv => report::to_csv(&record),
        Format::Json => serde_json::to_string_pretty(&record)?,
        Format::Svg => report::to_svg(&record),
    };
    match &a.output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
