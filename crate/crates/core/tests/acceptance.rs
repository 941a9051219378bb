//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ncg_core::constructions::{self, Case, ConstructionError};
use ncg_core::dynamics::{self, best_response};
use ncg_core::experiment::equilibrium_checks;
use ncg_core::price::PriceError;
use ncg_core::verifier::{self, Verdict};
use ncg_core::{
    CandidateWeights, DeviationFamily, GameKind, PriceFunction, SearchOptions, StabilityReport, Strategy,
    StrategyProfile,
};

type Outcome = Result<String, String>;

const BOUND_TOL: f64 = 1e-9;
const REPLAY_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-12;

fn arc(p: PriceFunction) -> Arc<PriceFunction> {
    Arc::new(p)
}

fn opts() -> SearchOptions {
    SearchOptions::default()
}

fn certify(profile: &StrategyProfile, family: DeviationFamily, grid: usize) -> Result<StabilityReport, String> {
    let cands = CandidateWeights::new(profile.price(), profile.n(), grid).map_err(|e| e.to_string())?;
    verifier::certify_ne(profile, family, &cands, &opts()).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Certified equilibria gathered by criteria 1 to 3 for the bound suite.
#[derive(Default)]
struct Pool {
    equilibria: Vec<(StrategyProfile, StabilityReport)>,
}

fn sum_ne_prices() -> Vec<Arc<PriceFunction>> {
    let mut v: Vec<_> = [1.0, 4.0, 16.0, 64.0]
        .iter()
        .map(|&a| arc(PriceFunction::reciprocal(a, 1.0, 10.0).unwrap()))
        .collect();
    v.extend([0.5, 1.0, 2.0].iter().map(|&a| arc(PriceFunction::constant(a, 1.0, 1.0).unwrap())));
    v
}

fn criterion_1(pool: &mut Pool) -> Outcome {
    let mut count = 0;
    for p in sum_ne_prices() {
        for n in 3..=8 {
            let ne = constructions::sum_ne(n, &p).map_err(|e| format!("{p} n={n}: {e}"))?;
            let r = certify(&ne.profile, DeviationFamily::ExhaustiveSubset, 64)?;
            ensure(r.is_stable(), || format!("{p} n={n} ({}): {:?}", ne.case, r.verdict))?;
            pool.equilibria.push((ne.profile, r));
            count += 1;
        }
    }
    Ok(format!("{count} SUM equilibria certified under the exhaustive family, grid 64"))
}

fn closed_form_clique_ratio(n: usize, p: &PriceFunction) -> f64 {
    let (lo, hi) = (p.lo(), p.hi());
    let nf = n as f64;
    nf * (p.evaluate(hi).unwrap() + hi) / (p.evaluate(lo).unwrap() + 2.0 * lo * (nf - 1.0))
}

fn criterion_2(pool: &mut Pool) -> Outcome {
    // the documented triple is not a valid price: p(2.5) = -0.125
    ensure(
        matches!(
            PriceFunction::linear(3.0, 0.25, 1.0, 2.5),
            Err(PriceError::NonPositivePrice { .. })
        ),
        || "linear alpha=3 eps=0.25 on [1, 2.5] was accepted".into(),
    )?;
    let negative = arc(PriceFunction::reciprocal(4.0, 1.0, 10.0).unwrap());
    ensure(
        matches!(
            constructions::sum_worst_clique(4, &negative),
            Err(ConstructionError::PreconditionFailed { .. })
        ),
        || "reciprocal(4) on [1, 10] passed the clique preconditions".into(),
    )?;
    let prices = [
        arc(PriceFunction::linear(3.0, 0.25, 1.0, 2.2).unwrap()),
        arc(PriceFunction::constant(1.0, 1.0, 1.0).unwrap()),
    ];
    let mut worst_gap: f64 = 0.0;
    for p in &prices {
        for n in 3..=8 {
            let w = constructions::sum_worst_clique(n, p).map_err(|e| format!("{p} n={n}: {e}"))?;
            ensure(w.outcome.weight == p.hi(), || format!("{p} n={n}: clique weight {}", w.outcome.weight))?;
            let r = certify(&w.outcome.profile, DeviationFamily::ExhaustiveSubset, 64)?;
            ensure(r.is_stable(), || format!("{p} n={n}: {:?}", r.verdict))?;
            let rep = verifier::worst_clique_report(n, p, &r).map_err(|e| e.to_string())?;
            let expected = closed_form_clique_ratio(n, p);
            let reported = rep.bounds["clique-ratio"];
            let gap = (reported - expected).abs();
            worst_gap = worst_gap.max(gap);
            ensure(gap <= 1e-9, || format!("{p} n={n}: reported {reported}, closed form {expected}"))?;
            ensure(rep.ratio <= reported + 1e-9 && reported <= 2.0 * rep.ratio + 1e-9, || {
                format!("{p} n={n}: realised ratio {} vs closed form {reported}", rep.ratio)
            })?;
            pool.equilibria.push((w.outcome.profile, r));
        }
    }
    Ok(format!(
        "12 cliques certified, closed-form ratio gap {worst_gap:.1e}; linear alpha=3 eps=0.25 run on [1, 2.2] since [1, 2.5] fails positivity"
    ))
}

fn criterion_3(pool: &mut Pool) -> Outcome {
    let prices = [
        arc(PriceFunction::constant(1e-3, 1.0, 1.0).unwrap()),
        arc(PriceFunction::constant(1.0, 1.0, 1.0).unwrap()),
        arc(PriceFunction::reciprocal(0.01, 1.0, 2.0).unwrap()),
        arc(PriceFunction::reciprocal(100.0, 1.0, 10.0).unwrap()),
    ];
    let mut max_ratio: f64 = 0.0;
    let mut cases = std::collections::BTreeSet::new();
    for p in &prices {
        for n in 3..=8 {
            let ne = constructions::max_ne(n, p).map_err(|e| format!("{p} n={n}: {e}"))?;
            let r = certify(&ne.profile, DeviationFamily::ExhaustiveSubset, 64)?;
            ensure(r.is_stable(), || format!("{p} n={n} ({}): {:?}", ne.case, r.verdict))?;
            let pos = verifier::pos_report(GameKind::Max, n, p).map_err(|e| e.to_string())?;
            let cap = match ne.case {
                Case::MaxStarSatellitesOwn | Case::MaxCliqueOneOwner => 4.0,
                _ => 8.0,
            };
            ensure(pos.ratio <= cap + BOUND_TOL, || format!("{p} n={n} ({}): ratio {} > {cap}", ne.case, pos.ratio))?;
            max_ratio = max_ratio.max(pos.ratio);
            cases.insert(ne.case.to_string());
            pool.equilibria.push((ne.profile, r));
        }
    }
    Ok(format!(
        "24 MAX equilibria certified, max PoS ratio {max_ratio:.4}, cases {}",
        cases.into_iter().collect::<Vec<_>>().join(", ")
    ))
}

fn criterion_4() -> Outcome {
    for alpha in [0.5, 1.0, 2.0, 5.0] {
        let p = arc(PriceFunction::constant(alpha, 1.0, 1.0).unwrap());
        for n in [2, 3] {
            let cands = CandidateWeights::new(&p, n, 2).map_err(|e| e.to_string())?;
            let (brute, _) = verifier::brute_force_opt(GameKind::Sum, &p, n, &cands, 1 << 20).map_err(|e| e.to_string())?;
            let opt = constructions::opt_sum(n, &p).map_err(|e| e.to_string())?;
            ensure(opt.predicted_cost == brute, || {
                format!("alpha={alpha} n={n}: opt_sum {} vs enumeration {brute}", opt.predicted_cost)
            })?;
            ensure(opt.profile.realize().social_cost() == brute, || format!("alpha={alpha} n={n}: realised cost differs"))?;
            let expected = if n == 2 {
                alpha + 2.0
            } else {
                (2.0 * alpha + 8.0).min(3.0 * alpha + 6.0)
            };
            ensure(brute == expected, || format!("alpha={alpha} n={n}: {brute} != {expected}"))?;
            if n == 3 {
                let star_wins = alpha >= 2.0;
                let is_star = matches!(opt.case, Case::OptStar);
                ensure(star_wins == is_star || alpha == 2.0, || format!("alpha={alpha}: case {}", opt.case))?;
            }
        }
    }
    let p = arc(PriceFunction::constant(1.0, 1.0, 1.0).unwrap());
    let opt = constructions::opt_sum(3, &p).map_err(|e| e.to_string())?;
    ensure(opt.predicted_cost == 9.0 && opt.case == Case::OptClique, || format!("n=3 alpha=1: {:?}", opt.case))?;
    Ok("8 instances match enumeration exactly; n=3 alpha=1 gives the clique at 9".into())
}

fn random_price(rng: &mut ChaCha8Rng) -> Arc<PriceFunction> {
    match rng.gen_range(0..3) {
        0 => {
            let alpha = [0.25, 1.0, 4.0, 16.0, 64.0][rng.gen_range(0..5)];
            arc(PriceFunction::reciprocal(alpha, 1.0, [2.0, 4.0, 10.0][rng.gen_range(0..3)]).unwrap())
        }
        1 => {
            let alpha = [0.3, 0.8, 1.5, 3.0][rng.gen_range(0..4)];
            let hi = [1.0, 1.0, 2.0][rng.gen_range(0..3)];
            arc(PriceFunction::constant(alpha, 1.0, hi).unwrap())
        }
        _ => {
            let eps = [0.1, 0.25, 0.4][rng.gen_range(0..3)];
            let alpha = [2.5, 4.0, 8.0][rng.gen_range(0..3)];
            let hi = (alpha / (1.0 + eps)) * 0.9;
            arc(PriceFunction::linear(alpha, eps, 1.0, hi.max(1.0)).unwrap())
        }
    }
}

fn criterion_5(pool: &Pool) -> Outcome {
    let mut checked = 0;
    let mut checks = 0;
    let check_all = |profile: &StrategyProfile, r: &StabilityReport, checks: &mut usize| -> Result<(), String> {
        for c in equilibrium_checks(profile, r).map_err(|e| e.to_string())? {
            *checks += 1;
            ensure(c.satisfied, || format!("{}: {c:?} on\n{profile}", c.name))?;
        }
        Ok(())
    };
    for (profile, r) in &pool.equilibria {
        check_all(profile, r, &mut checks)?;
        checked += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut converged = 0;
    let mut attempts = 0;
    while converged < 100 {
        attempts += 1;
        if attempts > 400 {
            return Err(format!("only {converged} of {attempts} dynamics runs converged"));
        }
        let kind = if rng.gen_bool(0.5) { GameKind::Sum } else { GameKind::Max };
        let p = random_price(&mut rng);
        let n = rng.gen_range(3..=6);
        let cands = CandidateWeights::new(&p, n, 8).map_err(|e| e.to_string())?;
        let init = dynamics::random_profile(kind, Arc::clone(&p), n, &cands, 0.4, &mut rng).map_err(|e| e.to_string())?;
        let sched = ncg_core::Scheduler::RandomPermutation(rng.gen());
        let t = dynamics::run_dynamics(&init, &cands, sched, DeviationFamily::ExhaustiveSubset, 100, &opts())
            .map_err(|e| e.to_string())?;
        if !t.converged {
            continue;
        }
        converged += 1;
        let r = verifier::certify_ne(&t.final_profile, DeviationFamily::ExhaustiveSubset, &cands, &opts())
            .map_err(|e| e.to_string())?;
        ensure(r.is_stable(), || format!("converged run not certified: {:?}", r.verdict))?;
        check_all(&t.final_profile, &r, &mut checks)?;
        checked += 1;
    }
    Ok(format!(
        "{checks} checks on {checked} equilibria ({} constructed, 100 from {attempts} dynamics runs), zero violations",
        pool.equilibria.len()
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut from_dynamics = 0;
    for alpha in [1.0, 4.0, 16.0, 64.0, 256.0] {
        let p = arc(PriceFunction::reciprocal(alpha, 1.0, 10.0).unwrap());
        for n in 4..=10 {
            let opt = constructions::opt_sum(n, &p).map_err(|e| e.to_string())?.predicted_cost;
            let cap = 8.0 * (n as f64).min(alpha.sqrt() / p.lo());
            let family = verifier::default_family(n, &opts());
            let mut equilibria = Vec::new();
            let ne = constructions::sum_ne(n, &p).map_err(|e| e.to_string())?;
            let r = certify(&ne.profile, family, 64)?;
            ensure(r.is_stable(), || format!("alpha={alpha} n={n}: sum_ne not certified: {:?}", r.verdict))?;
            equilibria.push(ne.profile);
            if let Ok(w) = constructions::sum_worst_clique(n, &p) {
                if certify(&w.outcome.profile, family, 64)?.is_stable() {
                    equilibria.push(w.outcome.profile);
                }
            }
            if n <= 8 {
                let cands = CandidateWeights::new(&p, n, 16).map_err(|e| e.to_string())?;
                for _ in 0..2 {
                    let init = dynamics::random_profile(GameKind::Sum, Arc::clone(&p), n, &cands, 0.3, &mut rng)
                        .map_err(|e| e.to_string())?;
                    let sched = ncg_core::Scheduler::RandomPermutation(rng.gen());
                    let t = dynamics::run_dynamics(&init, &cands, sched, DeviationFamily::ExhaustiveSubset, 50, &opts())
                        .map_err(|e| e.to_string())?;
                    if t.converged {
                        let r = verifier::certify_ne(&t.final_profile, DeviationFamily::ExhaustiveSubset, &cands, &opts())
                            .map_err(|e| e.to_string())?;
                        if r.is_stable() {
                            equilibria.push(t.final_profile);
                            from_dynamics += 1;
                        }
                    }
                }
            }
            for g in &equilibria {
                let ratio = g.realize().social_cost() / opt;
                worst = worst.max(ratio / cap);
                ensure(ratio <= cap + BOUND_TOL, || format!("alpha={alpha} n={n}: ratio {ratio} > {cap}\n{g}"))?;
                count += 1;
            }
        }
    }
    Ok(format!(
        "{count} certified equilibria ({from_dynamics} from dynamics), largest ratio/cap {worst:.4}"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut converged = 0;
    let mut replays = 0;
    let mut worst_replay: f64 = 0.0;
    for i in 0..200 {
        let kind = if rng.gen_bool(0.5) { GameKind::Sum } else { GameKind::Max };
        let p = random_price(&mut rng);
        let n = rng.gen_range(2..=6);
        let family = *DeviationFamily::ALL.choose(&mut rng).unwrap();
        let cands = CandidateWeights::new(&p, n, rng.gen_range(2..=8)).map_err(|e| e.to_string())?;
        let init = dynamics::random_profile(kind, Arc::clone(&p), n, &cands, rng.gen_range(0.1..0.7), &mut rng)
            .map_err(|e| e.to_string())?;
        let sched = if rng.gen_bool(0.5) {
            ncg_core::Scheduler::RoundRobin
        } else {
            ncg_core::Scheduler::RandomPermutation(rng.gen())
        };
        let r0 = verifier::certify_ne(&init, family, &cands, &opts()).map_err(|e| e.to_string())?;
        let mut check_replay = |profile: &StrategyProfile, r: &StabilityReport| -> Result<(), String> {
            if let Verdict::Unstable { gain, old_cost, new_cost, .. } = &r.verdict {
                let (old, new, g) = verifier::replay(profile, &r.verdict).map_err(|e| e.to_string())?.unwrap();
                let diff = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() };
                let d = diff(old, *old_cost).max(diff(new, *new_cost)).max(diff(g, *gain));
                worst_replay = worst_replay.max(d);
                replays += 1;
                ensure(d <= REPLAY_TOL, || format!("instance {i}: replay differs by {d}"))?;
            }
            Ok(())
        };
        check_replay(&init, &r0)?;
        let t = dynamics::run_dynamics(&init, &cands, sched, family, 60, &opts()).map_err(|e| e.to_string())?;
        if t.converged {
            converged += 1;
            let r = verifier::certify_ne(&t.final_profile, family, &cands, &opts()).map_err(|e| e.to_string())?;
            ensure(r.is_stable(), || format!("instance {i} ({family}): converged but {:?}", r.verdict))?;
        } else {
            let r = verifier::certify_ne(&t.final_profile, family, &cands, &opts()).map_err(|e| e.to_string())?;
            check_replay(&t.final_profile, &r)?;
        }
    }
    Ok(format!(
        "200 instances, {converged} converged and certified, {replays} unstable verdicts replayed (max diff {worst_replay:.1e})"
    ))
}

/// Cheapest realised cost for `v` over every target subset and every joint
/// weight assignment.
fn joint_oracle(profile: &StrategyProfile, v: usize, weights: &[f64]) -> f64 {
    let n = profile.n();
    let others: Vec<usize> = (0..n).filter(|&w| w != v).collect();
    let mut best = f64::INFINITY;
    for mask in 0..1u32 << others.len() {
        let targets: Vec<usize> = others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &w)| w).collect();
        let k = targets.len();
        let combos = weights.len().pow(k as u32);
        for mut code in 0..combos {
            let mut edges = Vec::with_capacity(k);
            for &t in &targets {
                edges.push((t, weights[code % weights.len()]));
                code /= weights.len();
            }
            let s = Strategy::new(v, edges).unwrap();
            let c = profile.apply_deviation(v, s).unwrap().realize().private_cost(v).total;
            best = best.min(c);
        }
    }
    best
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut compared = 0;
    for kind in [GameKind::Sum, GameKind::Max] {
        for i in 0..50 {
            let p = random_price(&mut rng);
            let n = rng.gen_range(2..=4);
            let full = CandidateWeights::new(&p, n, 8).map_err(|e| e.to_string())?;
            let mut pick: Vec<f64> = full.weights().to_vec();
            pick.shuffle(&mut rng);
            pick.truncate(rng.gen_range(1..=6));
            let cands = CandidateWeights::from_weights(&p, pick).map_err(|e| e.to_string())?;
            ensure(cands.len() <= 6, || "candidate set too large".into())?;
            let profile = dynamics::random_profile(kind, Arc::clone(&p), n, &cands, rng.gen_range(0.0..0.8), &mut rng)
                .map_err(|e| e.to_string())?;
            for v in 0..n {
                let (r, _) = best_response(&profile, v, &cands, &opts()).map_err(|e| e.to_string())?;
                let oracle = joint_oracle(&profile, v, cands.weights());
                let same = r.new_cost == oracle || (r.new_cost - oracle).abs() <= ORACLE_TOL;
                ensure(same, || {
                    format!(
                        "{kind} instance {i} node {v}: best response {} vs joint optimum {oracle}\n{profile}candidates {:?}",
                        r.new_cost,
                        cands.weights()
                    )
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} best responses equal the joint optimum"))
}

fn main() -> ExitCode {
    let mut pool = Pool::default();
    let mut failed = 0;
    let mut report = |id: u8, title: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("[PASS] {id} {title}: {detail} ({secs:.1}s)"),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {id} {title}: {reason} ({secs:.1}s)");
            }
        }
    };
    report(1, "SUM equilibria are stable", &mut || criterion_1(&mut pool));
    report(2, "worst-case clique", &mut || criterion_2(&mut pool));
    report(3, "MAX equilibria and PoS ceilings", &mut || criterion_3(&mut pool));
    report(4, "optimum matches enumeration", &mut criterion_4);
    report(5, "bound suite", &mut || criterion_5(&pool));
    report(6, "reciprocal anarchy ratio", &mut criterion_6);
    report(7, "dynamics and verifier agree", &mut criterion_7);
    report(8, "best response matches joint enumeration", &mut criterion_8);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
