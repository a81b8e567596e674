//! Randomized property suites behind `rank-recur verify`.
//!
//! Every suite draws from its own ChaCha8 stream derived from the run seed and
//! the suite name, so running a subset reproduces the same numbers as the full
//! battery.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::block_map::{
    extract_periodic_orbit, shift_commutation_check, solve_fixed_point, BlockMap, SolveOptions,
};
use crate::closed_form::{
    autonomous_rank_limit, fixed_point_of, p2m2_from_family, power_max_p2m2_limit,
    FixedPointOptions, P2M2Case,
};
use crate::definition::BuiltSystem;
use crate::error::{Error, Result};
use crate::expr::{
    estimate_block_lipschitz, estimate_scalar_lipschitz, BlockExpr, DomainInterval,
    LipschitzEstimate, ScalarExpr, DEFAULT_GRID_POINTS, DEFAULT_SAFETY_FACTOR,
};
use crate::rank::{k_rank, sup_distance, RankIndex};
use crate::simulate::{
    convergence_report, detect_period, iterate, orbit_distance, DetectOptions, PeriodicOrbit,
};
use crate::system::{
    affine_matrix_system, max_minus_rank_system, power_max_system, BlockSystem, InitialCondition,
    PowerTransform, RankSchedule, RankSystem, Recurrence, ScalarFamily,
};

pub const REPORT_SCHEMA: &str = "rank-recur/verify/v1";

/// Suite names and one-line descriptions, in run order.
pub const SUITES: &[(&str, &str)] = &[
    ("rank-nonexpansive", "k-rank is sup-non-expansive, ordered, permutation invariant, translation equivariant"),
    ("parse-roundtrip", "printing then parsing returns the same tree"),
    ("lipschitz", "estimator exactness, flags and sampling consistency"),
    ("block-direct", "block map iterates equal direct simulation"),
    ("block-contraction", "sampled block-map ratios stay below the certified bound"),
    ("period-divides", "random affine rank systems settle on one orbit whose period divides P"),
    ("autonomous", "autonomous limit equals the k-rank of the fixed points"),
    ("p2m2", "period-two closed form matches solver and simulation"),
    ("power-law", "explicit power-law limit matches the log-system solver"),
    ("counterexamples", "period-3 and tent-map systems are flagged and misbehave"),
    ("max-minus-rank", "max minus phase-rank systems settle on a P-periodic orbit"),
    ("duality", "raw and log power systems agree after exponentiation"),
    ("toward-fixed-point", "contractions move points toward their fixed point"),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub rng_seed: u64,
    /// Multiplier on sample counts; 1 is the full battery.
    pub scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            rng_seed: 0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema: &'static str,
    pub rng_seed: u64,
    pub scale: f64,
    pub system: Option<String>,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail: detail.into(),
    }
}

fn count(base: usize, scale: f64) -> usize {
    ((base as f64 * scale).round() as usize).max(1)
}

fn suite_rng(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a of the name keeps suite streams independent of selection order
    let h = name
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Runs the named suites, or all of them when `names` is empty.
pub fn run_suites(names: &[String], opts: &VerifyOptions) -> Result<VerifyReport> {
    for n in names {
        if !SUITES.iter().any(|(s, _)| s == n) {
            return Err(Error::arg(format!("unknown suite `{n}`")));
        }
    }
    let mut suites = Vec::new();
    for (name, _) in SUITES {
        if !names.is_empty() && !names.iter().any(|n| n == name) {
            continue;
        }
        let mut rng = suite_rng(opts.rng_seed, name);
        let s = opts.scale;
        let checks = match *name {
            "rank-nonexpansive" => rank_nonexpansive(&mut rng, s),
            "parse-roundtrip" => parse_roundtrip(&mut rng, s),
            "lipschitz" => lipschitz(&mut rng, s),
            "block-direct" => block_direct(&mut rng, s),
            "block-contraction" => block_contraction(&mut rng, s),
            "period-divides" => period_divides(&mut rng, s),
            "autonomous" => autonomous(&mut rng, s),
            "p2m2" => p2m2(&mut rng, s),
            "power-law" => power_law(&mut rng, s),
            "counterexamples" => counterexamples(&mut rng, s),
            "max-minus-rank" => max_minus_rank(&mut rng, s),
            "duality" => duality(&mut rng, s),
            "toward-fixed-point" => toward_fixed_point(&mut rng, s),
            _ => unreachable!(),
        }?;
        suites.push(SuiteReport {
            name: name.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        });
    }
    Ok(VerifyReport {
        schema: REPORT_SCHEMA,
        rng_seed: opts.rng_seed,
        scale: opts.scale,
        system: None,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

// ---------------------------------------------------------------------------
// random instances

/// A contraction template with its exact Lipschitz constant.
pub(crate) fn random_contraction(rng: &mut ChaCha8Rng, a_max: f64) -> (String, f64) {
    let a: f64 = rng.gen_range(-a_max..a_max);
    let b: f64 = rng.gen_range(-5.0..5.0);
    let c: f64 = rng.gen_range(-3.0..3.0);
    match rng.gen_range(0..5) {
        0 => (format!("{a}*x + {b}"), a.abs()),
        1 => (format!("{a}*sin(x) + {b}"), a.abs()),
        2 => (format!("{a}*cos(x + {c}) + {b}"), a.abs()),
        3 => (format!("{a}*abs(x - {c}) + {b}"), a.abs()),
        _ => {
            let a2: f64 = rng.gen_range(-a_max..a_max);
            (format!("max({a}*x + {b}, {a2}*x + {c})"), a.abs().max(a2.abs()))
        }
    }
}

/// An `M x P` grid of random contractions with its exact bound.
fn random_family(rng: &mut ChaCha8Rng, m: usize, p: usize, a_max: f64) -> ScalarFamily {
    let mut alpha = 0.0f64;
    let grid = (0..m)
        .map(|_| {
            (0..p)
                .map(|_| {
                    let (src, l) = random_contraction(rng, a_max);
                    alpha = alpha.max(l);
                    ScalarExpr::parse(&src).expect("template parses")
                })
                .collect()
        })
        .collect();
    ScalarFamily::new(grid)
        .expect("non-empty grid")
        .with_alpha_bound(LipschitzEstimate::exact(alpha))
}

fn random_schedule(rng: &mut ChaCha8Rng, m: usize, p: usize) -> RankSchedule {
    RankSchedule::new((0..p).map(|_| RankIndex::new(rng.gen_range(1..=m)).unwrap()).collect()).unwrap()
}

fn random_affine(rng: &mut ChaCha8Rng, m: usize, p: usize, a_max: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a = (0..p).map(|_| (0..m).map(|_| rng.gen_range(-a_max..a_max)).collect()).collect();
    let b = (0..p).map(|_| (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
    (a, b)
}

fn random_seed(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> InitialCondition {
    InitialCondition::new((0..m).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Seeds `M` values, runs the direct recurrence to `s` and returns the block.
fn first_block<R: Recurrence + ?Sized>(rec: &R, init: &InitialCondition) -> Result<Vec<f64>> {
    Ok(iterate(rec, init, rec.block_dim().max(rec.memory()))?.values[..rec.block_dim()].to_vec())
}

/// Block-map fixed point collapsed to its prime period.
fn block_orbit<R: Recurrence + ?Sized>(rec: &R, tol: f64) -> Result<(PeriodicOrbit, f64)> {
    let map = BlockMap::new(rec);
    let opts = SolveOptions {
        tol,
        ..SolveOptions::default()
    };
    let fp = solve_fixed_point(&map, &vec![0.0; map.dim()], &opts)?;
    Ok((extract_periodic_orbit(&fp.x_star, rec.period(), tol)?, fp.residual))
}

// ---------------------------------------------------------------------------
// suites

fn rank_nonexpansive(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let pairs = count(100_000, s);
    let (mut violations, mut order, mut perm, mut trans) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..pairs {
        let d = rng.gen_range(1..=10);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let y: Vec<f64> = match rng.gen_range(0..3) {
            0 => (0..d).map(|_| rng.gen_range(-100.0..100.0)).collect(),
            1 => x.iter().map(|v| v + rng.gen_range(-1e-6..1e-6)).collect(),
            // shared entries create ties on both sides
            _ => x.iter().map(|v| if rng.gen() { *v } else { v + rng.gen_range(-1.0..1.0) }).collect(),
        };
        let dist = sup_distance(&x, &y)?;
        let mut shuffled = x.clone();
        shuffled.shuffle(rng);
        let c: f64 = rng.gen_range(-50.0..50.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let mut prev = f64::INFINITY;
        for k in 1..=d {
            let k = RankIndex::new(k)?;
            let rx = k_rank(&x, k)?;
            if (rx - k_rank(&y, k)?).abs() > dist {
                violations += 1;
            }
            if rx > prev {
                order += 1;
            }
            prev = rx;
            if k_rank(&shuffled, k)? != rx {
                perm += 1;
            }
            if k_rank(&shifted, k)? != rx + c {
                trans += 1;
            }
        }
    }
    Ok(vec![
        check("non-expansive", violations == 0, format!("{violations} violations in {pairs} pairs")),
        check("order", order == 0, format!("{order} order inversions")),
        check("permutation", perm == 0, format!("{perm} mismatches")),
        check("translation", trans == 0, format!("{trans} mismatches")),
    ])
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => "x".into(),
            1 => "n".into(),
            2 => "pi".into(),
            _ => format!("{}", (rng.gen_range(0.0..100.0f64) * 8.0).round() / 8.0),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_tree(rng, depth - 1);
    match rng.gen_range(0..9) {
        0 => format!("({}) + ({})", sub(rng), sub(rng)),
        1 => format!("({}) - ({})", sub(rng), sub(rng)),
        2 => format!("({}) * ({})", sub(rng), sub(rng)),
        3 => format!("({}) / ({})", sub(rng), sub(rng)),
        4 => format!("-({})", sub(rng)),
        5 => format!("({})^{}", sub(rng), ["2", "-1", "0.5", "(1/3)", "-(2)"][rng.gen_range(0..5)]),
        6 => {
            let f = ["exp", "ln", "sin", "cos", "abs"][rng.gen_range(0..5)];
            format!("{f}({})", sub(rng))
        }
        7 => {
            let f = ["max", "min"][rng.gen_range(0..2)];
            let k = rng.gen_range(1..4);
            let args: Vec<String> = (0..k).map(|_| sub(rng)).collect();
            format!("{f}({})", args.join(", "))
        }
        _ => {
            let m = rng.gen_range(1..4);
            let k = rng.gen_range(1..=m);
            let args: Vec<String> = (0..m).map(|_| sub(rng)).collect();
            format!("rank({k}; {})", args.join(", "))
        }
    }
}

fn parse_roundtrip(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let n = count(2_000, s);
    let mut failures = Vec::new();
    for _ in 0..n {
        let src = random_tree(rng, 4);
        let a = ScalarExpr::parse(&src)?;
        let printed = a.to_string();
        match ScalarExpr::parse(&printed) {
            Ok(b) if b == a => {}
            _ => failures.push(printed),
        }
    }
    Ok(vec![check(
        "round-trip",
        failures.is_empty(),
        match failures.first() {
            None => format!("{n} random trees"),
            Some(f) => format!("{} failures, first `{f}`", failures.len()),
        },
    )])
}

fn lipschitz(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let dom = DomainInterval::default();
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..count(50, s) {
        let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-5.0..5.0));
        let f = ScalarExpr::parse(&format!("{a}*x + {b}"))?;
        for (d, g, sf) in [(dom, 2, 1.0), (DomainInterval::new(0.0, 0.1)?, 101, 2.0)] {
            let e = estimate_scalar_lipschitz(&f, 0, d, g, sf)?;
            worst = worst.max((e.bound - a.abs()).abs());
        }
    }
    checks.push(check("affine-exact", worst == 0.0, format!("max deviation {worst:e}")));

    let tent = ScalarExpr::parse("max(1-2*x, 2*x-1)")?;
    let e = estimate_scalar_lipschitz(&tent, 0, DomainInterval::new(-2.0, 2.0)?, DEFAULT_GRID_POINTS, DEFAULT_SAFETY_FACTOR)?;
    checks.push(check("tent-flagged", !e.is_contractive() && e.bound >= 2.0, format!("bound {}", e.bound)));

    let med = ScalarExpr::parse("exp(0.15*1 - x^2)")?;
    let e = estimate_scalar_lipschitz(&med, 0, DomainInterval::new(-5.0, 5.0)?, DEFAULT_GRID_POINTS, 1.0)?;
    checks.push(check("median-contractive", e.is_contractive(), format!("bound {}", e.bound)));

    let mut bad = 0;
    for (scalar, block) in [
        ("0.5*sin(x)", "0.5*sin(y1)"),
        ("exp(0.1 - x^2)", "exp(0.1 - y1^2)"),
        ("0.3*cos(2*x) + 0.1*x", "0.3*cos(2*y1) + 0.1*y1"),
        ("max(0.2*x, 0.7*x - 1)", "max(0.2*y1, 0.7*y1 - 1)"),
    ] {
        let up = estimate_scalar_lipschitz(&ScalarExpr::parse(scalar)?, 0, dom, DEFAULT_GRID_POINTS, DEFAULT_SAFETY_FACTOR)?;
        let low = estimate_block_lipschitz(&BlockExpr::parse(block, 1)?, dom, count(20_000, s), rng.gen())?;
        if low.bound > up.bound {
            bad += 1;
        }
    }
    checks.push(check("pair-below-derivative", bad == 0, format!("{bad} inconsistent")));

    let lin = estimate_block_lipschitz(&BlockExpr::parse("0.3*y1 + 0.3*y2", 2)?, dom, count(20_000, s), rng.gen())?;
    checks.push(check(
        "l1-norm",
        lin.bound <= 0.6 * (1.0 + 1e-12) && lin.bound > 0.59,
        format!("estimate {}", lin.bound),
    ));
    Ok(checks)
}

fn block_direct(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let systems = count(50, s);
    let mut worst = 0.0f64;
    for _ in 0..systems {
        let (m, p) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let fam = random_family(rng, m, p, 0.9);
        let sys = RankSystem::new(fam, random_schedule(rng, m, p))?;
        let blk = sys.to_block();
        let sdim = blk.block_dim();
        let init = random_seed(rng, m, -10.0, 10.0);
        let steps = 50;
        let traj = iterate(&blk, &init, sdim * (steps + 1))?;
        let map = BlockMap::new(&blk);
        let mut y = traj.values[..sdim].to_vec();
        for step in 1..=steps {
            y = map.apply(&y)?;
            worst = worst.max(max_abs_diff(&y, &traj.values[step * sdim..(step + 1) * sdim]));
        }
    }
    Ok(vec![check(
        "block-equals-direct",
        worst <= 1e-13,
        format!("{systems} systems, max deviation {worst:e}"),
    )])
}

fn block_contraction(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let systems = count(10, s);
    let pairs = count(10_000, s);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..systems {
        let (m, p) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let fam = random_family(rng, m, p, 0.9);
        let alpha = fam.alpha_bound().unwrap().bound;
        let sys = RankSystem::new(fam, random_schedule(rng, m, p))?;
        let map = BlockMap::new(&sys);
        let n = map.dim();
        for _ in 0..pairs {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let y: Vec<f64> = if rng.gen() {
                (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect()
            } else {
                x.iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect()
            };
            let d = sup_distance(&x, &y)?;
            if d == 0.0 {
                continue;
            }
            let r = sup_distance(&map.apply(&x)?, &map.apply(&y)?)? / d;
            worst_excess = worst_excess.max(r - alpha);
        }
    }
    Ok(vec![check(
        "ratio-below-alpha",
        worst_excess <= 1e-9,
        format!("max ratio - alpha = {worst_excess:e}"),
    )])
}

fn period_divides(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let systems = count(200, s);
    let (mut not_dividing, mut undetected) = (0, 0);
    let mut worst = 0.0f64;
    for _ in 0..systems {
        let (m, p) = (rng.gen_range(1..=5), rng.gen_range(1..=6));
        let (a, b) = random_affine(rng, m, p, 0.9);
        let k = RankIndex::new(rng.gen_range(1..=m))?;
        let (fam, sched) = affine_matrix_system(&a, &b, k)?;
        let sys = RankSystem::new(fam, sched)?;
        let seeds = [random_seed(rng, m, -10.0, 10.0), random_seed(rng, m, -10.0, 10.0)];
        let rep = convergence_report(&sys, &seeds, 10_000, &DetectOptions::for_period(p))?;
        for o in &rep.seeds {
            match &o.orbit {
                Some(orb) if p % orb.period != 0 => not_dividing += 1,
                Some(_) => {}
                None => undetected += 1,
            }
        }
        if let Some(d) = rep.max_distance() {
            worst = worst.max(d);
        }
    }
    Ok(vec![
        check("detected", undetected == 0, format!("{undetected} seeds without a period")),
        check("period-divides-P", not_dividing == 0, format!("{not_dividing} of {} orbits", 2 * systems)),
        check("seed-independent", worst <= 1e-8, format!("max inter-seed distance {worst:e}")),
    ])
}

fn autonomous(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let n = count(100, s);
    let mut worst = 0.0f64;
    let mut undetected = 0;
    for _ in 0..n {
        let m = rng.gen_range(1..=5);
        let fam = random_family(rng, m, 1, 0.9);
        let k = RankIndex::new(rng.gen_range(1..=m))?;
        let lim = autonomous_rank_limit(&fam, k, &FixedPointOptions::default())?;
        let sys = RankSystem::new(fam, RankSchedule::constant(k, 1)?)?;
        let t = iterate(&sys, &random_seed(rng, m, -10.0, 10.0), 4_000)?;
        match detect_period(&t, &DetectOptions::for_period(1))? {
            Some(o) if o.period == 1 => worst = worst.max((o.phase_values[0] - lim.value).abs()),
            _ => undetected += 1,
        }
    }
    Ok(vec![
        check("constant-limit", undetected == 0, format!("{undetected} without period 1")),
        check("matches-k-rank", worst <= 1e-9, format!("max deviation {worst:e}")),
    ])
}

fn p2m2(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let n = count(100, s);
    let (mut worst_block, mut worst_sim) = (0.0f64, 0.0f64);
    let mut excluded = 0;
    let mut undetected = 0;
    for _ in 0..n {
        let fam = random_family(rng, 2, 2, 0.9);
        let sched = RankSchedule::constant(RankIndex::TOP, 2)?;
        let cf = p2m2_from_family(&fam, &sched, &FixedPointOptions::default())?;
        if cf.case == P2M2Case::Excluded {
            excluded += 1;
        }
        let sys = RankSystem::new(fam, sched)?;
        let (bo, _) = block_orbit(&sys, 1e-12)?;
        worst_block = worst_block.max(orbit_distance(&bo, &cf.orbit));
        let t = iterate(&sys, &random_seed(rng, 2, -10.0, 10.0), 10_000)?;
        match detect_period(&t, &DetectOptions::for_period(2))? {
            Some(o) => worst_sim = worst_sim.max(orbit_distance(&o, &cf.orbit)),
            None => undetected += 1,
        }
    }
    // exclusion: r1 < r3 and r2 < r4 force f(r4) < r3 or g(r3) < r4
    let mut excl_fail = 0;
    let mut premises = 0;
    let fp = FixedPointOptions::default();
    for _ in 0..count(2_000, s) {
        let (fs, _) = random_contraction(rng, 0.9);
        let (gs, _) = random_contraction(rng, 0.9);
        let (f, g) = (ScalarExpr::parse(&fs)?, ScalarExpr::parse(&gs)?);
        let r1 = fixed_point_of(|x| f.eval(g.eval(x, 1)?, 1), &fp)?.r;
        let r2 = g.eval(r1, 1)?;
        let (r3, r4) = (rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
        if !(r1 < r3 && r2 < r4) {
            continue;
        }
        premises += 1;
        if !(f.eval(r4, 1)? < r3 || g.eval(r3, 1)? < r4) {
            excl_fail += 1;
        }
    }
    Ok(vec![
        check("matches-block-map", worst_block <= 1e-9, format!("max deviation {worst_block:e}")),
        check("matches-simulation", worst_sim <= 1e-9 && undetected == 0, format!("max deviation {worst_sim:e}, {undetected} undetected")),
        check("excluded-row-absent", excluded == 0, format!("{excluded} of {n}")),
        check("exclusion", excl_fail == 0 && premises > 0, format!("{excl_fail} failures in {premises} premise instances")),
    ])
}

fn random_power(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, [f64; 2]) {
    let a = (0..2).map(|_| (0..2).map(|_| rng.gen_range(0.1..5.0)).collect()).collect();
    (a, [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)])
}

fn power_law(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let n = count(100, s);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (a, al) = random_power(rng);
        let lim = power_max_p2m2_limit(&a, al)?;
        let (fam, sched) = power_max_system(&a, &al, PowerTransform::Log)?;
        let sys = RankSystem::new(fam, sched)?;
        let (o, _) = block_orbit(&sys, 1e-12)?;
        for (n, v) in [(2, lim.even), (1, lim.odd)] {
            worst = worst.max((o.value_at(n).exp() / v - 1.0).abs());
        }
    }
    let mut worst_eq = 0.0f64;
    for _ in 0..count(20, s) {
        let (a1, a2): (f64, f64) = (rng.gen_range(0.1..5.0), rng.gen_range(0.1..5.0));
        let al = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        let want = a1.powf(1.0 / (1.0 - al[0])).max(a2.powf(1.0 / (1.0 - al[1])));
        let lim = power_max_p2m2_limit(&[vec![a1, a2], vec![a1, a2]], al)?;
        worst_eq = worst_eq.max((lim.even / want - 1.0).abs()).max((lim.odd / want - 1.0).abs());
    }
    Ok(vec![
        check("matches-log-solver", worst <= 1e-9, format!("max relative deviation {worst:e}")),
        check("equal-columns", worst_eq <= 1e-9, format!("max relative deviation {worst_eq:e}")),
    ])
}

fn counterexamples(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let (fam, sched) = affine_matrix_system(&[vec![-1.0, -1.0]], &[vec![0.0, 0.0]], RankIndex::TOP)?;
    let bound = fam.alpha_bound().unwrap().bound;
    let p3 = RankSystem::new(fam, sched)?;
    let t = iterate(&p3, &InitialCondition::new(vec![1.0, 2.0])?, 10_000)?;
    let o = detect_period(&t, &DetectOptions::for_period(1))?;
    checks.push(check(
        "period-three",
        o.as_ref().is_some_and(|o| o.period == 3),
        format!("detected {:?}", o.map(|o| o.period)),
    ));
    checks.push(check("period-three-flagged", bound >= 1.0, format!("bound {bound}")));

    let tent_f = ScalarExpr::parse("max(1-2*x, 2*x-1)")?;
    let est = estimate_scalar_lipschitz(&tent_f, 1, DomainInterval::new(-2.0, 2.0)?, DEFAULT_GRID_POINTS, DEFAULT_SAFETY_FACTOR)?;
    checks.push(check("tent-flagged", est.bound >= 1.0, format!("bound {}", est.bound)));
    let tent = RankSystem::new(
        ScalarFamily::from_functions(vec![tent_f], 1)?,
        RankSchedule::constant(RankIndex::TOP, 1)?,
    )?;
    // nearby seeds separate at the doubling rate until rounding takes over
    let pairs = count(20, s);
    let mut slow = 0;
    for _ in 0..pairs {
        let x0: f64 = rng.gen_range(0.1..0.9);
        let a = iterate(&tent, &InitialCondition::new(vec![x0])?, 60)?;
        let b = iterate(&tent, &InitialCondition::new(vec![x0 + 1e-12])?, 60)?;
        if max_abs_diff(&a.values, &b.values) < 0.1 {
            slow += 1;
        }
    }
    checks.push(check(
        "tent-sensitive",
        slow == 0,
        format!("{slow} of {pairs} seed pairs 1e-12 apart stayed within 0.1 over 60 steps"),
    ));
    Ok(checks)
}

fn max_minus_rank(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let n = count(20, s);
    let (mut not_dividing, mut undetected) = (0, 0);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let m = rng.gen_range(1..=5);
        let p = rng.gen_range(1..=m);
        let fam = random_family(rng, m, 1, 0.9);
        let fs = (1..=m).map(|i| fam.entry(i, 1).clone()).collect();
        let fam = ScalarFamily::from_functions(fs, p)?.with_alpha_bound(*fam.alpha_bound().unwrap());
        let sys = max_minus_rank_system(&fam)?;
        let t = iterate(&sys, &random_seed(rng, m, -10.0, 10.0), 10_000)?;
        let (bo, _) = block_orbit(&sys, 1e-12)?;
        match detect_period(&t, &DetectOptions::for_period(p))? {
            Some(o) => {
                if p % o.period != 0 {
                    not_dividing += 1;
                }
                worst = worst.max(orbit_distance(&o, &bo));
            }
            None => undetected += 1,
        }
    }
    Ok(vec![
        check("period-divides-P", not_dividing == 0 && undetected == 0, format!("{not_dividing} not dividing, {undetected} undetected")),
        check("block-matches-simulation", worst <= 1e-8, format!("max deviation {worst:e}")),
    ])
}

fn duality(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    for _ in 0..count(10, s) {
        let (m, p) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let a: Vec<Vec<f64>> = (0..p).map(|_| (0..m).map(|_| rng.gen_range(0.2..4.0)).collect()).collect();
        let al: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.9..0.9)).collect();
        let (lf, ls) = power_max_system(&a, &al, PowerTransform::Log)?;
        let (rf, rs) = power_max_system(&a, &al, PowerTransform::Raw)?;
        let y0 = random_seed(rng, m, -2.0, 2.0);
        let x0 = InitialCondition::new(y0.values().iter().map(|v| v.exp()).collect())?;
        let ly = iterate(&RankSystem::new(lf, ls)?, &y0, 1_000)?;
        let rx = iterate(&RankSystem::new(rf, rs)?, &x0, 1_000)?;
        for (y, x) in ly.values.iter().zip(&rx.values) {
            worst = worst.max((y.exp() / x - 1.0).abs());
        }
    }
    Ok(vec![check("exp-log-agree", worst <= 1e-12, format!("max relative deviation {worst:e}"))])
}

fn toward_fixed_point(rng: &mut ChaCha8Rng, s: f64) -> Result<Vec<Check>> {
    let mut bad = 0;
    let mut total = 0;
    for _ in 0..count(100, s) {
        let (src, _) = random_contraction(rng, 0.9);
        let f = ScalarExpr::parse(&src)?;
        let r = fixed_point_of(f.at(1), &FixedPointOptions::default())?.r;
        for _ in 0..100 {
            let d: f64 = rng.gen_range(1e-3..10.0);
            let (above, below) = (r + d, r - d);
            total += 2;
            if !(f.eval(above, 1)? < above) {
                bad += 1;
            }
            if !(f.eval(below, 1)? > below) {
                bad += 1;
            }
        }
    }
    Ok(vec![check("toward-fixed-point", bad == 0, format!("{bad} of {total} points"))])
}

// ---------------------------------------------------------------------------
// per-system battery

/// Property checks for one concrete system: certification, block/direct
/// equivalence, solver and shift check, and agreement of the solved orbit
/// with simulations from several seeds.
pub fn run_system_battery(sys: &BuiltSystem, seeds: &[InitialCondition], steps: usize, opts: &VerifyOptions) -> Result<VerifyReport> {
    let blk: &BlockSystem = &sys.block;
    let p = blk.period();
    let mut checks = Vec::new();
    let bound = blk.l_bound().map(|l| l.bound);
    checks.push(check(
        "certified",
        blk.is_certified(),
        format!("bound {}", bound.map_or("none".into(), |b| b.to_string())),
    ));

    let mut rng = suite_rng(opts.rng_seed, "system");
    let init = seeds.first().cloned().unwrap_or_else(|| random_seed(&mut rng, blk.memory(), -1.0, 1.0));
    let direct = (|| -> Result<f64> {
        let sdim = blk.block_dim();
        let traj = iterate(blk, &init, sdim * 51)?;
        let map = BlockMap::new(blk);
        let mut y = first_block(blk, &init)?;
        let mut worst = 0.0f64;
        for m in 1..=50 {
            y = map.apply(&y)?;
            worst = worst.max(max_abs_diff(&y, &traj.values[m * sdim..(m + 1) * sdim]));
        }
        Ok(worst)
    })();
    checks.push(match direct {
        Ok(w) => check("block-equals-direct", w <= 1e-13, format!("max deviation {w:e}")),
        Err(e) => check("block-equals-direct", false, e.to_string()),
    });

    let solved = (|| -> Result<PeriodicOrbit> {
        let map = BlockMap::new(blk);
        let fp = solve_fixed_point(
            &map,
            &first_block(blk, &init)?,
            &SolveOptions {
                force: true,
                ..SolveOptions::default()
            },
        )?;
        let shift = shift_commutation_check(&fp.x_star, p, SolveOptions::default().tol);
        if !shift.passed {
            return Err(Error::Precondition(format!("shift violation {:e}", shift.max_violation)));
        }
        extract_periodic_orbit(&fp.x_star, p, SolveOptions::default().tol)
    })();
    let orbit = match solved {
        Ok(o) => {
            checks.push(check("fixed-point", true, format!("prime period {}", o.period)));
            Some(o)
        }
        Err(e) => {
            checks.push(check("fixed-point", false, e.to_string()));
            None
        }
    };

    let mut all_seeds: Vec<InitialCondition> = seeds.to_vec();
    while all_seeds.len() < 2 {
        all_seeds.push(random_seed(&mut rng, blk.memory(), -1.0, 1.0));
    }
    match convergence_report(blk, &all_seeds, steps, &DetectOptions::for_period(p)) {
        Ok(rep) => {
            let dividing = rep.seeds.iter().all(|o| o.orbit.as_ref().is_some_and(|o| p % o.period == 0));
            checks.push(check(
                "period-divides-P",
                dividing,
                format!(
                    "periods {:?}",
                    rep.seeds.iter().map(|o| o.orbit.as_ref().map(|o| o.period)).collect::<Vec<_>>()
                ),
            ));
            let d = rep.max_distance();
            checks.push(check(
                "seed-independent",
                d.is_some_and(|d| d <= 1e-8),
                format!("max inter-seed distance {d:?}"),
            ));
            let agree = match (&orbit, rep.seeds[0].orbit.as_ref()) {
                (Some(a), Some(b)) => Some(orbit_distance(a, b)),
                _ => None,
            };
            checks.push(check(
                "simulation-matches-solver",
                agree.is_some_and(|d| d <= 1e-8),
                format!("distance {agree:?}"),
            ));
        }
        Err(e) => checks.push(check("simulation", false, e.to_string())),
    }

    let suite = SuiteReport {
        name: "system".into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    Ok(VerifyReport {
        schema: REPORT_SCHEMA,
        rng_seed: opts.rng_seed,
        scale: opts.scale,
        system: Some(sys.name.clone()),
        passed: suite.passed,
        suites: vec![suite],
    })
}
