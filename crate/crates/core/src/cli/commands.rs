use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::output::{fmt_values, trajectory_csv, values_csv, write_file, write_report, ensure_dir, CSV_SCHEMA};
use super::{
    ClosedFormArgs, CmdResult, Failure, LipschitzArgs, SimulateArgs, SolveArgs, SystemArgs,
    VerifyArgs, EXIT_CERTIFICATION, EXIT_CHECK, EXIT_DEFINITION, EXIT_DETECTION, EXIT_IO,
    EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, TOL_ENV,
};
use crate::block_map::{
    extract_periodic_orbit, shift_commutation_check, solve_fixed_point, BlockMap,
    FixedPointResult, ShiftReport, SolveOptions, DEFAULT_SOLVE_TOL,
};
use crate::closed_form::{
    autonomous_rank_limit, p2m2_from_family, power_max_p2m2_limit, AutonomousLimit,
    FixedPointOptions, P2M2Orbit, PowerLimit,
};
use crate::definition::{BuiltSystem, Certificate, SystemDefinition, SystemSpec};
use crate::error::Error;
use crate::expr::LipschitzEstimate;
use crate::simulate::{
    convergence_report, detect_period, iterate, DetectOptions, PeriodicOrbit, SeedOutcome,
    DEFAULT_DETECT_TOL,
};
use crate::system::{power_max_system, InitialCondition, PowerTransform, RankSystem, Recurrence};
use crate::verify::{run_suites, run_system_battery, VerifyOptions, VerifyReport, SUITES};

const CLOSED_FORM_TOL: f64 = 1e-9;

fn say(out: &mut dyn Write, line: impl AsRef<str>) {
    let _ = writeln!(out, "{}", line.as_ref());
}

fn default_tol(flag: Option<f64>, fallback: f64) -> Result<f64, Failure> {
    let tol = match flag {
        Some(t) => t,
        None => match std::env::var(TOL_ENV) {
            Ok(v) => v
                .trim()
                .parse::<f64>()
                .map_err(|_| Failure::new(EXIT_USAGE, format!("config: {TOL_ENV}={v} is not a number")))?,
            Err(_) => fallback,
        },
    };
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::new(EXIT_USAGE, format!("config: tolerance must be positive, got {tol}")));
    }
    Ok(tol)
}

fn load(path: &Path) -> Result<SystemDefinition, Failure> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("load: cannot read {}: {e}", path.display())))?;
    let mut def = SystemDefinition::from_toml_str(&src).map_err(|e| Failure::at("load", e))?;
    if def.name.is_empty() {
        def.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(def)
}

fn load_and_build(a: &SystemArgs) -> Result<(SystemDefinition, BuiltSystem), Failure> {
    let def = load(&a.system)?;
    let built = def.build(a.rng_seed).map_err(|e| match e {
        Error::Sampling { .. } => Failure::at("certify", e),
        other => Failure::new(EXIT_DEFINITION, format!("build: {other}")),
    })?;
    Ok((def, built))
}

fn seed_from_values(def: &SystemDefinition, v: &[f64]) -> Result<InitialCondition, Failure> {
    if v.len() != def.memory {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("config: --seed-values needs {} values, got {}", def.memory, v.len()),
        ));
    }
    InitialCondition::new(v.to_vec()).map_err(|e| Failure::new(EXIT_USAGE, format!("config: {e}")))
}

fn require_certified(built: &BuiltSystem, force: bool) -> Result<(), Failure> {
    if built.block.is_certified() || force {
        return Ok(());
    }
    Err(Failure::new(
        EXIT_CERTIFICATION,
        format!(
            "certify: `{}` is not certified contractive ({}); rerun with --force",
            built.name,
            describe(built.block.l_bound())
        ),
    ))
}

fn describe(l: Option<&LipschitzEstimate>) -> String {
    match l {
        Some(l) => format!("bound {}", l.bound),
        None => "no bound".into(),
    }
}

#[derive(Serialize)]
struct SystemInfo {
    name: String,
    kind: &'static str,
    memory: usize,
    period: usize,
    alpha: Option<LipschitzEstimate>,
    certified: bool,
}

fn system_info(def: &SystemDefinition, built: &BuiltSystem) -> SystemInfo {
    SystemInfo {
        name: built.name.clone(),
        kind: built.kind,
        memory: def.memory,
        period: def.period,
        alpha: built.block.l_bound().copied(),
        certified: built.block.is_certified(),
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Serialize)]
struct SimulateReport {
    schema: &'static str,
    csv_schema: &'static str,
    system: SystemInfo,
    rng_seed: u64,
    steps: usize,
    forced: bool,
    detect: DetectOptions,
    seeds: Vec<SeedOutcome>,
    /// Phase-aligned sup distances between seed orbits.
    distances: Option<Vec<Vec<Option<f64>>>>,
    rate: Option<f64>,
    all_detected: bool,
}

pub(super) fn simulate(a: SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let tol = default_tol(a.tol, DEFAULT_DETECT_TOL)?;
    if a.seeds == Some(0) {
        return Err(Failure::new(EXIT_USAGE, "config: --seeds must be at least 1"));
    }
    let (def, built) = load_and_build(&a.sys)?;
    let seeds: Vec<InitialCondition> = match (&a.seed_values, a.seeds) {
        (Some(v), _) => vec![seed_from_values(&def, v)?],
        (None, Some(count)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.sys.rng_seed);
            let (lo, hi) = (def.domain.lo(), def.domain.hi());
            (0..count)
                .map(|_| InitialCondition::new((0..def.memory).map(|_| rng.gen_range(lo..=hi)).collect()).unwrap())
                .collect()
        }
        (None, None) => vec![def.initial_or_default()],
    };
    if a.steps < def.memory {
        return Err(Failure::new(EXIT_USAGE, format!("config: --steps must be at least M = {}", def.memory)));
    }
    let mut detect = DetectOptions::for_period(def.period);
    detect.tol = tol;
    if let Some(p) = a.pmax {
        detect.p_max = p;
    }
    if 2 * detect.p_max > (a.steps as f64 * detect.tail_fraction).ceil() as usize {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("config: --steps {} too short to test periods up to {}", a.steps, detect.p_max),
        ));
    }
    require_certified(&built, a.force)?;

    let sys = &built.block;
    let mut outcomes = Vec::with_capacity(seeds.len());
    let mut numeric: Option<Failure> = None;
    let out_dir = a.sys.out.as_deref();
    if let Some(d) = out_dir {
        ensure_dir(d)?;
    }
    for (i, seed) in seeds.iter().enumerate() {
        let traj = match iterate(sys, seed, a.steps) {
            Ok(t) => t,
            Err(Error::Simulation { step, source, partial }) => {
                if let Some(d) = out_dir {
                    write_file(&d.join(csv_name(i, seeds.len())), &values_csv(&partial, def.period))?;
                }
                let msg = format!("simulate: step {step}: {source}");
                outcomes.push(SeedOutcome {
                    initial: seed.clone(),
                    orbit: None,
                    rate: None,
                    failure: Some(msg.clone()),
                });
                numeric.get_or_insert(Failure::new(EXIT_NUMERIC, msg));
                continue;
            }
            Err(e) => return Err(Failure::at("simulate", e)),
        };
        if let Some(d) = out_dir {
            write_file(&d.join(csv_name(i, seeds.len())), &trajectory_csv(&traj))?;
        }
        let orbit = detect_period(&traj, &detect).map_err(|e| Failure::at("detect", e))?;
        outcomes.push(SeedOutcome {
            initial: seed.clone(),
            rate: orbit.as_ref().and_then(|o| crate::simulate::fit_rate(&traj, o)),
            failure: orbit.is_none().then(|| format!("no period <= {} within tol {}", detect.p_max, detect.tol)),
            orbit,
        });
    }

    let (distances, rate) = if seeds.len() >= 2 && numeric.is_none() {
        let rep = convergence_report(sys, &seeds, a.steps, &detect).map_err(|e| Failure::at("analyze", e))?;
        (Some(rep.distances), rep.rate)
    } else {
        (None, outcomes.iter().filter_map(|o| o.rate).reduce(f64::max))
    };
    let all_detected = outcomes.iter().all(|o| o.orbit.is_some());

    say(out, format!("system {} ({}), M = {}, P = {}", built.name, built.kind, def.memory, def.period));
    for (i, o) in outcomes.iter().enumerate() {
        match (&o.orbit, &o.failure) {
            (Some(orb), _) => say(
                out,
                format!(
                    "seed {}: period {} from n = {}, residual {:.3e}, values {}",
                    i + 1,
                    orb.period,
                    orb.onset.map_or("?".into(), |n| n.to_string()),
                    orb.residual,
                    fmt_values(&orb.phase_values)
                ),
            ),
            (None, Some(f)) => say(out, format!("seed {}: {f}", i + 1)),
            (None, None) => {}
        }
    }
    if let Some(d) = &distances {
        let worst = d.iter().flatten().flatten().fold(0.0f64, |a, b| a.max(*b));
        say(out, format!("max inter-seed orbit distance {worst:.3e}"));
    }

    let report = SimulateReport {
        schema: "rank-recur/simulate/v1",
        csv_schema: CSV_SCHEMA,
        system: system_info(&def, &built),
        rng_seed: a.sys.rng_seed,
        steps: a.steps,
        forced: a.force,
        detect,
        seeds: outcomes,
        distances,
        rate,
        all_detected,
    };
    write_report(out_dir, &report)?;
    if let Some(f) = numeric {
        return Err(f);
    }
    if !all_detected {
        return Err(Failure::new(EXIT_DETECTION, "detect: no period found for at least one seed"));
    }
    Ok(EXIT_OK)
}

fn csv_name(i: usize, total: usize) -> String {
    if total == 1 {
        "trajectory.csv".into()
    } else {
        format!("trajectory-{}.csv", i + 1)
    }
}

// ---------------------------------------------------------------------------
// solve

#[derive(Serialize)]
struct SolveReport {
    schema: &'static str,
    system: SystemInfo,
    rng_seed: u64,
    options: SolveOptions,
    seed: Vec<f64>,
    fixed_point: FixedPointResult,
    shift: ShiftReport,
    orbit: Option<PeriodicOrbit>,
}

fn solve_block(built: &BuiltSystem, seed: &InitialCondition, opts: &SolveOptions) -> Result<FixedPointResult, Failure> {
    let sys = &built.block;
    let start = iterate(sys, seed, sys.block_dim().max(sys.memory())).map_err(|e| Failure::at("seed", e))?;
    let map = BlockMap::new(sys);
    solve_fixed_point(&map, &start.values[..sys.block_dim()], opts).map_err(|e| Failure::at("solve", e))
}

pub(super) fn solve(a: SolveArgs, out: &mut dyn Write) -> CmdResult {
    let tol = default_tol(a.tol, DEFAULT_SOLVE_TOL)?;
    let (def, built) = load_and_build(&a.sys)?;
    let seed = match &a.seed_values {
        Some(v) => seed_from_values(&def, v)?,
        None => def.initial_or_default(),
    };
    let opts = SolveOptions {
        tol,
        max_iter: a.max_iter,
        force: a.force,
    };
    require_certified(&built, a.force)?;
    let fp = solve_block(&built, &seed, &opts)?;
    let p = def.period;
    let shift = shift_commutation_check(&fp.x_star, p, tol);
    let orbit = shift
        .passed
        .then(|| extract_periodic_orbit(&fp.x_star, p, tol))
        .transpose()
        .map_err(|e| Failure::at("extract", e))?;

    say(out, format!("system {} ({}), block dimension {}", built.name, built.kind, fp.x_star.len()));
    say(
        out,
        format!(
            "converged in {} iterations, residual {:.3e}, ratio estimate {:.4}",
            fp.iterations, fp.residual, fp.contraction_ratio_estimate
        ),
    );
    match &orbit {
        Some(o) => say(out, format!("orbit period {}: {}", o.period, fmt_values(&o.phase_values))),
        None => say(out, format!("shift check failed: violation {:.3e} at entry {:?}", shift.max_violation, shift.worst_index)),
    }
    let passed = shift.passed;
    let report = SolveReport {
        schema: "rank-recur/solve/v1",
        system: system_info(&def, &built),
        rng_seed: a.sys.rng_seed,
        options: opts,
        seed: seed.values().to_vec(),
        fixed_point: fp,
        shift,
        orbit,
    };
    write_report(a.sys.out.as_deref(), &report)?;
    if !passed {
        return Err(Failure::new(EXIT_CHECK, "shift: fixed point is not P-periodic under the shift"));
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// closed-form

#[derive(Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
enum FormulaData {
    Autonomous(AutonomousLimit),
    PeriodTwoMax(P2M2Orbit),
    PowerLaw(PowerLimit),
}

#[derive(Serialize)]
struct ClosedFormReport {
    schema: &'static str,
    system: SystemInfo,
    rng_seed: u64,
    tol: f64,
    /// `relative` for the power-law shape, else `absolute`.
    metric: &'static str,
    /// Values at `n = 1, ..., P` from the formula, the solver and the simulation.
    formula: Vec<f64>,
    solver: Vec<f64>,
    simulation: Option<Vec<f64>>,
    solver_discrepancy: f64,
    simulation_discrepancy: Option<f64>,
    data: FormulaData,
}

pub(super) fn closed_form(a: ClosedFormArgs, out: &mut dyn Write) -> CmdResult {
    let tol = default_tol(a.tol, CLOSED_FORM_TOL)?;
    let (def, built) = load_and_build(&a.sys)?;
    let p = def.period;
    let fp_opts = FixedPointOptions::default();
    let rank = built.rank.as_ref().ok_or_else(|| {
        Failure::at(
            "closed-form",
            Error::Unsupported(format!("{} systems have no closed form", built.kind)),
        )
    })?;

    let (data, formula, relative) = match &def.spec {
        SystemSpec::Power { a: coeffs, alphas, .. } if p == 2 && def.memory == 2 => {
            let lim = power_max_p2m2_limit(coeffs, [alphas[0], alphas[1]]).map_err(|e| Failure::at("closed-form", e))?;
            let f = vec![lim.odd, lim.even];
            (FormulaData::PowerLaw(lim), f, true)
        }
        _ if p == 1 => {
            let k = rank.schedule().k_at(1);
            let lim = autonomous_rank_limit(rank.family(), k, &fp_opts).map_err(|e| Failure::at("closed-form", e))?;
            let f = vec![lim.value];
            (FormulaData::Autonomous(lim), f, false)
        }
        _ => {
            let orb = p2m2_from_family(rank.family(), rank.schedule(), &fp_opts).map_err(|e| Failure::at("closed-form", e))?;
            let f = vec![orb.odd, orb.even];
            (FormulaData::PeriodTwoMax(orb), f, false)
        }
    };

    // power systems are solved and simulated in log form, then exponentiated
    let log_power;
    let (solve_sys, lift): (&dyn Recurrence, fn(f64) -> f64) = match &def.spec {
        SystemSpec::Power { a: coeffs, alphas, .. } => {
            let (fam, sched) = power_max_system(coeffs, alphas, PowerTransform::Log).map_err(|e| Failure::at("closed-form", e))?;
            log_power = RankSystem::new(fam, sched).map_err(|e| Failure::at("closed-form", e))?;
            (&log_power, f64::exp)
        }
        _ => {
            require_certified(&built, a.force)?;
            (&built.block, |x| x)
        }
    };
    let seed = match &def.spec {
        SystemSpec::Power { .. } => InitialCondition::new(vec![0.0; def.memory]).unwrap(),
        _ => def.initial_or_default(),
    };
    let opts = SolveOptions {
        force: a.force,
        ..SolveOptions::default()
    };
    let map = BlockMap::new(solve_sys);
    let start = iterate(solve_sys, &seed, solve_sys.block_dim().max(def.memory)).map_err(|e| Failure::at("seed", e))?;
    let fp = solve_fixed_point(&map, &start.values[..solve_sys.block_dim()], &opts).map_err(|e| Failure::at("solve", e))?;
    let orbit = extract_periodic_orbit(&fp.x_star, p, opts.tol).map_err(|e| Failure::at("extract", e))?;
    let solver: Vec<f64> = (1..=p as i64).map(|n| lift(orbit.value_at(n))).collect();

    let traj = iterate(solve_sys, &seed, a.steps).map_err(|e| Failure::at("simulate", e))?;
    let detected = detect_period(&traj, &DetectOptions::for_period(p)).map_err(|e| Failure::at("detect", e))?;
    let simulation: Option<Vec<f64>> = detected.map(|o| (1..=p as i64).map(|n| lift(o.value_at(n))).collect());

    let gap = |u: &[f64], v: &[f64]| {
        u.iter()
            .zip(v)
            .map(|(x, y)| if relative { (x / y - 1.0).abs() } else { (x - y).abs() })
            .fold(0.0f64, f64::max)
    };
    let solver_discrepancy = gap(&formula, &solver);
    let simulation_discrepancy = simulation.as_ref().map(|s| gap(&formula, s));

    say(out, format!("system {} ({}), M = {}, P = {}", built.name, built.kind, def.memory, p));
    say(out, format!("formula     {}", fmt_values(&formula)));
    say(out, format!("solver      {}  discrepancy {solver_discrepancy:.3e}", fmt_values(&solver)));
    match (&simulation, simulation_discrepancy) {
        (Some(s), Some(d)) => say(out, format!("simulation  {}  discrepancy {d:.3e}", fmt_values(s))),
        _ => say(out, "simulation  no period detected"),
    }
    if let FormulaData::PeriodTwoMax(o) = &data {
        say(out, format!("case {:?}{}", o.case, if o.ties { " (tie)" } else { "" }));
    }

    let ok = solver_discrepancy <= tol && simulation_discrepancy.is_some_and(|d| d <= tol);
    let report = ClosedFormReport {
        schema: "rank-recur/closed-form/v1",
        system: system_info(&def, &built),
        rng_seed: a.sys.rng_seed,
        tol,
        metric: if relative { "relative" } else { "absolute" },
        formula,
        solver,
        simulation,
        solver_discrepancy,
        simulation_discrepancy,
        data,
    };
    write_report(a.sys.out.as_deref(), &report)?;
    if simulation_discrepancy.is_none() {
        return Err(Failure::new(EXIT_DETECTION, "detect: simulation did not settle on a period"));
    }
    if !ok {
        return Err(Failure::new(EXIT_CHECK, format!("closed-form: discrepancy exceeds {tol:e}")));
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// verify

pub(super) fn verify(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    if a.list {
        for (name, about) in SUITES {
            say(out, format!("{name:<19} {about}"));
        }
        return Ok(EXIT_OK);
    }
    let opts = VerifyOptions {
        rng_seed: a.rng_seed,
        scale: if a.quick { 0.1 } else { 1.0 },
    };
    let report: VerifyReport = match &a.system {
        Some(path) => {
            let def = load(path)?;
            let built = def.build(a.rng_seed).map_err(|e| Failure::at("build", e))?;
            let seeds = match &a.seed_values {
                Some(v) => vec![seed_from_values(&def, v)?],
                None => def.initial.iter().cloned().collect(),
            };
            run_system_battery(&built, &seeds, a.steps, &opts).map_err(|e| Failure::at("verify", e))?
        }
        None => run_suites(&a.suites, &opts).map_err(|e| Failure::at("verify", e))?,
    };
    for s in &report.suites {
        say(out, format!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name));
        for c in &s.checks {
            say(out, format!("  {} {:<26} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail));
        }
    }
    let failed = report.suites.iter().filter(|s| !s.passed).count();
    say(out, format!("{} suites, {failed} failed", report.suites.len()));
    write_report(a.out.as_deref(), &report)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_CHECK })
}

// ---------------------------------------------------------------------------
// lipschitz

#[derive(Serialize)]
struct LipschitzReport {
    schema: &'static str,
    system: SystemInfo,
    rng_seed: u64,
    certificates: Vec<Certificate>,
    flagged: bool,
}

pub(super) fn lipschitz(a: LipschitzArgs, out: &mut dyn Write) -> CmdResult {
    let mut def = load(&a.sys.system)?;
    if let Some(g) = a.grid_points {
        def.certify.grid_points = g;
    }
    if let Some(s) = a.safety_factor {
        def.certify.safety_factor = s;
    }
    if let Some(p) = a.pairs {
        def.certify.pairs = p;
    }
    let built = def.build(a.sys.rng_seed).map_err(|e| match e {
        Error::Argument(_) => Failure::at("config", e),
        Error::Sampling { .. } => Failure::at("certify", e),
        other => Failure::new(EXIT_DEFINITION, format!("build: {other}")),
    })?;
    say(out, format!("system {} ({}), M = {}, P = {}", built.name, built.kind, def.memory, def.period));
    for c in &built.certificates {
        let m = serde_json::to_value(c.estimate.method).ok();
        let method = m.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        say(
            out,
            format!(
                "{:<16} {:<20} {:.6}{}",
                c.label,
                method,
                c.estimate.bound,
                if c.estimate.is_contractive() { "" } else { "  FLAGGED" }
            ),
        );
    }
    let flagged = !built.block.is_certified();
    say(
        out,
        format!(
            "system {}: {}",
            describe(built.block.l_bound()),
            if flagged { "not certified" } else { "contractive" }
        ),
    );
    let report = LipschitzReport {
        schema: "rank-recur/lipschitz/v1",
        system: system_info(&def, &built),
        rng_seed: a.sys.rng_seed,
        certificates: built.certificates.clone(),
        flagged,
    };
    write_report(a.sys.out.as_deref(), &report)?;
    Ok(if flagged { EXIT_CERTIFICATION } else { EXIT_OK })
}
