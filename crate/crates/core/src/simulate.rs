//! Direct iteration of a recurrence and analysis of the resulting sequence.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{phase_of, InitialCondition, Recurrence};

pub const DEFAULT_DETECT_TOL: f64 = 1e-9;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;
/// Number of pre-onset points used by the rate fit.
pub const RATE_FIT_POINTS: usize = 50;

/// `x_1, ..., x_N` with the first `M` entries equal to the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub values: Vec<f64>,
    pub memory: usize,
    pub period: usize,
    pub initial: InitialCondition,
    pub label: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `x_n`, 1-based.
    pub fn x(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    pub fn phase(&self, n: usize) -> usize {
        phase_of(n as i64, self.period)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Runs the recurrence from `x_1..x_M` up to `x_N`.
pub fn iterate<R: Recurrence + ?Sized>(
    rec: &R,
    init: &InitialCondition,
    n: usize,
) -> Result<Trajectory> {
    let m = rec.memory();
    if init.len() != m {
        return Err(Error::arg(format!(
            "initial condition has {} values, memory length is {m}",
            init.len()
        )));
    }
    if n < m {
        return Err(Error::arg(format!("N = {n} is shorter than the memory length {m}")));
    }
    let period = rec.period();
    let mut values = Vec::with_capacity(n);
    values.extend_from_slice(init.values());
    let mut recent = vec![0.0; m];
    for step in m + 1..=n {
        for (j, r) in recent.iter_mut().enumerate() {
            *r = values[step - 2 - j];
        }
        match rec.step(phase_of(step as i64, period), &recent) {
            Ok(v) => values.push(v),
            Err(source) => {
                return Err(Error::Simulation {
                    step,
                    source,
                    partial: values,
                })
            }
        }
    }
    Ok(Trajectory {
        values,
        memory: m,
        period,
        initial: init.clone(),
        label: None,
    })
}

/// A periodic sequence `n -> phase_values[(n - anchor) mod period]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub phase_values: Vec<f64>,
    pub residual: f64,
    /// First index from which the trajectory is periodic within tolerance.
    pub onset: Option<usize>,
    /// Absolute index `n` at which `phase_values[0]` occurs.
    pub anchor: usize,
}

impl PeriodicOrbit {
    pub fn value_at(&self, n: i64) -> f64 {
        let p = self.period as i64;
        self.phase_values[(n - self.anchor as i64).rem_euclid(p) as usize]
    }

    /// Values at `n = 1, ..., len`.
    pub fn unrolled(&self, len: usize) -> Vec<f64> {
        (1..=len as i64).map(|n| self.value_at(n)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectOptions {
    pub p_max: usize,
    pub tol: f64,
    pub tail_fraction: f64,
}

impl DetectOptions {
    /// Defaults for a system with forcing period `period`: `p_max = 4P`.
    pub fn for_period(period: usize) -> Self {
        DetectOptions {
            p_max: 4 * period,
            tol: DEFAULT_DETECT_TOL,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }
}

/// Smallest `p <= p_max` with `|x_{n+p} - x_n| <= tol` across the tail window,
/// or `None`.
pub fn detect_period(t: &Trajectory, opts: &DetectOptions) -> Result<Option<PeriodicOrbit>> {
    if opts.p_max == 0 {
        return Err(Error::arg("p_max must be at least 1"));
    }
    if !(opts.tail_fraction > 0.0 && opts.tail_fraction <= 1.0) {
        return Err(Error::arg("tail_fraction must lie in (0, 1]"));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::arg("tol must be non-negative"));
    }
    let x = &t.values;
    let len = x.len();
    let tail = ((len as f64 * opts.tail_fraction).ceil() as usize).min(len);
    if tail < 2 * opts.p_max {
        return Err(Error::arg(format!(
            "tail window of {tail} points is shorter than 2 * p_max = {}",
            2 * opts.p_max
        )));
    }
    let start = len - tail;
    for p in 1..=opts.p_max {
        let residual = (start..len - p)
            .map(|i| (x[i + p] - x[i]).abs())
            .fold(0.0, f64::max);
        if residual <= opts.tol {
            let mut onset = start;
            while onset > 0 && (x[onset - 1 + p] - x[onset - 1]).abs() <= opts.tol {
                onset -= 1;
            }
            return Ok(Some(PeriodicOrbit {
                period: p,
                phase_values: x[len - p..].to_vec(),
                residual,
                onset: Some(onset + 1),
                anchor: len - p + 1,
            }));
        }
    }
    Ok(None)
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Sup distance between two orbits compared at the same absolute indices.
pub fn orbit_distance(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    (1..=lcm(a.period, b.period) as i64)
        .map(|n| (a.value_at(n) - b.value_at(n)).abs())
        .fold(0.0, f64::max)
}

/// Smallest sup distance over all relative shifts of `b`.
pub fn orbit_distance_free(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    let l = lcm(a.period, b.period) as i64;
    (0..l)
        .map(|r| {
            (1..=l)
                .map(|n| (a.value_at(n) - b.value_at(n + r)).abs())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub initial: InitialCondition,
    pub orbit: Option<PeriodicOrbit>,
    /// Per-step geometric rate fitted on this seed, when enough points exist.
    pub rate: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub seeds: Vec<SeedOutcome>,
    /// Phase-aligned sup distances; `None` where either seed failed.
    pub distances: Vec<Vec<Option<f64>>>,
    pub free_rotation_distances: Vec<Vec<Option<f64>>>,
    /// Largest per-seed rate.
    pub rate: Option<f64>,
    pub alpha: Option<f64>,
    pub steps: usize,
    pub detect: DetectOptions,
}

impl ConvergenceReport {
    pub fn max_distance(&self) -> Option<f64> {
        let mut worst = Some(0.0f64);
        for d in self.distances.iter().flatten() {
            worst = match (worst, d) {
                (Some(w), Some(d)) => Some(w.max(*d)),
                _ => None,
            };
        }
        worst
    }

    pub fn all_detected(&self) -> bool {
        self.seeds.iter().all(|s| s.orbit.is_some())
    }
}

/// Least-squares slope of `ln e_n` against `n`, where `e_n` is the distance of
/// the state `(x_n, ..., x_{n-M+1})` from the orbit, over the last
/// `RATE_FIT_POINTS` pre-onset indices with `e_n > 100 eps`. Returns
/// `exp(slope)`.
pub fn fit_rate(t: &Trajectory, orbit: &PeriodicOrbit) -> Option<f64> {
    let onset = orbit.onset?;
    let m = t.memory;
    let floor = 100.0 * f64::EPSILON;
    let err = |n: usize| {
        (n + 1 - m..=n)
            .map(|j| (t.x(j) - orbit.value_at(j as i64)).abs())
            .fold(0.0, f64::max)
    };
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(RATE_FIT_POINTS);
    let mut n = onset.min(t.len() + 1);
    while n > m && pts.len() < RATE_FIT_POINTS {
        n -= 1;
        let e = err(n);
        let scale = orbit.value_at(n as i64).abs().max(1.0);
        if e > floor * scale {
            pts.push((n as f64, e.ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some((sxy / sxx).exp())
}

/// Runs every seed, detects its orbit and compares the orbits pairwise.
pub fn convergence_report<R: Recurrence + ?Sized>(
    rec: &R,
    seeds: &[InitialCondition],
    n: usize,
    opts: &DetectOptions,
) -> Result<ConvergenceReport> {
    if seeds.len() < 2 {
        return Err(Error::arg("a convergence report needs at least two seeds"));
    }
    let mut outcomes = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let outcome = match iterate(rec, seed, n) {
            Ok(t) => match detect_period(&t, opts)? {
                Some(orbit) => SeedOutcome {
                    initial: seed.clone(),
                    rate: fit_rate(&t, &orbit),
                    orbit: Some(orbit),
                    failure: None,
                },
                None => SeedOutcome {
                    initial: seed.clone(),
                    orbit: None,
                    rate: None,
                    failure: Some(format!("no period <= {} at tol {:e}", opts.p_max, opts.tol)),
                },
            },
            Err(e @ Error::Simulation { .. }) => SeedOutcome {
                initial: seed.clone(),
                orbit: None,
                rate: None,
                failure: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        outcomes.push(outcome);
    }
    let k = outcomes.len();
    let mut distances = vec![vec![None; k]; k];
    let mut free = vec![vec![None; k]; k];
    for i in 0..k {
        if outcomes[i].orbit.is_some() {
            distances[i][i] = Some(0.0);
            free[i][i] = Some(0.0);
        }
        for j in i + 1..k {
            if let (Some(a), Some(b)) = (&outcomes[i].orbit, &outcomes[j].orbit) {
                let d = orbit_distance(a, b);
                let f = orbit_distance_free(a, b);
                distances[i][j] = Some(d);
                distances[j][i] = Some(d);
                free[i][j] = Some(f);
                free[j][i] = Some(f);
            }
        }
    }
    let rate = outcomes
        .iter()
        .filter_map(|o| o.rate)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(ConvergenceReport {
        seeds: outcomes,
        distances,
        free_rotation_distances: free,
        rate,
        alpha: rec.lipschitz_bound().map(|l| l.bound),
        steps: n,
        detect: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarExpr;
    use crate::rank::RankIndex;
    use crate::system::{affine_matrix_system, RankSchedule, RankSystem, ScalarFamily};

    fn ic(v: &[f64]) -> InitialCondition {
        InitialCondition::new(v.to_vec()).unwrap()
    }

    fn rank_sys(fs: &[&str], period: usize, k: usize) -> RankSystem {
        let fs = fs.iter().map(|s| ScalarExpr::parse(s).unwrap()).collect();
        let fam = ScalarFamily::from_functions(fs, period).unwrap();
        let k = RankIndex::new(k).unwrap();
        RankSystem::new(fam, RankSchedule::constant(k, period).unwrap()).unwrap()
    }

    fn period_three() -> RankSystem {
        rank_sys(&["-x", "-x"], 1, 1)
    }

    #[test]
    fn period_three_hand_iteration() {
        // x3 = max(-2, -1) = -1, x4 = max(1, -2) = 1, x5 = max(-1, 1) = 1, ...
        let t = iterate(&period_three(), &ic(&[1.0, 2.0]), 9).unwrap();
        assert_eq!(t.values, [1.0, 2.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn period_three_detected() {
        let t = iterate(&period_three(), &ic(&[1.0, 2.0]), 200).unwrap();
        let o = detect_period(&t, &DetectOptions::for_period(1)).unwrap().unwrap();
        assert_eq!(o.period, 3);
        let mut v = o.phase_values.clone();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, [-1.0, 1.0, 1.0]);
        assert_eq!(o.onset, Some(3));
        assert_eq!(o.value_at(3), -1.0);
        assert_eq!(o.value_at(4), 1.0);
    }

    #[test]
    fn geometric_approach_to_two() {
        let t = iterate(&rank_sys(&["0.5*x+1"], 1, 1), &ic(&[0.0]), 200).unwrap();
        assert_eq!(t.x(200), 2.0);
        let o = detect_period(&t, &DetectOptions::for_period(1)).unwrap().unwrap();
        assert_eq!((o.period, o.phase_values.as_slice()), (1, &[2.0][..]));
        assert_eq!(o.residual, 0.0);
    }

    #[test]
    fn constant_tail_is_period_one_for_any_pmax() {
        let mut values = vec![3.0, -1.0, 7.0];
        values.extend(std::iter::repeat_n(0.25, 400));
        let t = Trajectory {
            values,
            memory: 1,
            period: 5,
            initial: ic(&[3.0]),
            label: None,
        };
        for p_max in [1, 2, 17, 50] {
            let opts = DetectOptions {
                p_max,
                tol: 0.0,
                tail_fraction: 0.25,
            };
            let o = detect_period(&t, &opts).unwrap().unwrap();
            assert_eq!(o.period, 1);
            assert_eq!(o.onset, Some(4));
        }
    }

    #[test]
    fn drifting_sequence_has_no_period() {
        let t = iterate(&rank_sys(&["x + 1"], 1, 1), &ic(&[0.0]), 1000).unwrap();
        assert_eq!(detect_period(&t, &DetectOptions::for_period(4)).unwrap(), None);
    }

    #[test]
    fn short_tail_rejected() {
        let t = iterate(&period_three(), &ic(&[1.0, 2.0]), 40).unwrap();
        let opts = DetectOptions {
            p_max: 64,
            ..DetectOptions::for_period(1)
        };
        assert!(matches!(detect_period(&t, &opts), Err(Error::Argument(_))));
    }

    // The tent map sends every double to a dyadic rational whose denominator
    // halves at each step, so a generic seed lands on the fixed point 1 after
    // about 55 iterations instead of wandering.
    #[test]
    fn tent_map_collapses_in_binary_floating_point() {
        let tent = rank_sys(&["max(1-2*x, 2*x-1)"], 1, 1);
        let t = iterate(&tent, &ic(&[0.123_456_789]), 10_000).unwrap();
        let first_one = t.values.iter().position(|v| *v == 1.0).unwrap();
        assert!(first_one < 80, "{first_one}");
        let o = detect_period(&t, &DetectOptions { p_max: 64, ..DetectOptions::for_period(1) })
            .unwrap()
            .unwrap();
        assert_eq!(o.period, 1);
    }

    #[test]
    fn domain_error_keeps_partial_trajectory() {
        let sys = rank_sys(&["ln(x)"], 1, 1);
        // x2 = ln 0.5 < 0, so x3 fails
        match iterate(&sys, &ic(&[0.5]), 10).unwrap_err() {
            Error::Simulation { step, partial, source } => {
                assert_eq!(step, 3);
                assert_eq!(partial.len(), 2);
                assert!(source.subexpr.contains("ln"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn iteration_is_deterministic() {
        let sys = rank_sys(&["exp(0.1*sin(0.7 + 2*pi*n/4) - x^2)", "0.5*cos(x)", "0.2*x"], 4, 2);
        let a = iterate(&sys, &ic(&[0.1, 0.2, 0.3]), 500).unwrap();
        let b = iterate(&sys, &ic(&[0.1, 0.2, 0.3]), 500).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn report_on_affine_system() {
        let a = vec![vec![0.5, -0.3], vec![0.2, 0.6]];
        let b = vec![vec![1.0, -2.0], vec![0.5, 3.0]];
        let (fam, sched) = affine_matrix_system(&a, &b, RankIndex::TOP).unwrap();
        let sys = RankSystem::new(fam, sched).unwrap();
        let seeds = [ic(&[10.0, -7.0]), ic(&[-3.0, 4.0])];
        let r = convergence_report(&sys, &seeds, 4000, &DetectOptions::for_period(2)).unwrap();
        assert!(r.all_detected());
        assert!(r.max_distance().unwrap() < 2e-9);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(r.distances[i][j], r.distances[j][i]);
            }
            assert_eq!(r.distances[i][i], Some(0.0));
        }
        assert_eq!(r.alpha, Some(0.6));
    }

    #[test]
    fn rate_tracks_slope_for_single_memory() {
        let sys = rank_sys(&["0.7*x + 1"], 1, 1);
        let seeds = [ic(&[100.0]), ic(&[-50.0])];
        let r = convergence_report(&sys, &seeds, 2000, &DetectOptions::for_period(1)).unwrap();
        let rate = r.rate.unwrap();
        assert!((rate - 0.7).abs() < 1e-3, "{rate}");
    }

    #[test]
    fn failures_are_flagged_not_fatal() {
        let sys = rank_sys(&["x + 1"], 1, 1);
        let seeds = [ic(&[0.0]), ic(&[5.0])];
        let r = convergence_report(&sys, &seeds, 1000, &DetectOptions::for_period(1)).unwrap();
        assert!(r.seeds.iter().all(|s| s.failure.is_some()));
        assert_eq!(r.distances[0][1], None);
        assert_eq!(r.max_distance(), None);

        let blowup = rank_sys(&["3*x"], 1, 1);
        let r = convergence_report(&blowup, &seeds, 1000, &DetectOptions::for_period(1)).unwrap();
        assert!(r.seeds[0].orbit.is_some());
        assert!(r.seeds[1].failure.as_deref().unwrap().contains("non-finite"));
    }

    #[test]
    fn aligned_and_free_distances() {
        let a = PeriodicOrbit {
            period: 2,
            phase_values: vec![1.0, 2.0],
            residual: 0.0,
            onset: None,
            anchor: 1,
        };
        let b = PeriodicOrbit { anchor: 2, ..a.clone() };
        assert_eq!(orbit_distance(&a, &b), 1.0);
        assert_eq!(orbit_distance_free(&a, &b), 0.0);
        assert_eq!(a.unrolled(4), [1.0, 2.0, 1.0, 2.0]);
    }
}
