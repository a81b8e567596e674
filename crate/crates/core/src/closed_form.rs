//! Closed-form limits: the autonomous `k`-rank limit, the period-two orbit of
//! the two-term max recurrence with period-two forcing, and its explicit
//! power-law specialization.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{EvalError, ScalarExpr};
use crate::rank::{k_rank, RankIndex};
use crate::simulate::PeriodicOrbit;
use crate::system::{RankSchedule, ScalarFamily};

pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-14;
pub const DEFAULT_FIXED_POINT_MAX_ITER: usize = 100_000;
const TRACE_KEEP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    /// Stop when `|f(x) - x| <= tol * max(1, |x|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub start: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: DEFAULT_FIXED_POINT_TOL,
            max_iter: DEFAULT_FIXED_POINT_MAX_ITER,
            start: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarFixedPoint {
    pub r: f64,
    /// `|f(r) - r|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Damped iteration `x <- x + lambda (f(x) - x)`, halving `lambda` whenever the
/// residual grows. Once within `tol`, undamped steps continue while the
/// residual keeps shrinking.
pub fn fixed_point_of<F>(f: F, opts: &FixedPointOptions) -> Result<ScalarFixedPoint>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::arg("tol must be positive"));
    }
    if !opts.start.is_finite() {
        return Err(Error::NonFinite {
            index: 0,
            value: opts.start,
        });
    }
    let mut x = opts.start;
    let mut lambda = 1.0;
    let mut prev = f64::INFINITY;
    let mut trace = Vec::new();
    for it in 0..opts.max_iter {
        let fx = f(x)?;
        let r = (fx - x).abs();
        if r <= opts.tol * x.abs().max(1.0) {
            return polish(&f, x, r, it);
        }
        if r > prev && lambda > 1e-6 {
            lambda *= 0.5;
        }
        prev = r;
        if trace.len() == TRACE_KEEP {
            trace.remove(0);
        }
        trace.push(r);
        x += lambda * (fx - x);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: prev,
        trace,
    })
}

/// Plain steps from an accepted point while they still shrink the residual.
fn polish<F>(f: &F, mut x: f64, mut r: f64, mut iterations: usize) -> Result<ScalarFixedPoint>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    for _ in 0..64 {
        if r == 0.0 {
            break;
        }
        let next = f(x)?;
        let rn = (f(next)? - next).abs();
        iterations += 1;
        if rn >= r {
            break;
        }
        (x, r) = (next, rn);
    }
    Ok(ScalarFixedPoint {
        r: x,
        residual: r,
        iterations,
    })
}

/// Fixed point of `x -> f(x, n)`.
pub fn scalar_fixed_point(f: &ScalarExpr, n: i64, opts: &FixedPointOptions) -> Result<ScalarFixedPoint> {
    fixed_point_of(f.at(n), opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSet {
    pub r: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutonomousLimit {
    /// `k-rank{r_1, ..., r_M}`.
    pub value: f64,
    pub k: RankIndex,
    pub fixed_points: FixedPointSet,
}

/// Limit of `x_n = k-rank{ f_i(x_{n-i}) }` for an unforced family.
pub fn autonomous_rank_limit(
    fam: &ScalarFamily,
    k: RankIndex,
    opts: &FixedPointOptions,
) -> Result<AutonomousLimit> {
    if fam.period() != 1 {
        return Err(Error::Unsupported(format!(
            "autonomous limit needs P = 1, got P = {}",
            fam.period()
        )));
    }
    k.check(fam.memory())?;
    let mut set = FixedPointSet {
        r: Vec::with_capacity(fam.memory()),
        residuals: Vec::with_capacity(fam.memory()),
    };
    for i in 1..=fam.memory() {
        let fp = fixed_point_of(|x| fam.eval_phase(i, 1, x), opts)?;
        set.r.push(fp.r);
        set.residuals.push(fp.residual);
    }
    Ok(AutonomousLimit {
        value: k_rank(&set.r, k)?,
        k,
        fixed_points: set,
    })
}

/// Which row of the case table the orbit realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum P2M2Case {
    /// `(r_1, r_2)`
    Composite,
    /// `(r_3, r_4)`
    Separate,
    /// `(f_1(r_4), r_4)`
    EvenLifted,
    /// `(r_3, g_1(r_3))`
    OddLifted,
    /// `(f_1(r_4), g_1(r_3))`, which cannot occur for contractions.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P2M2Orbit {
    pub even: f64,
    pub odd: f64,
    /// `r_1 = fix(f_1 o g_1)`, `r_2 = g_1(r_1)`, `r_3 = fix(f_2)`, `r_4 = fix(g_2)`.
    pub r: [f64; 4],
    pub case: P2M2Case,
    /// Some comparison deciding the case was within `10 tol`; ties resolve
    /// toward `r_1` / `r_2`.
    pub ties: bool,
    pub orbit: PeriodicOrbit,
}

type Map<'a> = &'a dyn Fn(f64) -> Result<f64, EvalError>;

/// Period-two orbit of
/// `x_{2i} = max{f_1(x_{2i-1}), f_2(x_{2i-2})}`,
/// `x_{2i+1} = max{g_1(x_{2i}), g_2(x_{2i-1})}`.
pub fn p2m2_max_orbit(
    f1: Map<'_>,
    f2: Map<'_>,
    g1: Map<'_>,
    g2: Map<'_>,
    opts: &FixedPointOptions,
) -> Result<P2M2Orbit> {
    let r1 = fixed_point_of(|x| f1(g1(x)?), opts)?.r;
    let r2 = g1(r1)?;
    let r3 = fixed_point_of(f2, opts)?.r;
    let r4 = fixed_point_of(g2, opts)?.r;
    let f1r4 = f1(r4)?;
    let g1r3 = g1(r3)?;
    let even = f1(r2.max(r4))?.max(r3);
    let odd = g1(r1.max(r3))?.max(r4);

    let near = |a: f64, b: f64| (a - b).abs() <= 10.0 * opts.tol * a.abs().max(b.abs()).max(1.0);
    let ties = near(r1, r3) || near(r2, r4) || near(f1r4, r3) || near(g1r3, r4);
    let (left13, left24) = (r1 >= r3, r2 >= r4);
    let even_lifted = !left24 && f1r4 > r3;
    let odd_lifted = !left13 && g1r3 > r4;
    let case = match (left13, left24) {
        (true, true) => P2M2Case::Composite,
        _ if even_lifted && odd_lifted => P2M2Case::Excluded,
        _ if even_lifted => P2M2Case::EvenLifted,
        _ if odd_lifted => P2M2Case::OddLifted,
        _ => P2M2Case::Separate,
    };

    let orbit = if near(even, odd) {
        PeriodicOrbit {
            period: 1,
            phase_values: vec![0.5 * (even + odd)],
            residual: (even - odd).abs(),
            onset: None,
            anchor: 1,
        }
    } else {
        PeriodicOrbit {
            period: 2,
            phase_values: vec![odd, even],
            residual: 0.0,
            onset: None,
            anchor: 1,
        }
    };
    Ok(P2M2Orbit {
        even,
        odd,
        r: [r1, r2, r3, r4],
        case,
        ties,
        orbit,
    })
}

/// Reads `f_1, f_2` from the even phase (2) and `g_1, g_2` from the odd
/// phase (1) of a max family with `M = P = 2`.
pub fn p2m2_from_family(
    fam: &ScalarFamily,
    sched: &RankSchedule,
    opts: &FixedPointOptions,
) -> Result<P2M2Orbit> {
    if fam.memory() != 2 || fam.period() != 2 {
        return Err(Error::Unsupported(format!(
            "period-two closed form needs M = P = 2, got M = {}, P = {}",
            fam.memory(),
            fam.period()
        )));
    }
    if sched.ks().iter().any(|k| *k != RankIndex::TOP) {
        return Err(Error::Unsupported(
            "period-two closed form covers the max (k = 1) only".into(),
        ));
    }
    let f1 = |x| fam.eval_phase(1, 2, x);
    let f2 = |x| fam.eval_phase(2, 2, x);
    let g1 = |x| fam.eval_phase(1, 1, x);
    let g2 = |x| fam.eval_phase(2, 1, x);
    p2m2_max_orbit(&f1, &f2, &g1, &g2, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLimit {
    pub even: f64,
    pub odd: f64,
    /// The three terms of each phase in the order
    /// `A12 A21^(a1/(1-a2))`, `A12 A11^(a1/(1-a1^2)) A12^(a1^2/(1-a1^2))`,
    /// `A22^(1/(1-a2))` (and the mirrored terms for the odd phase).
    pub even_terms: [f64; 3],
    pub odd_terms: [f64; 3],
    /// `max` of the three terms. Equals `even`/`odd` when `a1 >= 0`.
    pub literal_even: f64,
    pub literal_odd: f64,
    /// `r_1..r_4` of the log system.
    pub log_r: [f64; 4],
}

/// Explicit limit of `x_n = max{A[ph][1] x_{n-1}^a1, A[ph][2] x_{n-2}^a2}` for
/// `P = M = 2`, `A` given as rows per phase (odd `n` is phase 1).
///
/// With `a1 < 0` the maps `f_1, g_1` decrease, so `f_1(max{r_2, r_4})` is the
/// smaller of the first two terms and the result is `max{min{t1, t2}, t3}`.
pub fn power_max_p2m2_limit(coeffs: &[Vec<f64>], alphas: [f64; 2]) -> Result<PowerLimit> {
    if coeffs.len() != 2 || coeffs.iter().any(|r| r.len() != 2) {
        return Err(Error::Unsupported("power-law closed form needs a 2 x 2 matrix".into()));
    }
    if let Some(v) = coeffs.iter().flatten().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::arg(format!("coefficients must be positive, found {v}")));
    }
    if let Some(v) = alphas.iter().find(|v| !(v.abs() < 1.0)) {
        return Err(Error::arg(format!("exponents must lie in (-1, 1), found {v}")));
    }
    // a(j, k): memory slot j, phase k
    let a = |j: usize, k: usize| coeffs[k - 1][j - 1];
    let [a1, a2] = alphas;
    let e1 = a1 / (1.0 - a2);
    let e2 = a1 / (1.0 - a1 * a1);
    let e3 = a1 * a1 / (1.0 - a1 * a1);
    let e4 = 1.0 / (1.0 - a2);
    let even_terms = [
        a(1, 2) * a(2, 1).powf(e1),
        a(1, 2) * a(1, 1).powf(e2) * a(1, 2).powf(e3),
        a(2, 2).powf(e4),
    ];
    let odd_terms = [
        a(1, 1) * a(2, 2).powf(e1),
        a(1, 1) * a(1, 2).powf(e2) * a(1, 1).powf(e3),
        a(2, 1).powf(e4),
    ];
    let combine = |t: [f64; 3]| {
        if a1 >= 0.0 {
            t[0].max(t[1]).max(t[2])
        } else {
            t[0].min(t[1]).max(t[2])
        }
    };
    let ln = |j, k| a(j, k).ln();
    let d = 1.0 - a1 * a1;
    let log_r = [
        (ln(1, 2) + a1 * ln(1, 1)) / d,
        (ln(1, 1) + a1 * ln(1, 2)) / d,
        ln(2, 2) / (1.0 - a2),
        ln(2, 1) / (1.0 - a2),
    ];
    Ok(PowerLimit {
        even: combine(even_terms),
        odd: combine(odd_terms),
        even_terms,
        odd_terms,
        literal_even: even_terms[0].max(even_terms[1]).max(even_terms[2]),
        literal_odd: odd_terms[0].max(odd_terms[1]).max(odd_terms[2]),
        log_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{affine_matrix_system, power_max_system, PowerTransform};

    fn f(src: &str) -> ScalarExpr {
        ScalarExpr::parse(src).unwrap()
    }

    fn opts() -> FixedPointOptions {
        FixedPointOptions::default()
    }

    #[test]
    fn affine_fixed_points() {
        assert!((scalar_fixed_point(&f("0.5*x+1"), 1, &opts()).unwrap().r - 2.0).abs() < 1e-14);
        let (a, b) = (-0.8, 3.0);
        let r = scalar_fixed_point(&f(&format!("{a}*x + {b}")), 1, &opts()).unwrap();
        assert!((r.r - b / (1.0 - a)).abs() < 1e-13);
    }

    // Oracle: bisection on exp(0.1 - x^2) - x over [0, 1].
    #[test]
    fn exp_fixed_point_matches_bisection() {
        let g = |x: f64| (0.1 - x * x).exp() - x;
        let (mut lo, mut hi) = (0.0, 1.0);
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let fp = scalar_fixed_point(&f("exp(0.1 - x^2)"), 1, &opts()).unwrap();
        assert!(fp.r > 0.0 && fp.r < 1.0);
        assert!(fp.residual <= 1e-14);
        assert!((fp.r - lo).abs() < 1e-13, "{} vs {lo}", fp.r);
    }

    #[test]
    fn expanding_map_does_not_converge() {
        let o = FixedPointOptions {
            max_iter: 200,
            start: 1.0,
            ..opts()
        };
        assert!(matches!(
            scalar_fixed_point(&f("2*x + 1"), 1, &o),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn damping_rescues_oscillation() {
        // x -> -1.5 x + 5 has fixed point 2 but undamped iteration diverges
        let fp = fixed_point_of(|x| Ok(-1.5 * x + 5.0), &opts()).unwrap();
        assert!((fp.r - 2.0).abs() < 1e-13);
    }

    #[test]
    fn autonomous_limits() {
        let (fam, _) = affine_matrix_system(
            &[vec![0.5, 0.5, 0.5]],
            &[vec![1.0, 2.0, 3.0]],
            RankIndex::TOP,
        )
        .unwrap();
        let two = RankIndex::new(2).unwrap();
        let lim = autonomous_rank_limit(&fam, two, &opts()).unwrap();
        assert!((lim.value - 4.0).abs() < 1e-13);
        let top = autonomous_rank_limit(&fam, RankIndex::TOP, &opts()).unwrap();
        assert!((top.value - 6.0).abs() < 1e-13);

        let (forced, _) = affine_matrix_system(&[vec![0.5], vec![0.5]], &[vec![1.0], vec![2.0]], RankIndex::TOP)
            .unwrap();
        assert!(matches!(
            autonomous_rank_limit(&forced, RankIndex::TOP, &opts()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn p2m2_autonomous_in_disguise() {
        let f1 = |x: f64| Ok(0.5 * x + 1.0);
        let f2 = |x: f64| Ok(-0.4 * x + 3.0);
        let o = p2m2_max_orbit(&f1, &f2, &f1, &f2, &opts()).unwrap();
        let (r1, r3): (f64, f64) = (2.0, 3.0 / 1.4);
        assert!((o.even - r1.max(r3)).abs() < 1e-13);
        assert!((o.odd - o.even).abs() < 1e-13);
        assert_eq!(o.orbit.period, 1);
    }

    #[test]
    fn p2m2_odd_lifted_row() {
        // f2 = 0.5 x + 5 gives r3 = 10; g1 = 0.5 x + 2 gives g1(r3) = 7 > r4 = 0
        let f1 = |x: f64| Ok(0.5 * x);
        let f2 = |x: f64| Ok(0.5 * x + 5.0);
        let g1 = |x: f64| Ok(0.5 * x + 2.0);
        let g2 = |x: f64| Ok(0.5 * x);
        let o = p2m2_max_orbit(&f1, &f2, &g1, &g2, &opts()).unwrap();
        assert!(o.r[2] > o.r[0]);
        assert_eq!(o.case, P2M2Case::OddLifted);
        assert!((o.even - 10.0).abs() < 1e-12);
        assert!((o.odd - 7.0).abs() < 1e-12);
        assert_eq!(o.orbit.value_at(2), o.even);
        assert_eq!(o.orbit.value_at(1), o.odd);
        assert!(!o.ties);
    }

    #[test]
    fn p2m2_family_mapping_and_shape_errors() {
        let a = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let b = vec![vec![2.0, 0.0], vec![0.0, 5.0]];
        let (fam, sched) = affine_matrix_system(&a, &b, RankIndex::TOP).unwrap();
        // odd phase: g1 = 0.5x + 2, g2 = 0.5x; even phase: f1 = 0.5x, f2 = 0.5x + 5
        let o = p2m2_from_family(&fam, &sched, &opts()).unwrap();
        assert_eq!(o.case, P2M2Case::OddLifted);

        let (fam3, sched3) = affine_matrix_system(&vec![vec![0.5; 3]; 2], &vec![vec![0.0; 3]; 2], RankIndex::TOP)
            .unwrap();
        assert!(matches!(p2m2_from_family(&fam3, &sched3, &opts()), Err(Error::Unsupported(_))));
        let (_, sched2) = affine_matrix_system(&a, &b, RankIndex::new(2).unwrap()).unwrap();
        assert!(matches!(p2m2_from_family(&fam, &sched2, &opts()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn power_limit_zero_exponents() {
        let c = vec![vec![1.5, 0.7], vec![2.5, 3.5]];
        let l = power_max_p2m2_limit(&c, [0.0, 0.0]).unwrap();
        // A[j][k] = c[k][j]: even = max{A12, A22} = max{2.5, 3.5}
        assert_eq!(l.even, 3.5);
        assert_eq!(l.odd, 1.5);
    }

    #[test]
    fn power_limit_equal_columns() {
        let (a1c, a2c, al1, al2) = (1.7, 0.6, 0.4, -0.5);
        let c = vec![vec![a1c, a2c], vec![a1c, a2c]];
        let l = power_max_p2m2_limit(&c, [al1, al2]).unwrap();
        let want = a1c.powf(1.0 / (1.0 - al1)).max(a2c.powf(1.0 / (1.0 - al2)));
        assert!((l.even / want - 1.0).abs() < 1e-12);
        assert!((l.odd / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_limit_agrees_with_log_orbit() {
        for (c, al) in [
            (vec![vec![1.1, 2.0], vec![0.7, 1.3]], [0.5, -0.3]),
            (vec![vec![0.3, 1.9], vec![2.2, 0.5]], [-0.6, 0.4]),
            (vec![vec![4.0, 0.2], vec![0.9, 1.2]], [-0.85, -0.7]),
        ] {
            let (fam, sched) = power_max_system(&c, &al, PowerTransform::Log).unwrap();
            let o = p2m2_from_family(&fam, &sched, &opts()).unwrap();
            let l = power_max_p2m2_limit(&c, al).unwrap();
            assert!((l.even / o.even.exp() - 1.0).abs() < 1e-12, "{c:?} {al:?}");
            assert!((l.odd / o.odd.exp() - 1.0).abs() < 1e-12, "{c:?} {al:?}");
            for (x, y) in l.log_r.iter().zip(&o.r) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn power_limit_rejects_bad_input() {
        assert!(power_max_p2m2_limit(&[vec![1.0, 1.0]], [0.1, 0.1]).is_err());
        assert!(power_max_p2m2_limit(&[vec![1.0, -1.0], vec![1.0, 1.0]], [0.1, 0.1]).is_err());
        assert!(power_max_p2m2_limit(&[vec![1.0, 1.0], vec![1.0, 1.0]], [1.0, 0.1]).is_err());
    }
}
