//! Sampled Lipschitz estimates.
//!
//! Scalar maps get an upper-bound style estimate (exact slope when affine,
//! otherwise the largest central-difference derivative on a grid times a
//! safety factor). Block maps get a pair-sampled ratio, which is a lower
//! bound on the true sup-Lipschitz constant: useful to refute contraction,
//! never to prove it. Every estimate is only valid on its sampling window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BlockExpr, DomainInterval, ScalarExpr};
use crate::error::{Error, Result};
use crate::rank::sup_distance_unchecked;

pub const DEFAULT_GRID_POINTS: usize = 10_001;
pub const DEFAULT_PAIRS: usize = 100_000;
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzMethod {
    AnalyticAffine,
    DerivativeSampling,
    PairSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub bound: f64,
    pub method: LipschitzMethod,
    pub samples: usize,
    pub safety_factor: f64,
    /// Window the estimate was taken on. Analytic bounds hold on all of R.
    pub domain: Option<DomainInterval>,
}

impl LipschitzEstimate {
    pub fn exact(bound: f64) -> Self {
        LipschitzEstimate {
            bound,
            method: LipschitzMethod::AnalyticAffine,
            samples: 0,
            safety_factor: 1.0,
            domain: None,
        }
    }

    pub fn is_contractive(&self) -> bool {
        self.bound < 1.0
    }

    /// Combines per-function estimates into one dominating bound.
    pub fn combine<'a>(parts: impl IntoIterator<Item = &'a LipschitzEstimate>) -> Option<Self> {
        let mut acc: Option<LipschitzEstimate> = None;
        for p in parts {
            acc = Some(match acc {
                None => *p,
                Some(a) => LipschitzEstimate {
                    bound: a.bound.max(p.bound),
                    method: weaker(a.method, p.method),
                    samples: a.samples + p.samples,
                    safety_factor: a.safety_factor.max(p.safety_factor),
                    domain: a.domain.or(p.domain),
                },
            });
        }
        acc
    }

    /// Human-readable qualifier, e.g. `on [-10, 10]`.
    pub fn scope(&self) -> String {
        match self.domain {
            Some(d) => format!("on {d}"),
            None => "on R".to_string(),
        }
    }
}

fn weaker(a: LipschitzMethod, b: LipschitzMethod) -> LipschitzMethod {
    use LipschitzMethod::*;
    match (a, b) {
        (PairSampling, _) | (_, PairSampling) => PairSampling,
        (DerivativeSampling, _) | (_, DerivativeSampling) => DerivativeSampling,
        _ => AnalyticAffine,
    }
}

fn sampling_error(at: Vec<f64>, source: super::EvalError) -> Error {
    Error::Sampling { at, source }
}

/// Estimates the Lipschitz constant of `x -> f(x, n)` on `dom`.
pub fn estimate_scalar_lipschitz(
    f: &ScalarExpr,
    n: i64,
    dom: DomainInterval,
    grid_points: usize,
    safety_factor: f64,
) -> Result<LipschitzEstimate> {
    if grid_points < 2 {
        return Err(Error::arg("grid_points must be at least 2"));
    }
    if !(safety_factor >= 1.0) || !safety_factor.is_finite() {
        return Err(Error::arg("safety_factor must be finite and >= 1"));
    }
    if let Some((slope, _)) = f.affine_coefficients(n) {
        return Ok(LipschitzEstimate::exact(slope.abs()));
    }
    let step = dom.width() / (grid_points - 1) as f64;
    let mut best: f64 = 0.0;
    for j in 0..grid_points {
        let x = if j + 1 == grid_points {
            dom.hi()
        } else {
            dom.lo() + j as f64 * step
        };
        let h = 1e-6 * x.abs().max(1.0);
        let (a, b) = (x - h, x + h);
        let fa = f.eval(a, n).map_err(|e| sampling_error(vec![a], e))?;
        let fb = f.eval(b, n).map_err(|e| sampling_error(vec![b], e))?;
        best = best.max(((fb - fa) / (b - a)).abs());
    }
    Ok(LipschitzEstimate {
        bound: safety_factor * best,
        method: LipschitzMethod::DerivativeSampling,
        samples: grid_points,
        safety_factor,
        domain: Some(dom),
    })
}

/// Largest sampled `|G(x) - G(y)| / ||x - y||_inf` over `pairs` pairs in
/// `dom^M`. Half the pairs are independent uniform draws; the other half
/// differ by `±δ` in every coordinate (sign pattern random), which is where
/// linear maps attain their `||z||_1` constant.
pub fn estimate_block_lipschitz(
    g: &BlockExpr,
    dom: DomainInterval,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    if pairs == 0 {
        return Err(Error::arg("pairs must be at least 1"));
    }
    let m = g.arity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut best: f64 = 0.0;
    for i in 0..pairs {
        let dist = loop {
            if i % 2 == 0 {
                for v in x.iter_mut().chain(y.iter_mut()) {
                    *v = rng.gen_range(dom.lo()..=dom.hi());
                }
            } else {
                let delta = dom.width() * 0.5 * (1.0 - rng.gen::<f64>());
                let half = 0.5 * delta;
                for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
                    let c = rng.gen_range(dom.lo() + half..=dom.hi() - half);
                    let s = if rng.gen::<bool>() { half } else { -half };
                    *xi = c - s;
                    *yi = c + s;
                }
            }
            let d = sup_distance_unchecked(&x, &y);
            if d > 0.0 {
                break d;
            }
        };
        let gx = g.eval(&x).map_err(|e| sampling_error(x.clone(), e))?;
        let gy = g.eval(&y).map_err(|e| sampling_error(y.clone(), e))?;
        best = best.max((gx - gy).abs() / dist);
    }
    Ok(LipschitzEstimate {
        bound: best,
        method: LipschitzMethod::PairSampling,
        samples: pairs,
        safety_factor: 1.0,
        domain: Some(dom),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(src: &str) -> ScalarExpr {
        ScalarExpr::parse(src).unwrap()
    }

    fn dom(lo: f64, hi: f64) -> DomainInterval {
        DomainInterval::new(lo, hi).unwrap()
    }

    #[test]
    fn affine_is_exact_and_window_free() {
        for (d, g, s) in [(dom(-10.0, 10.0), 2, 1.0), (dom(0.0, 0.1), 10_001, 3.0)] {
            let est = estimate_scalar_lipschitz(&f("0.5*x+1"), 0, d, g, s).unwrap();
            assert_eq!(est.bound, 0.5);
            assert_eq!(est.method, LipschitzMethod::AnalyticAffine);
            assert_eq!(est.domain, None);
        }
    }

    #[test]
    fn tent_map_slope_two() {
        let est = estimate_scalar_lipschitz(
            &f("max(1-2*x, 2*x-1)"),
            0,
            dom(-2.0, 2.0),
            DEFAULT_GRID_POINTS,
            DEFAULT_SAFETY_FACTOR,
        )
        .unwrap();
        assert_eq!(est.method, LipschitzMethod::DerivativeSampling);
        assert!((est.bound - 2.0 * DEFAULT_SAFETY_FACTOR).abs() < 1e-6, "{est:?}");
        assert!(!est.is_contractive());
    }

    // Oracle: dense evaluation of the analytic derivative -2x exp(0.15 - x^2).
    fn dense_grid_max_derivative() -> f64 {
        let n = 2_000_001;
        (0..n)
            .map(|j| -5.0 + 10.0 * j as f64 / (n - 1) as f64)
            .map(|x: f64| (2.0 * x * (0.15 - x * x).exp()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn median_example_worst_phase_is_contractive() {
        let oracle = dense_grid_max_derivative();
        let analytic = 2f64.sqrt() * (0.15f64 - 0.5).exp();
        assert!((oracle - analytic).abs() < 1e-9);
        let est = estimate_scalar_lipschitz(
            &f("exp(0.15*1 - x^2)"),
            0,
            dom(-5.0, 5.0),
            DEFAULT_GRID_POINTS,
            1.0,
        )
        .unwrap();
        assert!(est.bound < 1.0, "{est:?}");
        assert!((est.bound - oracle).abs() < 1e-5, "{} vs {oracle}", est.bound);
    }

    #[test]
    fn sampling_reports_domain_errors() {
        let err = estimate_scalar_lipschitz(&f("ln(x)"), 0, dom(-1.0, 1.0), 11, 1.0).unwrap_err();
        assert!(err.to_string().contains("ln"), "{err}");
        assert!(estimate_scalar_lipschitz(&f("x"), 0, dom(0.0, 1.0), 1, 1.0).is_err());
        assert!(estimate_scalar_lipschitz(&f("x"), 0, dom(0.0, 1.0), 2, 0.5).is_err());
    }

    #[test]
    fn pair_sampling_linear_form() {
        let g = BlockExpr::parse("0.3*y1 + 0.3*y2", 2).unwrap();
        let est = estimate_block_lipschitz(&g, DomainInterval::default(), 20_000, 7).unwrap();
        assert_eq!(est.method, LipschitzMethod::PairSampling);
        assert!(est.bound <= 0.6 * (1.0 + 1e-12), "{}", est.bound);
        assert!(est.bound > 0.6 - 1e-9, "{}", est.bound);
    }

    #[test]
    fn pair_sampling_rank_and_projection() {
        let d = DomainInterval::default();
        let rank = BlockExpr::parse("rank(2; y1, y2, y3)", 3).unwrap();
        let est = estimate_block_lipschitz(&rank, d, 20_000, 1).unwrap();
        assert!(est.bound <= 1.0, "{}", est.bound);

        let proj = BlockExpr::parse("y1", 2).unwrap();
        let est = estimate_block_lipschitz(&proj, d, 2_000, 1).unwrap();
        assert_eq!(est.bound, 1.0);
    }

    #[test]
    fn pair_sampling_is_deterministic() {
        let g = BlockExpr::parse("0.4*sin(y1) + 0.2*y2", 2).unwrap();
        let d = DomainInterval::default();
        let a = estimate_block_lipschitz(&g, d, 5_000, 42).unwrap();
        let b = estimate_block_lipschitz(&g, d, 5_000, 42).unwrap();
        assert_eq!(a.bound.to_bits(), b.bound.to_bits());
    }

    #[test]
    fn pair_sampling_below_derivative_bound() {
        let d = DomainInterval::default();
        for (scalar, block) in [
            ("0.5*sin(x)", "0.5*sin(y1)"),
            ("exp(0.1 - x^2)", "exp(0.1 - y1^2)"),
            ("0.3*cos(2*x) + 0.1*x", "0.3*cos(2*y1) + 0.1*y1"),
            ("max(0.2*x, 0.7*x - 1)", "max(0.2*y1, 0.7*y1 - 1)"),
        ] {
            let upper = estimate_scalar_lipschitz(
                &f(scalar),
                0,
                d,
                DEFAULT_GRID_POINTS,
                DEFAULT_SAFETY_FACTOR,
            )
            .unwrap();
            let g = BlockExpr::parse(block, 1).unwrap();
            let lower = estimate_block_lipschitz(&g, d, 20_000, 3).unwrap();
            assert!(lower.bound <= upper.bound, "{scalar}: {} > {}", lower.bound, upper.bound);
        }
    }
}
