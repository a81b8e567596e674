//! The block map `F: R^s -> R^s`, `s = P M`, advancing a trajectory by one
//! block of `s` consecutive terms, and its fixed point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rank::sup_distance_unchecked;
use crate::simulate::PeriodicOrbit;
use crate::system::{phase_of, Recurrence};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Extra iterations allowed after reaching `tol` while the residual still drops.
const POLISH_LIMIT: usize = 64;

pub struct BlockMap<'a, R: Recurrence + ?Sized> {
    system: &'a R,
    s: usize,
}

impl<'a, R: Recurrence + ?Sized> BlockMap<'a, R> {
    pub fn new(system: &'a R) -> Self {
        BlockMap {
            s: system.block_dim(),
            system,
        }
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn system(&self) -> &'a R {
        self.system
    }

    /// `(F_1(y), ..., F_s(y))` where `F_k` applies `G_k` to
    /// `F_{k-1}, ..., F_1, y_s, ..., y_k`, truncated to the first `M`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.s {
            return Err(Error::arg(format!(
                "block vector has length {}, expected {}",
                y.len(),
                self.s
            )));
        }
        if let Some((index, &value)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let mut out = vec![0.0; self.s];
        let mut work = Workspace::new(self.s, self.system.memory());
        self.apply_into(y, &mut out, &mut work)?;
        Ok(out)
    }

    fn apply_into(&self, y: &[f64], out: &mut [f64], work: &mut Workspace) -> Result<()> {
        let (s, m, p) = (self.s, self.system.memory(), self.system.period());
        // z = (y_1..y_s, F_1..F_s); argument j of F_k is z[s + k - 1 - j]
        work.z[..s].copy_from_slice(y);
        for k in 1..=s {
            for j in 1..=m {
                work.args[j - 1] = work.z[s + k - 1 - j];
            }
            let v = self
                .system
                .step(phase_of(k as i64, p), &work.args)
                .map_err(|source| Error::BlockEval { k, source })?;
            work.z[s + k - 1] = v;
        }
        out.copy_from_slice(&work.z[s..]);
        Ok(())
    }
}

struct Workspace {
    z: Vec<f64>,
    args: Vec<f64>,
}

impl Workspace {
    fn new(s: usize, m: usize) -> Self {
        Workspace {
            z: vec![0.0; 2 * s],
            args: vec![0.0; m],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Run even when the system is not certified contractive.
    pub force: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_SOLVE_TOL,
            max_iter: DEFAULT_MAX_ITER,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub x_star: Vec<f64>,
    /// Applications of the block map.
    pub iterations: usize,
    /// `||F(x*) - x*||_inf` for the returned `x*`.
    pub residual: f64,
    /// Ratio of the last two residuals before `tol` was reached.
    pub contraction_ratio_estimate: f64,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Picard iteration `y <- F(y)` from `seed` until the step is below `tol`.
/// A few further steps are taken while they keep shrinking the residual, and
/// the point with the smallest measured residual is returned.
pub fn solve_fixed_point<R: Recurrence + ?Sized>(
    map: &BlockMap<'_, R>,
    seed: &[f64],
    opts: &SolveOptions,
) -> Result<FixedPointResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::arg("tol must be positive"));
    }
    let bound = map.system.lipschitz_bound();
    if !opts.force && !bound.is_some_and(|b| b.is_contractive()) {
        return Err(Error::NotContractive {
            bound: bound.map(|b| b.bound),
        });
    }
    let s = map.dim();
    let mut y = map.apply(seed)?;
    let mut fy = vec![0.0; s];
    let mut work = Workspace::new(s, map.system.memory());
    let mut trace = Vec::new();
    let mut iterations = 1;
    let mut prev = sup_distance_unchecked(&y, seed);
    trace.push(prev);
    let mut ratio = 0.0;
    if prev >= opts.tol {
        loop {
            if iterations >= opts.max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: prev,
                    trace,
                });
            }
            map.apply_into(&y, &mut fy, &mut work)?;
            iterations += 1;
            let r = sup_distance_unchecked(&fy, &y);
            trace.push(r);
            ratio = if prev > 0.0 { r / prev } else { 0.0 };
            std::mem::swap(&mut y, &mut fy);
            prev = r;
            if r < opts.tol {
                break;
            }
        }
    }
    // y = F(last); measure its own residual and polish
    let mut best = (y.clone(), f64::INFINITY);
    for _ in 0..=POLISH_LIMIT {
        map.apply_into(&y, &mut fy, &mut work)?;
        iterations += 1;
        let r = sup_distance_unchecked(&fy, &y);
        if r >= best.1 {
            break;
        }
        best = (y.clone(), r);
        if r == 0.0 {
            break;
        }
        std::mem::swap(&mut y, &mut fy);
    }
    Ok(FixedPointResult {
        x_star: best.0,
        iterations,
        residual: best.1,
        contraction_ratio_estimate: ratio,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftReport {
    pub passed: bool,
    pub max_violation: f64,
    /// 1-based `j` maximizing `|x_{j+P} - x_j|`.
    pub worst_index: Option<usize>,
}

/// Checks `|x*_{j+P} - x*_j| <= tol` for every valid `j`.
pub fn shift_commutation_check(x_star: &[f64], period: usize, tol: f64) -> ShiftReport {
    let mut worst = (0.0f64, None);
    for j in 0..x_star.len().saturating_sub(period) {
        let v = (x_star[j + period] - x_star[j]).abs();
        if v > worst.0 || (v.is_nan() && worst.1.is_none()) {
            worst = (v, Some(j + 1));
        }
    }
    ShiftReport {
        passed: worst.0 <= tol,
        max_violation: worst.0,
        worst_index: worst.1,
    }
}

/// The `P` phase values of a `P`-periodic block fixed point, collapsed to the
/// prime period at `10 tol`. Entry `j` of `x_star` sits at absolute index `j`
/// modulo `s`, so `anchor = 1`.
pub fn extract_periodic_orbit(x_star: &[f64], period: usize, tol: f64) -> Result<PeriodicOrbit> {
    if period == 0 || x_star.is_empty() || x_star.len() % period != 0 {
        return Err(Error::arg(format!(
            "block of length {} is not a multiple of P = {period}",
            x_star.len()
        )));
    }
    let shift = shift_commutation_check(x_star, period, tol);
    if !shift.passed {
        return Err(Error::Precondition(format!(
            "x* is not {period}-periodic within {tol:e} (max violation {:e} at j = {})",
            shift.max_violation,
            shift.worst_index.unwrap_or(0)
        )));
    }
    let (means, residual) = fold_phases(x_star, period);
    let collapse = 10.0 * tol;
    let prime = (1..=period)
        .filter(|d| period % d == 0)
        .find(|&d| (0..period - d).all(|j| (means[j + d] - means[j]).abs() <= collapse))
        .unwrap_or(period);
    let (phase_values, spread) = fold_phases(&means, prime);
    Ok(PeriodicOrbit {
        period: prime,
        phase_values,
        residual: residual.max(spread),
        onset: None,
        anchor: 1,
    })
}

/// Means of `v[q], v[q + p], ...` for each `q < p`, and the largest deviation
/// from them.
fn fold_phases(v: &[f64], p: usize) -> (Vec<f64>, f64) {
    let reps = (v.len() / p) as f64;
    let means: Vec<f64> = (0..p)
        .map(|q| v.iter().skip(q).step_by(p).sum::<f64>() / reps)
        .collect();
    let spread = v
        .iter()
        .enumerate()
        .map(|(j, x)| (x - means[j % p]).abs())
        .fold(0.0, f64::max);
    (means, spread)
}
