//! Executable representations of forced recurrences.
//!
//! Phases are 1-based: step `n` uses phase `1 + ((n - 1) mod P)`. Update
//! functions receive the previous states most recent first, `y[0] = x_{n-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{
    estimate_block_lipschitz, estimate_scalar_lipschitz, BinOp, BlockExpr, DomainInterval, Func,
    EvalError, LipschitzEstimate, Node, ScalarExpr, Var,
};
use crate::rank::{k_rank_in_place, RankIndex};

/// `1 + ((n - 1) mod p)`, valid for any integer `n`.
pub fn phase_of(n: i64, period: usize) -> usize {
    assert!(period > 0, "period must be positive");
    1 + (n - 1).rem_euclid(period as i64) as usize
}

/// A recurrence `x_n = G_n(x_{n-1}, ..., x_{n-M})` with `G_{n+P} = G_n`.
pub trait Recurrence {
    fn memory(&self) -> usize;
    fn period(&self) -> usize;
    /// `G_phase` applied to `recent_first[..M]`.
    fn step(&self, phase: usize, recent_first: &[f64]) -> Result<f64, EvalError>;
    fn lipschitz_bound(&self) -> Option<&LipschitzEstimate>;

    fn block_dim(&self) -> usize {
        self.memory() * self.period()
    }
}

/// The grid `f_i(., phase)` for `i in 1..=M`, `phase in 1..=P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFamily {
    memory: usize,
    period: usize,
    // memory-major: entry (i, p) lives at (i - 1) * period + (p - 1)
    grid: Vec<ScalarExpr>,
    alpha_bound: Option<LipschitzEstimate>,
}

impl ScalarFamily {
    /// `grid[i][p]` is `f_{i+1}` at phase `p + 1`. Each entry is evaluated
    /// with `n` bound to its phase, so `n` may appear but only its residue
    /// matters.
    pub fn new(grid: Vec<Vec<ScalarExpr>>) -> Result<Self> {
        let memory = grid.len();
        if memory == 0 {
            return Err(Error::arg("family needs at least one function"));
        }
        let period = grid[0].len();
        if period == 0 {
            return Err(Error::arg("family needs at least one phase"));
        }
        if let Some(row) = grid.iter().position(|r| r.len() != period) {
            return Err(Error::arg(format!(
                "grid row {} has {} phases, expected {period}",
                row + 1,
                grid[row].len()
            )));
        }
        Ok(ScalarFamily {
            memory,
            period,
            grid: grid.into_iter().flatten().collect(),
            alpha_bound: None,
        })
    }

    /// One function `f_i(x, n)` per memory slot, repeated across phases.
    pub fn from_functions(fs: Vec<ScalarExpr>, period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::arg("period must be at least 1"));
        }
        ScalarFamily::new(fs.into_iter().map(|f| vec![f; period]).collect())
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn entry(&self, i: usize, phase: usize) -> &ScalarExpr {
        assert!((1..=self.memory).contains(&i) && (1..=self.period).contains(&phase));
        &self.grid[(i - 1) * self.period + (phase - 1)]
    }

    /// `f_i(x, n)` with `n` reduced to its phase.
    pub fn eval(&self, i: usize, x: f64, n: i64) -> Result<f64, EvalError> {
        self.eval_phase(i, phase_of(n, self.period), x)
    }

    pub fn eval_phase(&self, i: usize, phase: usize, x: f64) -> Result<f64, EvalError> {
        self.entry(i, phase).eval(x, phase as i64)
    }

    pub fn alpha_bound(&self) -> Option<&LipschitzEstimate> {
        self.alpha_bound.as_ref()
    }

    pub fn with_alpha_bound(mut self, est: LipschitzEstimate) -> Self {
        self.alpha_bound = Some(est);
        self
    }

    /// True when the attached bound fails to certify contraction.
    pub fn is_flagged(&self) -> bool {
        self.alpha_bound.is_some_and(|a| !a.is_contractive())
    }

    /// Per-entry estimates, memory-major, and their maximum. The maximum is
    /// stored as the family's bound.
    pub fn certify(
        &mut self,
        dom: DomainInterval,
        grid_points: usize,
        safety_factor: f64,
    ) -> Result<Vec<LipschitzEstimate>> {
        let mut parts = Vec::with_capacity(self.grid.len());
        for i in 1..=self.memory {
            for p in 1..=self.period {
                let f = self.entry(i, p);
                parts.push(estimate_scalar_lipschitz(
                    f,
                    p as i64,
                    dom,
                    grid_points,
                    safety_factor,
                )?);
            }
        }
        self.alpha_bound = LipschitzEstimate::combine(&parts);
        Ok(parts)
    }
}

/// Rank used at each phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankSchedule {
    ks: Vec<RankIndex>,
}

impl RankSchedule {
    pub fn new(ks: Vec<RankIndex>) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::arg("schedule needs at least one phase"));
        }
        Ok(RankSchedule { ks })
    }

    pub fn constant(k: RankIndex, period: usize) -> Result<Self> {
        RankSchedule::new(vec![k; period])
    }

    pub fn period(&self) -> usize {
        self.ks.len()
    }

    pub fn k_at(&self, phase: usize) -> RankIndex {
        self.ks[phase - 1]
    }

    pub fn ks(&self) -> &[RankIndex] {
        &self.ks
    }

    /// Re-indexes a schedule written for the convention
    /// `phase' = 1 + ((n - 1 + offset) mod P)`.
    pub fn with_offset(&self, offset: i64) -> Self {
        let p = self.ks.len();
        RankSchedule {
            ks: (1..=p as i64)
                .map(|ph| self.ks[phase_of(ph + offset, p) - 1])
                .collect(),
        }
    }

    pub fn check(&self, memory: usize) -> Result<()> {
        for (p, k) in self.ks.iter().enumerate() {
            if k.get() > memory {
                return Err(Error::arg(format!(
                    "rank {} at phase {} exceeds memory length {memory}",
                    k.get(),
                    p + 1
                )));
            }
        }
        Ok(())
    }
}

/// `x_n = k_{phase}-rank{ f_i(x_{n-i}, n) }`, evaluated directly.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSystem {
    family: ScalarFamily,
    schedule: RankSchedule,
}

impl RankSystem {
    pub fn new(family: ScalarFamily, schedule: RankSchedule) -> Result<Self> {
        if schedule.period() != family.period() {
            return Err(Error::arg(format!(
                "schedule has {} phases but family has {}",
                schedule.period(),
                family.period()
            )));
        }
        schedule.check(family.memory())?;
        Ok(RankSystem { family, schedule })
    }

    pub fn family(&self) -> &ScalarFamily {
        &self.family
    }

    pub fn schedule(&self) -> &RankSchedule {
        &self.schedule
    }

    pub fn to_block(&self) -> BlockSystem {
        let m = self.family.memory();
        let g = (1..=self.family.period())
            .map(|p| {
                let args = (1..=m)
                    .map(|i| self.family.entry(i, p).to_block_node(i, p as i64))
                    .collect();
                BlockExpr::from_node(Node::Rank(self.schedule.k_at(p).get(), args), m)
                    .expect("substituted family only references y1..yM")
            })
            .collect();
        BlockSystem {
            memory: m,
            g,
            l_bound: self.family.alpha_bound,
        }
    }
}

/// `G[phase](y) = k_phase-rank{ f_i(y_i, phase) }`, with the family bound
/// carried over since the rank is sup-non-expansive.
pub fn rank_family_to_block(fam: &ScalarFamily, sched: &RankSchedule) -> Result<BlockSystem> {
    Ok(RankSystem::new(fam.clone(), sched.clone())?.to_block())
}

impl Recurrence for RankSystem {
    fn memory(&self) -> usize {
        self.family.memory
    }

    fn period(&self) -> usize {
        self.family.period
    }

    fn step(&self, phase: usize, recent_first: &[f64]) -> Result<f64, EvalError> {
        let m = self.family.memory;
        let mut vals = smallvec::SmallVec::<[f64; 8]>::with_capacity(m);
        for i in 1..=m {
            vals.push(self.family.eval_phase(i, phase, recent_first[i - 1])?);
        }
        Ok(k_rank_in_place(&mut vals, self.schedule.k_at(phase).get()))
    }

    fn lipschitz_bound(&self) -> Option<&LipschitzEstimate> {
        self.family.alpha_bound()
    }
}

/// `P` updates `G_phase: R^M -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    memory: usize,
    g: Vec<BlockExpr>,
    l_bound: Option<LipschitzEstimate>,
}

impl BlockSystem {
    pub fn new(memory: usize, g: Vec<BlockExpr>) -> Result<Self> {
        if memory == 0 {
            return Err(Error::arg("memory length must be at least 1"));
        }
        if g.is_empty() {
            return Err(Error::arg("block system needs at least one phase"));
        }
        if let Some(p) = g.iter().position(|e| e.arity() != memory) {
            return Err(Error::arg(format!(
                "G_{} has arity {}, expected {memory}",
                p + 1,
                g[p].arity()
            )));
        }
        Ok(BlockSystem {
            memory,
            g,
            l_bound: None,
        })
    }

    pub fn g(&self) -> &[BlockExpr] {
        &self.g
    }

    pub fn with_l_bound(mut self, est: LipschitzEstimate) -> Self {
        self.l_bound = Some(est);
        self
    }

    pub fn l_bound(&self) -> Option<&LipschitzEstimate> {
        self.l_bound.as_ref()
    }

    pub fn is_flagged(&self) -> bool {
        self.l_bound.is_some_and(|l| !l.is_contractive())
    }

    pub fn is_certified(&self) -> bool {
        self.l_bound.is_some_and(|l| l.is_contractive())
    }

    /// Pair-sampled estimate per phase; the maximum becomes the system bound.
    /// Sampling can only refute contraction, so a value below 1 is evidence,
    /// not proof.
    pub fn certify(
        &mut self,
        dom: DomainInterval,
        pairs: usize,
        seed: u64,
    ) -> Result<Vec<LipschitzEstimate>> {
        let parts = self
            .g
            .iter()
            .enumerate()
            .map(|(p, g)| estimate_block_lipschitz(g, dom, pairs, seed.wrapping_add(p as u64)))
            .collect::<Result<Vec<_>>>()?;
        self.l_bound = LipschitzEstimate::combine(&parts);
        Ok(parts)
    }
}

impl Recurrence for BlockSystem {
    fn memory(&self) -> usize {
        self.memory
    }

    fn period(&self) -> usize {
        self.g.len()
    }

    fn step(&self, phase: usize, recent_first: &[f64]) -> Result<f64, EvalError> {
        self.g[phase - 1].eval(recent_first)
    }

    fn lipschitz_bound(&self) -> Option<&LipschitzEstimate> {
        self.l_bound.as_ref()
    }
}

/// `x_1, ..., x_M` for a trajectory, or a full block of length `s` for the
/// block map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InitialCondition {
    values: Vec<f64>,
}

impl InitialCondition {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("initial condition is empty"));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(InitialCondition { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<Vec<f64>> for InitialCondition {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        InitialCondition::new(v)
    }
}

impl From<InitialCondition> for Vec<f64> {
    fn from(c: InitialCondition) -> Vec<f64> {
        c.values
    }
}

fn shape(rows: &[Vec<f64>], what: &str) -> Result<(usize, usize)> {
    let p = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if p == 0 || m == 0 {
        return Err(Error::arg(format!("{what} must be a non-empty P x M matrix")));
    }
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::arg(format!("{what} rows have different lengths")));
    }
    if let Some((index, &value)) = rows.iter().flatten().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok((p, m))
}

fn affine_node(slope: f64, intercept: f64) -> Node {
    Node::add(Node::mul(Node::num(slope), Node::var(Var::X)), Node::num(intercept))
}

fn transpose_family(p: usize, m: usize, entry: impl Fn(usize, usize) -> Node) -> Result<ScalarFamily> {
    let grid = (0..m)
        .map(|i| {
            (0..p)
                .map(|ph| ScalarExpr::from_node(entry(ph, i)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ScalarFamily::new(grid)
}

/// `f_i(x, phase) = A[phase][i] x + B[phase][i]` with `A`, `B` given as
/// `P x M` matrices (row = phase). The bound is exact; coefficients with
/// `|A| >= 1` are allowed and leave the family flagged.
pub fn affine_matrix_system(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    k: RankIndex,
) -> Result<(ScalarFamily, RankSchedule)> {
    let (p, m) = shape(a, "A")?;
    if shape(b, "B")? != (p, m) {
        return Err(Error::arg("A and B must have the same shape"));
    }
    k.check(m)?;
    let alpha = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let fam = transpose_family(p, m, |ph, i| affine_node(a[ph][i], b[ph][i]))?
        .with_alpha_bound(LipschitzEstimate::exact(alpha));
    Ok((fam, RankSchedule::constant(k, p)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerTransform {
    /// `y -> ln A + alpha y`, the recurrence for `y_n = ln x_n`.
    Log,
    /// `x -> A x^alpha` on `x > 0`.
    Raw,
}

/// `x_n = max_i A[phase][i] x_{n-i}^{alpha_i}` with `A` given `P x M`.
/// The log form carries the exact bound `max |alpha_i|`; the raw form is not
/// a sup-contraction on its own and carries no bound.
pub fn power_max_system(
    a: &[Vec<f64>],
    alphas: &[f64],
    transform: PowerTransform,
) -> Result<(ScalarFamily, RankSchedule)> {
    let (p, m) = shape(a, "A")?;
    if alphas.len() != m {
        return Err(Error::arg(format!(
            "expected {m} exponents, got {}",
            alphas.len()
        )));
    }
    if let Some(v) = a.iter().flatten().find(|v| **v <= 0.0) {
        return Err(Error::arg(format!("coefficients must be positive, found {v}")));
    }
    if let Some(v) = alphas.iter().find(|v| !(v.abs() < 1.0)) {
        return Err(Error::arg(format!("exponents must lie in (-1, 1), found {v}")));
    }
    let fam = match transform {
        PowerTransform::Log => {
            let alpha = alphas.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            transpose_family(p, m, |ph, i| affine_node(alphas[i], a[ph][i].ln()))?
                .with_alpha_bound(LipschitzEstimate::exact(alpha))
        }
        PowerTransform::Raw => transpose_family(p, m, |ph, i| {
            let log_x = Node::call(Func::Ln, vec![Node::var(Var::X)]);
            let power = Node::call(
                Func::Exp,
                vec![Node::mul(Node::num(alphas[i]), log_x)],
            );
            Node::bin(BinOp::Mul, Node::num(a[ph][i]), power)
        })?,
    };
    Ok((fam, RankSchedule::constant(RankIndex::TOP, p)?))
}

/// `G_phase(y) = (max_i f_i(y_i) - k_phase-rank_i f_i(y_i)) / 2` with
/// `k_phase = 1 + (phase mod P)`, i.e. the rank index `1 + (n mod P)` of
/// step `n` re-expressed in this crate's phase convention. Needs `P <= M`.
pub fn max_minus_rank_system(fam: &ScalarFamily) -> Result<BlockSystem> {
    let (m, p) = (fam.memory(), fam.period());
    if p > m {
        return Err(Error::arg(format!(
            "max-minus-rank needs P <= M (rank index reaches {p} but only {m} terms)"
        )));
    }
    let g = (1..=p)
        .map(|ph| {
            let args: Vec<Node> = (1..=m)
                .map(|i| fam.entry(i, ph).to_block_node(i, ph as i64))
                .collect();
            let k = 1 + ph % p;
            let diff = Node::sub(Node::Rank(1, args.clone()), Node::Rank(k, args));
            BlockExpr::from_node(Node::mul(Node::num(0.5), diff), m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sys = BlockSystem::new(m, g)?;
    // the weights (1/2, -1/2) have l1 norm 1, so the family bound carries over
    sys.l_bound = fam.alpha_bound;
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::k_rank;

    fn f(src: &str) -> ScalarExpr {
        ScalarExpr::parse(src).unwrap()
    }

    fn k(v: usize) -> RankIndex {
        RankIndex::new(v).unwrap()
    }

    #[test]
    fn phase_convention() {
        let got: Vec<usize> = (-2..=7).map(|n| phase_of(n, 3)).collect();
        assert_eq!(got, [1, 2, 3, 1, 2, 3, 1, 2, 3, 1]);
        assert!((1..20).all(|n| phase_of(n, 1) == 1));
    }

    #[test]
    fn single_contraction_block() {
        let fam = ScalarFamily::from_functions(vec![f("0.5*x+1")], 1).unwrap();
        let sys = RankSystem::new(fam, RankSchedule::constant(k(1), 1).unwrap()).unwrap();
        let b = sys.to_block();
        assert_eq!(b.block_dim(), 1);
        assert_eq!(b.step(1, &[0.0]).unwrap(), 1.0);
        assert_eq!(b.step(1, &[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn period_three_counterexample_bound_is_one() {
        let (fam, sched) = affine_matrix_system(&[vec![-1.0, -1.0]], &[vec![0.0, 0.0]], k(1)).unwrap();
        assert!(fam.is_flagged());
        let b = RankSystem::new(fam, sched).unwrap().to_block();
        assert_eq!(b.l_bound().unwrap().bound, 1.0);
        assert!(b.is_flagged());
        assert_eq!(b.step(1, &[1.0, 2.0]).unwrap(), -1.0);
    }

    fn median_family() -> ScalarFamily {
        let a = [0.1, 0.12, 0.14];
        let fs = a
            .iter()
            .map(|ai| f(&format!("exp({ai}*sin(0.7 + 2*pi*n/4) - x^2)")))
            .collect();
        ScalarFamily::from_functions(fs, 4).unwrap()
    }

    #[test]
    fn median_block_system_composition_fidelity() {
        let fam = median_family();
        let sys = RankSystem::new(fam.clone(), RankSchedule::constant(k(2), 4).unwrap()).unwrap();
        let b = sys.to_block();
        assert_eq!((b.memory(), b.period(), b.block_dim()), (3, 4, 12));
        let y = [0.3, -1.2, 0.8];
        for p in 1..=4 {
            let direct: Vec<f64> = (1..=3).map(|i| fam.eval_phase(i, p, y[i - 1]).unwrap()).collect();
            let want = k_rank(&direct, k(2)).unwrap();
            assert_eq!(b.step(p, &y).unwrap().to_bits(), want.to_bits());
            assert_eq!(sys.step(p, &y).unwrap().to_bits(), want.to_bits());
        }
    }

    #[test]
    fn family_is_structurally_periodic() {
        let fam = median_family();
        for n in -8..8 {
            for i in 1..=3 {
                let a = fam.eval(i, 0.4, n).unwrap();
                let b = fam.eval(i, 0.4, n + 4).unwrap();
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn median_family_certifies_on_window() {
        let mut fam = median_family();
        fam.certify(DomainInterval::new(-5.0, 5.0).unwrap(), 2001, 1.0).unwrap();
        let a = fam.alpha_bound().unwrap();
        assert!(a.is_contractive(), "{a:?}");
        assert!(!fam.is_flagged());
    }

    #[test]
    fn affine_matrix_layout_and_bound() {
        let a = vec![vec![0.5, -0.2], vec![0.1, 0.7]];
        let b = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let (fam, sched) = affine_matrix_system(&a, &b, k(2)).unwrap();
        assert_eq!((fam.memory(), fam.period()), (2, 2));
        assert_eq!(sched.ks(), &[k(2), k(2)]);
        for ph in 1..=2 {
            for i in 1..=2 {
                let (s, c) = fam.entry(i, ph).affine_coefficients(ph as i64).unwrap();
                assert_eq!((s, c), (a[ph - 1][i - 1], b[ph - 1][i - 1]));
            }
        }
        assert_eq!(fam.alpha_bound().unwrap().bound, 0.7);
        assert!(affine_matrix_system(&a, &b[..1], k(1)).is_err());
        assert!(affine_matrix_system(&a, &b, k(3)).is_err());
    }

    #[test]
    fn power_system_forms() {
        let (fam, _) = power_max_system(&[vec![2.0, 3.0]], &[0.0, 0.0], PowerTransform::Log).unwrap();
        assert_eq!(fam.eval(1, 5.0, 1).unwrap(), 2f64.ln());
        assert_eq!(fam.eval(2, -5.0, 1).unwrap(), 3f64.ln());

        let a = vec![vec![1.1, 2.0], vec![0.7, 1.3]];
        let (fam, sched) = power_max_system(&a, &[0.5, -0.3], PowerTransform::Log).unwrap();
        assert_eq!(fam.alpha_bound().unwrap().bound, 0.5);
        assert_eq!(sched.ks(), &[RankIndex::TOP, RankIndex::TOP]);

        let (raw, _) = power_max_system(&a, &[0.5, -0.3], PowerTransform::Raw).unwrap();
        assert!(raw.alpha_bound().is_none());
        let v = raw.eval(1, 4.0, 2).unwrap();
        assert!((v - 0.7 * 2.0).abs() < 1e-15);
        assert!(raw.eval(1, 0.0, 1).is_err());
        assert!(raw.eval(2, -1.0, 1).is_err());

        assert!(power_max_system(&[vec![0.0]], &[0.5], PowerTransform::Log).is_err());
        assert!(power_max_system(&[vec![1.0]], &[1.0], PowerTransform::Log).is_err());
        assert!(power_max_system(&[vec![1.0]], &[0.5, 0.5], PowerTransform::Log).is_err());
    }

    #[test]
    fn schedule_offset_and_checks() {
        let s = RankSchedule::new(vec![k(1), k(2), k(3)]).unwrap();
        assert_eq!(s.with_offset(1).ks(), &[k(2), k(3), k(1)]);
        assert_eq!(s.with_offset(-1).ks(), &[k(3), k(1), k(2)]);
        assert!(s.check(2).is_err());
        assert!(s.check(3).is_ok());
        let fam = ScalarFamily::from_functions(vec![f("x"), f("x")], 3).unwrap();
        assert!(RankSystem::new(fam, s).is_err());
    }

    #[test]
    fn max_minus_rank_shape() {
        let fam = ScalarFamily::from_functions(vec![f("0.5*x"), f("0.4*x+1"), f("0.3*x-1")], 2)
            .unwrap()
            .with_alpha_bound(LipschitzEstimate::exact(0.5));
        let sys = max_minus_rank_system(&fam).unwrap();
        assert_eq!(sys.l_bound().unwrap().bound, 0.5);
        let y = [2.0, 2.0, 2.0];
        // values 1, 1.8, -0.4: phase 1 uses the 2-rank, phase 2 the max
        assert!((sys.step(1, &y).unwrap() - 0.5 * (1.8 - 1.0)).abs() < 1e-15);
        assert_eq!(sys.step(2, &y).unwrap(), 0.0);

        let short = ScalarFamily::from_functions(vec![f("0.5*x")], 2).unwrap();
        assert!(max_minus_rank_system(&short).is_err());
    }

    #[test]
    fn initial_condition_rejects_non_finite() {
        assert!(InitialCondition::new(vec![]).is_err());
        assert!(matches!(
            InitialCondition::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }
}
