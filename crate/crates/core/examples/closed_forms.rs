//! Explicit limits: autonomous k-rank, the M = P = 2 max orbit and the
//! power-law formula.

use rank_recur::closed_form::{
    autonomous_rank_limit, p2m2_max_orbit, power_max_p2m2_limit, FixedPointOptions,
};
use rank_recur::expr::{EvalError, ScalarExpr};
use rank_recur::system::ScalarFamily;
use rank_recur::RankIndex;

fn main() -> rank_recur::Result<()> {
    let opts = FixedPointOptions::default();

    let fs = ["0.5*cos(x) + 1", "0.3*x - 1", "0.7*sin(x) + 0.2"]
        .iter()
        .map(|s| ScalarExpr::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let fam = ScalarFamily::from_functions(fs, 1)?;
    let lim = autonomous_rank_limit(&fam, RankIndex::new(2)?, &opts)?;
    println!("fixed points {:?}", lim.fixed_points.r);
    println!("2-rank limit {}", lim.value);

    let f1 = |x: f64| -> Result<f64, EvalError> { Ok(0.5 * x.sin() + 1.0) };
    let f2 = |x: f64| -> Result<f64, EvalError> { Ok(0.3 * x + 0.2) };
    let g1 = |x: f64| -> Result<f64, EvalError> { Ok(0.6 * x - 0.5) };
    let g2 = |x: f64| -> Result<f64, EvalError> { Ok(0.4 * x.cos() + 1.5) };
    let orb = p2m2_max_orbit(&f1, &f2, &g1, &g2, &opts)?;
    println!("r = {:?}", orb.r);
    println!("even {} odd {} ({:?})", orb.even, orb.odd, orb.case);

    let a = vec![vec![1.5, 0.8], vec![2.0, 1.2]];
    let p = power_max_p2m2_limit(&a, [0.5, -0.4])?;
    println!("power law: even {} odd {}", p.even, p.odd);
    println!("  even terms {:?}", p.even_terms);
    println!("  odd terms  {:?}", p.odd_terms);
    Ok(())
}
