//! Two systems outside the contractive class.

use rank_recur::expr::{estimate_scalar_lipschitz, DomainInterval, ScalarExpr};
use rank_recur::simulate::{detect_period, iterate, DetectOptions};
use rank_recur::system::{InitialCondition, RankSchedule, RankSystem, ScalarFamily};
use rank_recur::RankIndex;

fn main() -> rank_recur::Result<()> {
    let neg = ScalarExpr::parse("-x")?;
    let fam = ScalarFamily::from_functions(vec![neg.clone(), neg], 1)?;
    let sys = RankSystem::new(fam, RankSchedule::constant(RankIndex::TOP, 1)?)?;
    let t = iterate(&sys, &InitialCondition::new(vec![1.0, 2.0])?, 30)?;
    println!("max(-x_(n-1), -x_(n-2)): {:?}", &t.values[..12]);
    let o = detect_period(&t, &DetectOptions { p_max: 4, tol: 1e-12, tail_fraction: 0.5 })?;
    println!("detected period {:?} although P = 1", o.map(|o| o.period));

    let tent = ScalarExpr::parse("max(1 - 2*x, 2*x - 1)")?;
    let e = estimate_scalar_lipschitz(&tent, 1, DomainInterval::new(0.0, 1.0)?, 10_001, 1.0)?;
    println!("tent map Lipschitz estimate {:.4}", e.bound);
    let fam = ScalarFamily::from_functions(vec![tent], 1)?;
    let sys = RankSystem::new(fam, RankSchedule::constant(RankIndex::TOP, 1)?)?;
    let a = iterate(&sys, &InitialCondition::new(vec![0.2718281828459045])?, 40)?;
    let b = iterate(&sys, &InitialCondition::new(vec![0.2718281828459045 + 1e-10])?, 40)?;
    for n in [1, 10, 20, 30, 40] {
        println!("n = {n:>2}: {:.10} vs {:.10}", a.x(n), b.x(n));
    }
    // doubling shifts one bit out per step, so binary orbits end at 1 after ~55 steps
    let long = iterate(&sys, &InitialCondition::new(vec![0.2718281828459045])?, 80)?;
    println!("x_80 = {} in floating point", long.x(80));
    Ok(())
}
