//! Median of three forced maps: iterate and detect the period-4 limit.

use rank_recur::expr::ScalarExpr;
use rank_recur::simulate::{detect_period, iterate, DetectOptions};
use rank_recur::system::{InitialCondition, RankSchedule, RankSystem, ScalarFamily};
use rank_recur::RankIndex;

fn main() -> rank_recur::Result<()> {
    let fs = [(0.10, 0.7), (0.12, 1.3), (0.14, 2.1)]
        .iter()
        .map(|(a, b)| ScalarExpr::parse(&format!("exp({a}*sin({b} + 2*pi*n/4) - x^2)")))
        .collect::<Result<Vec<_>, _>>()?;
    let fam = ScalarFamily::from_functions(fs, 4)?;
    let sys = RankSystem::new(fam, RankSchedule::constant(RankIndex::new(2)?, 4)?)?;

    let t = iterate(&sys, &InitialCondition::new(vec![0.1, 0.2, 0.3])?, 2_000)?;
    for n in 1..=8 {
        println!("x_{n} = {:.10}  (phase {})", t.x(n), t.phase(n));
    }
    match detect_period(&t, &DetectOptions::for_period(4))? {
        Some(o) => println!("period {} from n = {:?}: {:?}", o.period, o.onset, o.phase_values),
        None => println!("no period detected"),
    }
    Ok(())
}
