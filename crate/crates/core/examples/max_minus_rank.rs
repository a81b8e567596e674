//! Half the gap between the max and a phase-dependent rank. The update is
//! built directly as a block system, since it is not itself a rank.

use rank_recur::block_map::{extract_periodic_orbit, solve_fixed_point, BlockMap, SolveOptions};
use rank_recur::expr::{LipschitzEstimate, ScalarExpr};
use rank_recur::simulate::{detect_period, iterate, DetectOptions};
use rank_recur::system::{max_minus_rank_system, InitialCondition, ScalarFamily};

fn main() -> rank_recur::Result<()> {
    let fs = ["0.9*sin(x) + 2", "0.4*x + 0.5*cos(2*pi*n/3)", "-0.6*x + 1", "0.8*cos(x + 2*pi*n/3)"]
        .iter()
        .map(|s| ScalarExpr::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let fam = ScalarFamily::from_functions(fs, 3)?.with_alpha_bound(LipschitzEstimate::exact(0.9));
    let sys = max_minus_rank_system(&fam)?;
    for (p, g) in sys.g().iter().enumerate() {
        println!("G_{} = {g}", p + 1);
    }

    let t = iterate(&sys, &InitialCondition::new(vec![0.0, 1.0, -1.0, 2.0])?, 3_000)?;
    let sim = detect_period(&t, &DetectOptions::for_period(3))?.expect("settles");
    println!("simulated: period {} values {:?}", sim.period, sim.phase_values);

    let map = BlockMap::new(&sys);
    let fp = solve_fixed_point(&map, &vec![0.0; map.dim()], &SolveOptions::default())?;
    let orb = extract_periodic_orbit(&fp.x_star, 3, 1e-12)?;
    println!("solved:    period {} values {:?}", orb.period, orb.unrolled(orb.period));
    Ok(())
}
