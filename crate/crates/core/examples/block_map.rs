//! The block map of a two-phase affine system: apply it, solve its fixed
//! point and read off the periodic orbit.

use rank_recur::block_map::{
    extract_periodic_orbit, shift_commutation_check, solve_fixed_point, BlockMap, SolveOptions,
};
use rank_recur::system::{affine_matrix_system, RankSystem, Recurrence};
use rank_recur::RankIndex;

fn main() -> rank_recur::Result<()> {
    let a = vec![vec![0.5, -0.3], vec![0.2, 0.8]];
    let b = vec![vec![1.0, 0.5], vec![-1.0, 2.0]];
    let (fam, sched) = affine_matrix_system(&a, &b, RankIndex::TOP)?;
    let sys = RankSystem::new(fam, sched)?;
    let blk = sys.to_block();
    for (p, g) in blk.g().iter().enumerate() {
        println!("G_{} = {g}", p + 1);
    }

    let map = BlockMap::new(&blk);
    println!("block dimension s = {}", blk.block_dim());
    println!("F(0) = {:?}", map.apply(&vec![0.0; map.dim()])?);

    let opts = SolveOptions::default();
    let fp = solve_fixed_point(&map, &vec![0.0; map.dim()], &opts)?;
    println!(
        "x* = {:?} after {} iterations, residual {:e}",
        fp.x_star, fp.iterations, fp.residual
    );
    let shift = shift_commutation_check(&fp.x_star, blk.period(), opts.tol);
    println!("shift check passed: {}", shift.passed);
    let orbit = extract_periodic_orbit(&fp.x_star, blk.period(), opts.tol)?;
    println!("orbit: period {} values {:?}", orbit.period, orbit.phase_values);
    Ok(())
}
