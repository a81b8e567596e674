//! Several seeds on one forced system: same orbit, geometric approach.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rank_recur::simulate::{convergence_report, DetectOptions};
use rank_recur::system::{affine_matrix_system, InitialCondition, RankSchedule, RankSystem};
use rank_recur::RankIndex;

fn main() -> rank_recur::Result<()> {
    let a = vec![vec![0.6, 0.3, -0.5], vec![-0.2, 0.7, 0.4], vec![0.5, 0.5, 0.5]];
    let b = vec![vec![1.0, 0.0, 2.0], vec![-1.0, 3.0, 0.5], vec![0.0, 0.0, 1.0]];
    let (fam, _) = affine_matrix_system(&a, &b, RankIndex::TOP)?;
    let sched = RankSchedule::new(vec![RankIndex::new(1)?, RankIndex::new(2)?, RankIndex::new(3)?])?;
    let sys = RankSystem::new(fam, sched)?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seeds = (0..4)
        .map(|_| InitialCondition::new((0..3).map(|_| rng.gen_range(-10.0..10.0)).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    let rep = convergence_report(&sys, &seeds, 5_000, &DetectOptions::for_period(3))?;
    for (i, s) in rep.seeds.iter().enumerate() {
        let o = s.orbit.as_ref().expect("contractive systems settle");
        println!("seed {i}: period {} onset {:?} rate {:?}", o.period, o.onset, s.rate);
    }
    println!("largest inter-seed distance {:?}", rep.max_distance());
    println!("fitted rate {:?}, alpha {:?}", rep.rate, rep.alpha);
    Ok(())
}
