//! k-rank, median and the sup distance they do not expand.

use rank_recur::{k_rank, median, sup_distance, RankIndex};

fn main() -> rank_recur::Result<()> {
    let v = [3.0, -1.0, 7.5, 3.0, 0.25];
    for k in 1..=v.len() {
        println!("{k}-rank of {v:?} = {}", k_rank(&v, RankIndex::new(k)?)?);
    }
    println!("median = {}", median(&v)?);

    let w = [3.1, -1.2, 7.0, 2.9, 0.3];
    let d = sup_distance(&v, &w)?;
    for k in 1..=v.len() {
        let k = RankIndex::new(k)?;
        let gap = (k_rank(&v, k)? - k_rank(&w, k)?).abs();
        println!("k = {}: |R_k(v) - R_k(w)| = {gap:.3} <= {d:.3}", k.get());
    }
    Ok(())
}
