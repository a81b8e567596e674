//! Lipschitz certificates: exact for affine maps, sampled otherwise.

use rank_recur::expr::{
    estimate_block_lipschitz, estimate_scalar_lipschitz, BlockExpr, DomainInterval, ScalarExpr,
    DEFAULT_GRID_POINTS, DEFAULT_SAFETY_FACTOR,
};

fn main() -> rank_recur::Result<()> {
    let dom = DomainInterval::new(-5.0, 5.0)?;
    for src in ["0.7*x - 3", "exp(0.15 - x^2)", "0.5*sin(x) + 0.2*cos(3*x)", "max(1 - 2*x, 2*x - 1)"] {
        let f = ScalarExpr::parse(src)?;
        let e = estimate_scalar_lipschitz(&f, 1, dom, DEFAULT_GRID_POINTS, DEFAULT_SAFETY_FACTOR)?;
        println!(
            "{src:<28} {:?} bound {:.6} {}",
            e.method,
            e.bound,
            if e.is_contractive() { "" } else { "(flagged)" }
        );
    }

    let g = BlockExpr::parse("0.3*y1 - 0.4*y2 + 0.2*abs(y3)", 3)?;
    let e = estimate_block_lipschitz(&g, dom, 100_000, 7)?;
    println!("block update {g}: sampled sup-Lipschitz {:.6} (exact 0.9)", e.bound);
    Ok(())
}
