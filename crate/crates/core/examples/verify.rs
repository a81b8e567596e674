//! Run a few property suites at reduced size.

use rank_recur::verify::{run_suites, VerifyOptions};

fn main() -> rank_recur::Result<()> {
    let names: Vec<String> = ["rank-nonexpansive", "block-direct", "p2m2", "toward-fixed-point"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rep = run_suites(&names, &VerifyOptions { rng_seed: 3, scale: 0.2 })?;
    for s in &rep.suites {
        println!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name);
        for c in &s.checks {
            println!("    {:<24} {}", c.name, c.detail);
        }
    }
    Ok(())
}
