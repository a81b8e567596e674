//! Load a TOML system file, build it and print its certificates.
//!
//! `cargo run --example system_file -- docs/systems/median.toml`

use std::path::PathBuf;

use rank_recur::definition::SystemDefinition;

fn main() -> rank_recur::Result<()> {
    let path = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/systems/median.toml")
    });
    let def = SystemDefinition::load(&path)?;
    println!("{}: {} system, M = {}, P = {}", def.name, def.spec.kind(), def.memory, def.period);
    let built = def.build(0)?;
    for c in &built.certificates {
        println!("  {:<14} {:?} {:.6}", c.label, c.estimate.method, c.estimate.bound);
    }
    println!("certified: {}", built.block.is_certified());
    println!("initial: {:?}", def.initial_or_default().values());
    Ok(())
}
