//! Parsing, printing and evaluating forcing functions and block updates.

use rank_recur::expr::{BlockExpr, ScalarExpr};

fn main() -> rank_recur::Result<()> {
    let f = ScalarExpr::parse("exp(0.1*sin(0.7 + 2*pi*n/4) - x^2)")?;
    println!("f = {f}");
    for n in 1..=4 {
        println!("  f(0.5, n = {n}) = {:.12}", f.eval(0.5, n)?);
    }

    let g = BlockExpr::parse("0.5*(max(y1, y2, y3) - rank(2; y1, y2, y3))", 3)?;
    println!("G = {g}");
    println!("  G(1, 4, 2) = {}", g.eval(&[1.0, 4.0, 2.0])?);

    let affine = ScalarExpr::parse("-(0.3*x - 2)/4")?;
    println!("{affine} is affine with (slope, offset) = {:?}", affine.affine_coefficients(1));

    for bad in ["0.5*x +", "rank(4; x, x)", "x^x", "foo(x)"] {
        match ScalarExpr::parse(bad) {
            Ok(_) => println!("`{bad}` parsed"),
            Err(e) => println!("`{bad}`: {e}"),
        }
    }
    match ScalarExpr::parse("ln(x)")?.eval(-1.0, 1) {
        Ok(v) => println!("ln(-1) = {v}"),
        Err(e) => println!("{e}"),
    }
    Ok(())
}
